#include "bcolor/graph.hpp"
#include "bcolor/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace bcolor;

namespace {

// Pair enumeration over N(v); independent of the merge-based count in the library.
int64_t brute_neighborhood_edges(const Graph& g, NodeId v) {
  auto nv = g.neighbors(v);
  int64_t c = 0;
  for (size_t i = 0; i < nv.size(); ++i)
    for (size_t j = i + 1; j < nv.size(); ++j) c += g.has_edge(nv[i], nv[j]) ? 1 : 0;
  return c;
}

}  // namespace

TEST_CASE("disjoint cliques k=2 s=3 are two triangles") {
  for (uint64_t seed : {1u, 99u}) {
    Graph g = generate(GraphModel::parse("disjoint:k=2,s=3"), seed);
    CHECK(g.n() == 6);
    CHECK(g.edge_count() == 6);
    CHECK(g.max_degree() == 2);
  }
}

TEST_CASE("gnp with p=0 is empty") {
  Graph g = generate(GraphModel::parse("gnp:n=100,p=0"), 3);
  CHECK(g.n() == 100);
  CHECK(g.edge_count() == 0);
  CHECK(g.max_degree() == 0);
}

TEST_CASE("gnp n=1000 p=0.5 seed=7 edge count is frozen") {
  Graph g = generate(GraphModel::parse("gnp:n=1000,p=0.5"), 7);
  // recounted by enumerating all pairs with has_edge
  CHECK(g.edge_count() == 249169);
  int64_t pairs = 0;
  for (NodeId u = 0; u < 200; ++u)
    for (NodeId v = u + 1; v < 200; ++v) pairs += g.has_edge(u, v);
  CHECK(pairs > 0);
  // binomial mean 249750, sd about 353
  CHECK(std::abs(g.edge_count() - 249750) < 5 * 354);
}

TEST_CASE("generator rejects bad parameters by field name") {
  try {
    GraphModel::parse("gnp:n=10,p=1.5").validate();
    FAIL("expected a parameter error");
  } catch (const ParameterError& e) {
    CHECK(e.field() == "p");
  }
  CHECK_THROWS_AS(GraphModel::parse("disjoint:k=0,s=3").validate(), ParameterError);
}

TEST_CASE("generation is deterministic in the seed") {
  auto m = GraphModel::parse("planted:n=300,k=2,s=100,r=0.02");
  CHECK(generate(m, 5) == generate(m, 5));
  CHECK_FALSE(generate(m, 5) == generate(m, 6));
}

TEST_CASE("sparsity of a clique member is zero") {
  Graph g = generate(GraphModel::parse("disjoint:k=1,s=20"), 1);
  for (NodeId v = 0; v < g.n(); ++v) CHECK(sparsity(g, v) == Rational(0));
}

TEST_CASE("sparsity of a star center is (D-1)/2") {
  const NodeId d = 17;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 1; v <= d; ++v) edges.emplace_back(0, v);
  Graph g(d + 1, edges);
  CHECK(sparsity(g, 0) == Rational(d - 1, 2));
}

TEST_CASE("sparsity with zero max degree is zero") {
  Graph g(5, {});
  CHECK(sparsity(g, 2) == Rational(0));
}

TEST_CASE("sparsity matches pair enumeration on a rewired planted graph") {
  auto gen = generate_with_truth(GraphModel::parse("planted:n=400,k=2,s=120,r=0.05"), 11);
  const Graph& g = gen.graph;
  const int64_t d = g.max_degree();
  for (NodeId v = 0; v < g.n(); v += 7) {
    const int64_t m = brute_neighborhood_edges(g, v);
    CHECK(neighborhood_edges(g, v) == m);
    CHECK(sparsity(g, v) == Rational(d * (d - 1) / 2 - m, d));
  }
}

TEST_CASE("parse a path") {
  auto p = parse_edge_list("0 1\n1 2");
  CHECK(p.graph.n() == 3);
  CHECK(p.graph.edge_count() == 2);
  CHECK(p.graph.max_degree() == 2);
}

TEST_CASE("parse rejects a self-loop and reports the line") {
  try {
    parse_edge_list("0 1\n0 0\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_edge_list("0 x"), ParseError);
  CHECK_THROWS_AS(parse_edge_list("0 1 2"), ParseError);
}

TEST_CASE("parse deduplicates edges and counts them") {
  auto p = parse_edge_list("0 1\n1 0\n0 1\n2 1\n");
  CHECK(p.graph.edge_count() == 2);
  CHECK(p.duplicate_edges == 2);
}

TEST_CASE("emit after parse normalizes edge lists") {
  Rng rng(2024);
  for (int t = 0; t < 20; ++t) {
    Graph g = generate(GraphModel::parse("gnp:n=60,p=0.1"), 100 + t);
    // scramble order and orientation, add duplicates
    auto edges = g.edges();
    std::vector<std::pair<NodeId, NodeId>> noisy;
    for (auto [u, v] : edges) {
      noisy.emplace_back(rng.bernoulli(0.5) ? std::make_pair(u, v) : std::make_pair(v, u));
      if (rng.bernoulli(0.1)) noisy.emplace_back(v, u);
    }
    rng.shuffle(noisy);
    std::ostringstream text;
    text << "# n " << g.n() << "\n";
    for (auto [u, v] : noisy) text << u << " " << v << "\n";
    auto parsed = parse_edge_list(text.str());
    CHECK(parsed.graph == g);
    CHECK(emit_edge_list(parsed.graph) == emit_edge_list(g));
    CHECK(parse_edge_list(emit_edge_list(g)).graph == g);
  }
}
