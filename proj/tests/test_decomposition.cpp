#include "bcolor/config.hpp"
#include "bcolor/decomposition.hpp"
#include "bcolor/graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace bcolor;

namespace {

// Per-member recount straight from has_edge.
void brute_stats(const Graph& g, const std::vector<NodeId>& k, std::vector<int>& ext, std::vector<int>& anti) {
  ext.clear();
  anti.clear();
  for (NodeId v : k) {
    int inside = 0;
    for (NodeId u : k) inside += (u != v && g.has_edge(u, v)) ? 1 : 0;
    ext.push_back(g.degree(v) - inside);
    anti.push_back(static_cast<int>(k.size()) - 1 - inside);
  }
}

double symmetric_difference(const std::vector<NodeId>& found, const std::vector<int>& planted, int label) {
  int planted_size = 0, common = 0;
  for (NodeId v = 0; v < static_cast<NodeId>(planted.size()); ++v)
    if (planted[v] == label) ++planted_size;
  for (NodeId v : found) common += planted[v] == label;
  return static_cast<double>(found.size() + planted_size - 2 * common) / planted_size;
}

void check_planted_recovery(const Decomposition& d, const GeneratedGraph& gen, int k) {
  REQUIRE(static_cast<int>(d.cliques.size()) == k);
  for (const auto& c : d.cliques) CHECK(symmetric_difference(c.members, gen.planted, gen.planted[c.leader]) <= 0.05);
}

}  // namespace

TEST_CASE("disjoint (Delta+1)-cliques decompose into themselves") {
  // needs eps * Delta >= 1 so that a (Delta+1)-clique fits the size bound
  const Graph g = generate(GraphModel::parse("disjoint:k=3,s=100"), 1);
  for (int mode = 0; mode < 2; ++mode) {
    Decomposition d;
    if (mode == 0) d = acd_oracle(g, 0.02);
    else {
      EngineOptions opt;
      opt.seed = 5;
      Engine eng(g, opt);
      d = acd_distributed(eng, 0.02, 1);
    }
    CHECK(d.sparse.empty());
    REQUIRE(d.cliques.size() == 3);
    for (const auto& k : d.cliques) {
      CHECK(k.members.size() == 100);
      CHECK(k.e_bar == Rational(0));
      CHECK(k.a_bar == Rational(0));
      CHECK(k.leader == k.members.front());
    }
    CHECK(validate_acd(g, d, 0.02, 1).ok());
  }
}

TEST_CASE("sparse random graph: everyone sparse, sparsity checked directly") {
  const Graph g = generate(GraphModel::parse("gnp:n=2000,p=0.02"), 3);
  const double eps = 0.02;
  auto d = acd_oracle(g, eps);
  CHECK(d.cliques.empty());
  CHECK(d.sparse.size() == 2000);
  const double need = eps * eps * g.max_degree();
  for (NodeId v : d.sparse) CHECK(boost::rational_cast<double>(sparsity(g, v)) >= need);
  EngineOptions opt;
  opt.seed = 3;
  Engine eng(g, opt);
  auto dd = acd_distributed(eng, eps, 1);
  CHECK(dd.cliques.empty());
  CHECK(validate_acd(g, dd, eps, 1).ok());
}

TEST_CASE("planted cliques are recovered up to 5% symmetric difference") {
  // 2% rewiring only leaves room for the inner-degree bound once eps is 0.05
  const auto gen = generate_with_truth(GraphModel::parse("planted:n=4096,k=2,s=1800,r=0.02"), 3);
  auto d = acd_oracle(gen.graph, 0.05);
  check_planted_recovery(d, gen, 2);
  CHECK(validate_acd(gen.graph, d, 0.05, 1).ok());
  EngineOptions opt;
  opt.seed = 3;
  Engine eng(gen.graph, opt);
  auto dd = acd_distributed(eng, 0.05, 1);
  check_planted_recovery(dd, gen, 2);
}

TEST_CASE("planted cliques at the desk epsilon") {
  const auto gen = generate_with_truth(GraphModel::parse("planted:n=4096,k=2,s=1800,r=0.005"), 8);
  auto d = acd_oracle(gen.graph, 0.02);
  check_planted_recovery(d, gen, 2);
  CHECK(validate_acd(gen.graph, d, 0.02, 1).ok());
}

TEST_CASE("clique_stats of a disjoint clique") {
  const Graph g = generate(GraphModel::parse("disjoint:k=2,s=10"), 1);
  std::vector<NodeId> k;
  for (NodeId v = 0; v < g.n(); ++v)
    if (g.has_edge(0, v) || v == 0) k.push_back(v);
  auto s = clique_stats(g, k);
  CHECK(s.e_bar == Rational(0));
  CHECK(s.a_bar == Rational(0));
}

TEST_CASE("clique_stats with one missing edge") {
  const int size = 12;
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId a = 0; a < size; ++a)
    for (NodeId b = a + 1; b < size; ++b)
      if (!(a == 0 && b == 1)) e.emplace_back(a, b);
  Graph g(size, e);
  std::vector<NodeId> k(size);
  for (NodeId v = 0; v < size; ++v) k[v] = v;
  auto s = clique_stats(g, k);
  CHECK(s.a_bar == Rational(2, size));
  CHECK(s.e_bar == Rational(0));
  CHECK(s.anti[0] == 1);
  CHECK(s.anti[1] == 1);
  CHECK(s.anti[2] == 0);
}

TEST_CASE("clique_stats matches a brute-force recount on planted cliques") {
  const auto gen = generate_with_truth(GraphModel::parse("planted:n=600,k=2,s=200,r=0.03"), 2);
  for (int label = 0; label < 2; ++label) {
    std::vector<NodeId> k;
    for (NodeId v = 0; v < gen.graph.n(); ++v)
      if (gen.planted[v] == label) k.push_back(v);
    auto s = clique_stats(gen.graph, k);
    std::vector<int> ext, anti;
    brute_stats(gen.graph, k, ext, anti);
    CHECK(s.ext == ext);
    CHECK(s.anti == anti);
    int64_t se = 0, sa = 0;
    for (size_t i = 0; i < k.size(); ++i) {
      se += ext[i];
      sa += anti[i];
    }
    CHECK(s.e_bar == Rational(se, static_cast<int64_t>(k.size())));
    CHECK(s.a_bar == Rational(sa, static_cast<int64_t>(k.size())));
  }
}

TEST_CASE("classification and reserved prefix under the paper-constants preset") {
  const Config cfg = Config::paper();
  const int ell = 50, delta = 1000000;
  auto full = classify_and_reserve(Rational(0), Rational(0), ell, delta, cfg);
  CHECK(full.cls == CliqueClass::Full);
  CHECK(full.x == 200 * ell);

  auto open = classify_and_reserve(Rational(300), Rational(100), ell, delta, cfg);
  CHECK(open.cls == CliqueClass::Open);
  CHECK(open.x == static_cast<int>(std::floor(cfg.gamma * cfg.eps / 8 * 300)));

  auto closed = classify_and_reserve(Rational(60), Rational(60), ell, delta, cfg);
  CHECK(closed.cls == CliqueClass::Closed);
  CHECK(closed.x == 400 * 60);

  auto closed_frac = classify_and_reserve(Rational(61, 2), Rational(61, 2), ell, delta, cfg);
  CHECK(closed_frac.x == 400 * 61 / 2);
}

TEST_CASE("classification with the desk constants") {
  const Config cfg = Config::desk();
  CHECK(classify_and_reserve(Rational(3), Rational(2), 62, 2000, cfg).x == static_cast<int>(cfg.full_reserve * 62));
  CHECK(classify_and_reserve(Rational(90), Rational(10), 62, 2000, cfg).cls == CliqueClass::Open);
  CHECK(classify_and_reserve(Rational(40), Rational(40), 62, 2000, cfg).x == 280);
}

TEST_CASE("a reserved prefix as large as the color space is a parameter error") {
  const Config cfg = Config::paper();
  try {
    classify_and_reserve(Rational(0), Rational(0), 50, 5000, cfg);
    FAIL("expected a parameter error");
  } catch (const ParameterError& e) {
    CHECK(e.field() == "full_reserve");
  }
}

TEST_CASE("outliers are the members far above the averages") {
  Decomposition dec;
  dec.ext = {0, 0, 0, 40};
  dec.anti = {1, 1, 1, 1};
  AlmostClique k;
  k.members = {0, 1, 2, 3};
  k.e_bar = Rational(10);
  k.a_bar = Rational(1);
  CHECK(find_outliers(k, dec, 3).size() == 1);
  CHECK(find_outliers(k, dec, 4) == std::vector<NodeId>{3});
  CHECK(find_outliers(k, dec, 5).empty());
}

TEST_CASE("validate_acd flags a clique node moved to the sparse side") {
  const Graph g = generate(GraphModel::parse("disjoint:k=2,s=100"), 1);
  auto d = acd_oracle(g, 0.02);
  REQUIRE(validate_acd(g, d, 0.02, 1).ok());
  const NodeId moved = d.cliques[0].members.back();
  d.cliques[0].members.pop_back();
  d.clique_of[moved] = -1;
  d.sparse.push_back(moved);
  fill_stats(g, d);
  auto rep = validate_acd(g, d, 0.02, 1);
  bool sparse_flag = false;
  for (const auto& v : rep.violations) sparse_flag = sparse_flag || (v.clause == "sparse" && v.node == moved);
  CHECK(sparse_flag);
}

TEST_CASE("validate_acd rejects a random decomposition") {
  const Graph g = generate(GraphModel::parse("gnp:n=300,p=0.5"), 6);
  Decomposition d;
  d.clique_of.assign(g.n(), -1);
  Rng rng(4);
  for (int i = 0; i < 3; ++i) {
    AlmostClique k;
    k.id = i;
    d.cliques.push_back(k);
  }
  for (NodeId v = 0; v < g.n(); ++v) {
    const int c = static_cast<int>(rng.below(4));
    if (c == 3) d.sparse.push_back(v);
    else {
      d.cliques[c].members.push_back(v);
      d.clique_of[v] = c;
    }
  }
  for (auto& k : d.cliques) k.leader = k.members.front();
  fill_stats(g, d);
  auto rep = validate_acd(g, d, 0.02, 1);
  CHECK_FALSE(rep.ok());
}

TEST_CASE("validate_acd flags a partition error") {
  const Graph g = generate(GraphModel::parse("disjoint:k=2,s=100"), 1);
  auto d = acd_oracle(g, 0.02);
  d.sparse.push_back(d.cliques[1].members[0]);
  auto rep = validate_acd(g, d, 0.02, 1);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations[0].clause == "partition");
}
