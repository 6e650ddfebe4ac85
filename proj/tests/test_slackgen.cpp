#include "bcolor/slackgen.hpp"

#include "fixture.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace bcolor;
using namespace bcolor::testing;

TEST_CASE("try_color: smaller ID wins a same-color conflict") {
  // node 0 gives Delta = 5 so that color 5 exists
  Graph g(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {1, 2}});
  Engine eng(g, {});
  std::vector<Color> cand(6, kNoColor);
  cand[1] = cand[2] = 5;
  CHECK(try_color(eng, {1, 2}, cand) == 1);
  CHECK(eng.color(1) == 5);
  CHECK(eng.color(2) == kNoColor);
}

TEST_CASE("try_color: isolated node always adopts") {
  Graph g(3, {{0, 1}});
  for (Color c = 1; c <= 2; ++c) {
    Engine eng(g, {});
    std::vector<Color> cand(3, c);
    try_color(eng, {2}, cand);
    CHECK(eng.color(2) == c);
  }
}

TEST_CASE("try_color: triangle with distinct colors all adopt") {
  Graph g(3, {{0, 1}, {1, 2}, {0, 2}});
  Engine eng(g, {});
  CHECK(try_color(eng, {0, 1, 2}, {3, 1, 2}) == 3);
  CHECK(verify_coloring(g, eng.colors()).ok());
}

TEST_CASE("try_color: a color already held by a neighbor is refused") {
  Graph g(3, {{0, 1}, {1, 2}});
  Engine eng(g, {});
  eng.set_color(0, 2);
  eng.flush();
  CHECK(try_color(eng, {1}, {0, 2, 0}, false) == 0);
  CHECK(eng.color(1) == kNoColor);
  // strict mode treats it as a caller bug
  try_color(eng, {1}, {0, 2, 0}, true);
  CHECK(eng.faults().back().kind == Fault::Kind::Contract);
}

TEST_CASE("slack generation with p_s = 0 colors nobody") {
  Config cfg;
  cfg.p_s = 0;
  Fixture f(generate(GraphModel::parse("gnp:n=200,p=0.1"), 1), cfg);
  CHECK(slack_generation(f.st) == 0);
  CHECK(f.eng.colored_count() == 0);
}

TEST_CASE("slack generation with p_s = 1 on an independent set colors everyone") {
  Config cfg;
  cfg.p_s = 1;
  Fixture f(Graph(50, {}), cfg);
  CHECK(slack_generation(f.st) == 50);
  CHECK(verify_coloring(f.g, f.eng.colors()).ok());
}

TEST_CASE("slack after slack generation on the desk instance") {
  Config cfg;
  cfg.seed = 3;
  Fixture f(generate(GraphModel::parse("planted:n=4096,k=2,s=1800,r=0.005"), 3), cfg);
  REQUIRE(f.st.dec.cliques.size() == 2);
  slack_generation(f.st);
  f.eng.flush();
  const Graph& g = f.g;
  const int delta = g.max_degree();
  AdjacencyBits rows(g);
  const int64_t pairs = static_cast<int64_t>(delta) * (delta - 1) / 2;
  int64_t checked = 0, ok = 0;
  double worst = 1e9;
  for (NodeId v = 0; v < g.n(); v += 3) {
    if (f.eng.color(v) != kNoColor) continue;
    const double zeta = static_cast<double>(pairs - rows.induced_edges(v, g)) / delta;
    if (zeta <= 0) continue;
    std::set<Color> used;
    int64_t uncolored = 0;
    for (NodeId u : g.neighbors(v)) {
      if (f.eng.color(u) != kNoColor) used.insert(f.eng.color(u));
      else ++uncolored;
    }
    const double slack = static_cast<double>(delta + 1 - static_cast<int64_t>(used.size()) - uncolored);
    ++checked;
    ok += slack >= f.st.cfg.gamma * zeta;
    worst = std::min(worst, slack / zeta);
  }
  MESSAGE("slack/zeta worst ratio " << worst << ", " << ok << " of " << checked << " at gamma " << f.st.cfg.gamma);
  REQUIRE(checked > 1000);
  CHECK(ok >= 0.95 * checked);
}

TEST_CASE("matching skips cliques without anti-edges") {
  Config cfg;
  Fixture f(generate(GraphModel::parse("disjoint:k=2,s=120"), 1), cfg);
  auto& k = f.st.dec.cliques[0];
  k.cls = CliqueClass::Closed;
  CHECK(colorful_matching(f.st).empty());
  CHECK(k.matching.empty());
}

TEST_CASE("matching on a clique with one planted anti-matching") {
  const NodeId size = 200;
  const int m = 60;
  std::vector<std::pair<NodeId, NodeId>> missing;
  for (int i = 0; i < m; ++i) missing.emplace_back(2 * i, 2 * i + 1);
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Config cfg;
    cfg.seed = seed;
    // one anti-edge per node pairs up at ~1/(4 Delta) per try, so the desk budget is too short
    cfg.matching_budget = 16;
    Fixture f(clique_minus(size, missing), cfg);
    REQUIRE(f.st.dec.cliques.size() == 1);
    auto& k = f.st.dec.cliques[0];
    CHECK(k.a_bar == Rational(2 * m, size));
    // force the matching path; desk constants would classify this clique as full
    k.cls = CliqueClass::Closed;
    k.x = static_cast<int>(cfg.closed_reserve * 2 * m / size);
    for (NodeId v : k.members) f.st.x_of[v] = k.x;
    auto reps = colorful_matching(f.st);
    REQUIRE(reps.size() == 1);
    const int64_t want = std::min<int64_t>(reps[0].target, m);
    CHECK(static_cast<int64_t>(k.matching.size()) >= want);
    CHECK(matching_valid(f.g, f.eng.colors(), k));
    f.eng.flush();
    CHECK(verify_coloring(f.g, f.eng.colors()).proper);
    CHECK(clique_palette_violations(f.st, 0).empty());
  }
}

TEST_CASE("matching_valid rejects bad pairs") {
  Graph g = clique_minus(6, {{0, 1}, {2, 3}});
  std::vector<Color> colors = {4, 4, 5, 5, 0, 0};
  AlmostClique k;
  k.members = {0, 1, 2, 3, 4, 5};
  k.matching = {{0, 1, 4}, {2, 3, 5}};
  CHECK(matching_valid(g, colors, k));
  k.matching = {{0, 1, 4}, {2, 3, 4}};
  CHECK_FALSE(matching_valid(g, colors, k));
  k.matching = {{0, 2, 4}};
  CHECK_FALSE(matching_valid(g, colors, k));
}

TEST_CASE("avail: no anti-edges") {
  Graph g(3, {{0, 1}});
  Engine eng(g, {});
  CHECK(avail(eng, {1, 2}, {}) == 0);
}

TEST_CASE("avail: one anti-edge with uncolored surroundings counts all of [Delta+1]") {
  Graph g = clique_minus(5, {{0, 1}});
  Engine eng(g, {});
  std::vector<Color> d;
  for (Color c = 1; c <= g.max_degree() + 1; ++c) d.push_back(c);
  CHECK(avail(eng, d, anti_edges(g, all_nodes(5))) == g.max_degree() + 1);
}

TEST_CASE("avail matches a per-edge recount") {
  Graph g = generate(GraphModel::parse("gnp:n=80,p=0.3"), 12);
  Engine eng(g, {});
  Rng rng(5);
  for (NodeId v = 0; v < g.n(); ++v) {
    if (!rng.bernoulli(0.4)) continue;
    std::set<Color> nb;
    for (NodeId u : g.neighbors(v)) nb.insert(eng.color(u));
    for (Color c = 1; c <= g.max_degree() + 1; ++c)
      if (!nb.count(c)) {
        eng.set_color(v, c);
        break;
      }
  }
  std::vector<NodeId> nodes;
  for (NodeId v = 0; v < 30; ++v) nodes.push_back(v);
  const auto F = anti_edges(g, nodes);
  std::vector<Color> D;
  for (Color c = 1; c <= g.max_degree() + 1; c += 2) D.push_back(c);
  int64_t expect = 0;
  for (auto [u, v] : F)
    for (Color c : D) {
      bool free = true;
      for (NodeId w = 0; w < g.n(); ++w)
        if ((g.has_edge(u, w) || g.has_edge(v, w)) && eng.color(w) == c) free = false;
      expect += free;
    }
  CHECK(avail(eng, D, F) == expect);
}

TEST_CASE("put-aside on a single full clique") {
  Config cfg;
  Fixture f(generate(GraphModel::parse("disjoint:k=1,s=300"), 1), cfg);
  REQUIRE(f.st.dec.cliques.size() == 1);
  REQUIRE(f.st.dec.cliques[0].cls == CliqueClass::Full);
  auto rep = build_putaside(f.st);
  const auto& k = f.st.dec.cliques[0];
  CHECK(rep.failed.empty());
  CHECK(static_cast<int>(k.putaside.size()) == f.st.putaside_size());
  for (NodeId v : k.putaside) {
    CHECK(f.st.in_putaside[v]);
    CHECK(f.st.role[v] == Role::Inlier);
  }
}

TEST_CASE("put-aside sets of bridged cliques never touch") {
  // two 300-cliques joined by a perfect matching
  const NodeId s = 300;
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId base : {0, s})
    for (NodeId a = 0; a < s; ++a)
      for (NodeId b = a + 1; b < s; ++b) e.emplace_back(base + a, base + b);
  for (NodeId a = 0; a < s; ++a) e.emplace_back(a, s + a);
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Config cfg;
    cfg.seed = seed;
    Fixture f(Graph(2 * s, e), cfg);
    REQUIRE(f.st.dec.cliques.size() == 2);
    auto rep = build_putaside(f.st);
    CHECK(rep.cross_edges == 0);
    CHECK(rep.failed.empty());
    for (const auto& k : f.st.dec.cliques) CHECK(static_cast<int>(k.putaside.size()) == f.st.putaside_size());
    for (NodeId a = 0; a < s; ++a) CHECK_FALSE((f.st.in_putaside[a] && f.st.in_putaside[s + a]));
  }
}

TEST_CASE("sparse and outlier stage is a no-op on one (Delta+1)-clique") {
  Config cfg;
  Fixture f(generate(GraphModel::parse("disjoint:k=1,s=100"), 1), cfg);
  const int64_t before = f.eng.round();
  auto r = color_sparse_and_outliers(f.st);
  CHECK(r.colored == 0);
  CHECK(r.iterations == 0);
  CHECK(f.eng.round() == before);
}

TEST_CASE("sparse and outlier stage colors everything on mixed instances") {
  int clean = 0;
  const int seeds = 10;
  for (uint64_t seed = 1; seed <= seeds; ++seed) {
    Config cfg;
    cfg.seed = seed;
    Fixture f(generate(GraphModel::parse("mixed:n=1024,k=2,s=300,r=0.005,p=0.05"), seed), cfg);
    slack_generation(f.st);
    auto r = color_sparse_and_outliers(f.st);
    clean += r.leftover.empty();
    for (NodeId v = 0; v < f.g.n(); ++v)
      if (f.st.role[v] != Role::Inlier && !r.leftover.empty()) CHECK(f.st.needs_fallback[v] == (f.eng.color(v) == kNoColor));
  }
  CHECK(clean >= 0.95 * seeds);
}
