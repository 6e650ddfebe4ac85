#include "bcolor/sct.hpp"
#include "bcolor/slackgen.hpp"
#include "bcolor/streaming.hpp"

#include "fixture.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace bcolor;
using namespace bcolor::testing;

namespace {

EngineOptions streaming_options(uint64_t seed) {
  EngineOptions o;
  o.mode = Mode::BCStream;
  o.seed = seed;
  return o;
}

// Groups of `size` consecutive nodes of one clique; returns the per-node prefix.
PrefixResult run_prefix(const std::vector<int64_t>& y, int size, uint64_t seed) {
  const int k = static_cast<int>(y.size());
  const Graph g = generate(GraphModel::parse("disjoint:k=1,s=" + std::to_string(k * size)), 1);
  Engine eng(g, streaming_options(seed));
  std::vector<int> job(g.n(), 0), index(g.n());
  for (NodeId v = 0; v < g.n(); ++v) index[v] = v / size;
  Config cfg;
  const Params prm(cfg, g.n(), g.max_degree());
  return prefix_sums(eng, job, index, {k}, {y}, prm.c_log_n, 20);
}

// Range bitmaps as learn_palette would deliver them, straight from the coloring.
std::vector<uint64_t> range_bits(const Engine& eng, const std::vector<int>& bucket, int k) {
  const int delta = eng.graph().max_degree();
  std::vector<uint64_t> out(eng.n(), 0);
  std::vector<uint8_t> used(static_cast<size_t>(delta) + 2, 0);
  for (NodeId v = 0; v < eng.n(); ++v)
    if (eng.color(v) != kNoColor) used[eng.color(v)] = 1;
  for (NodeId v = 0; v < eng.n(); ++v) {
    auto [lo, hi] = color_range(bucket[v], k, delta);
    for (Color c = lo; c <= hi; ++c)
      if (used[c]) out[v] |= uint64_t{1} << (c - lo);
  }
  return out;
}

}  // namespace

TEST_CASE("prefix sums: one group sees zero") {
  auto r = run_prefix({42}, 30, 1);
  CHECK(r.failed_jobs.empty());
  for (int64_t p : r.prefix) CHECK(p == 0);
  for (int64_t t : r.total) CHECK(t == 42);
}

TEST_CASE("prefix sums: y = (3, 1, 4)") {
  auto r = run_prefix({3, 1, 4}, 20, 2);
  CHECK(r.failed_jobs.empty());
  for (NodeId v = 0; v < 60; ++v) CHECK(r.prefix[v] == std::vector<int64_t>{0, 3, 4}[v / 20]);
}

TEST_CASE("prefix sums on the desk clique match the centralized sums") {
  Config cfg;
  const Params prm(cfg, 4096, 1809);
  const int k = bucket_count(prm);
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto t = prefix_trial(k, 48, prm.c_log_n, seed);
    CHECK(t.exact);
    CHECK(t.size_invariant);
    CHECK(t.levels <= t.level_bound);
    CHECK(t.levels == t.levels_needed);
  }
}

TEST_CASE("level schedule grows as z^(3/2)") {
  // level 0 alone covers up to z0 groups
  CHECK(prefix_levels_needed(1, 48) == 1);
  CHECK(prefix_levels_needed(48, 48) == 1);
  CHECK(prefix_levels_needed(49, 48) == 2);
  CHECK(prefix_levels_needed(48 * 48, 48) >= 2);
  CHECK(prefix_levels_needed(48 * 48, 48) <= prefix_level_bound(48 * 48, 48));
}

TEST_CASE("nth color: full palette, no reserve, first index is color 1") {
  const Graph g = generate(GraphModel::parse("disjoint:k=1,s=100"), 1);
  Config cfg;
  const Params prm(cfg, g.n(), g.max_degree());
  const int k = bucket_count(prm);
  Engine eng(g, streaming_options(3));
  std::vector<int> job(g.n(), 0), bucket(g.n());
  for (NodeId v = 0; v < g.n(); ++v) bucket[v] = static_cast<int>(v % k);
  std::vector<int64_t> query(g.n(), 0);
  query[10] = 1;
  query[11] = g.max_degree() + 1;
  auto c = nth_color_of_palette(eng, job, bucket, k, range_bits(eng, bucket, k), {0}, query, prm.c_log_n);
  CHECK(c[10] == 1);
  CHECK(c[11] == g.max_degree() + 1);
  CHECK(c[0] == kNoColor);
}

TEST_CASE("nth color: used colors and the reserve shift the answer") {
  const Graph g = generate(GraphModel::parse("disjoint:k=1,s=100"), 1);
  Config cfg;
  const Params prm(cfg, g.n(), g.max_degree());
  const int k = bucket_count(prm);
  Engine eng(g, streaming_options(4));
  eng.set_color(50, 2);
  eng.set_color(51, 40);
  eng.flush();
  std::vector<int> job(g.n(), 0), bucket(g.n());
  for (NodeId v = 0; v < g.n(); ++v) bucket[v] = static_cast<int>(v % k);
  const auto used = range_bits(eng, bucket, k);
  std::vector<int64_t> query(g.n(), 0);
  query[0] = 1;
  query[1] = 2;
  auto c = nth_color_of_palette(eng, job, bucket, k, used, {0}, query, prm.c_log_n);
  CHECK(c[0] == 1);
  CHECK(c[1] == 3);
  query.assign(g.n(), 0);
  query[3] = 30;  // above x = 10: 11..39 are 29 colors, then 41
  auto d = nth_color_of_palette(eng, job, bucket, k, used, {10}, query, prm.c_log_n);
  CHECK(d[3] == 41);
}

TEST_CASE("nth color: an index beyond the palette is a contract fault") {
  const Graph g = generate(GraphModel::parse("disjoint:k=1,s=60"), 1);
  Config cfg;
  const Params prm(cfg, g.n(), g.max_degree());
  const int k = bucket_count(prm);
  Engine eng(g, streaming_options(5));
  std::vector<int> job(g.n(), 0), bucket(g.n());
  for (NodeId v = 0; v < g.n(); ++v) bucket[v] = static_cast<int>(v % k);
  std::vector<int64_t> query(g.n(), 0);
  query[0] = g.max_degree() + 2;
  auto c = nth_color_of_palette(eng, job, bucket, k, range_bits(eng, bucket, k), {0}, query, prm.c_log_n);
  CHECK(c[0] == kNoColor);
  bool contract = false;
  for (const auto& f : eng.faults()) contract = contract || f.kind == Fault::Kind::Contract;
  CHECK(contract);
}

TEST_CASE("nth color on the desk clique after matching equals sorted palette indexing") {
  Config cfg;
  cfg.mode = Mode::BCStream;
  cfg.seed = 6;
  Fixture f(generate(GraphModel::parse("planted:n=4096,k=2,s=1800,r=0.005"), 6), cfg);
  slack_generation(f.st);
  colorful_matching(f.st);
  const int groups = static_cast<int>(f.st.dec.cliques.size());
  REQUIRE(groups == 2);
  auto pal = learn_palette(f.eng, f.st.prm, f.st.dec.clique_of, groups);
  REQUIRE(pal.failed.empty());
  std::vector<int> x_of_job(groups, 0);
  std::vector<int64_t> query(f.g.n(), 0);
  std::vector<std::vector<Color>> oracle(groups);
  for (const auto& k : f.st.dec.cliques) {
    x_of_job[k.id] = k.x;
    const auto used = clique_colors(f.eng, k.members);
    for (Color c = k.x + 1; c <= f.st.delta() + 1; ++c)
      if (!bitmap_has(used, c)) oracle[k.id].push_back(c);
    for (size_t i = 0; i < k.members.size() && i < oracle[k.id].size(); ++i)
      query[k.members[i]] = static_cast<int64_t>(i) + 1;
  }
  auto got = nth_color_of_palette(f.eng, f.st.dec.clique_of, pal.bucket, pal.k, pal.range_used, x_of_job, query,
                                  f.st.prm.c_log_n);
  int64_t asked = 0, wrong = 0;
  for (NodeId v = 0; v < f.g.n(); ++v) {
    if (query[v] == 0) continue;
    ++asked;
    wrong += got[v] != oracle[f.st.dec.clique_of[v]][query[v] - 1];
  }
  CHECK(asked > 3000);
  CHECK(wrong == 0);
  CHECK(memory_audit(f.eng).memory_faults == 0);
}

TEST_CASE("memory audit: an empty-payload round needs O(1) words") {
  const Graph g = generate(GraphModel::parse("gnp:n=200,p=0.2"), 1);
  Engine eng(g, streaming_options(1));
  eng.begin_stage("empty");
  eng.round(nullptr, [](NodeCtx&, BitWriter&) {}, nullptr, [](NodeCtx&, Inbox&) {});
  eng.end_stage();
  auto a = memory_audit(eng);
  CHECK(a.ok);
  // the persistent view of neighbor colors is the only state
  CHECK(a.peak - eng.palette_view_words() <= 2);
  REQUIRE(a.top.size() == 1);
  CHECK(a.top[0].first == "empty");
}

TEST_CASE("memory audit: streaming learn_palette stays at O(log n) words") {
  Config cfg;
  cfg.mode = Mode::BCStream;
  Fixture f(generate(GraphModel::parse("disjoint:k=2,s=400"), 1), cfg);
  for (NodeId v = 0; v < f.g.n(); v += 7) f.eng.set_color(v, static_cast<Color>(1 + (v / 7) % 300));
  f.eng.begin_stage("palette");
  auto r = learn_palette(f.eng, f.st.prm, f.st.dec.clique_of, 2);
  f.eng.end_stage();
  CHECK(r.failed.empty());
  auto a = memory_audit(f.eng);
  const int64_t scratch = f.eng.stages().back().peak_words - f.eng.palette_view_words();
  MESSAGE("palette scratch words " << scratch << " over a view of " << f.eng.palette_view_words());
  CHECK(scratch <= f.eng.log_n());
  CHECK(a.memory_faults == 0);
  CHECK(memory_audit_json(a).contains("top_stages"));
}
