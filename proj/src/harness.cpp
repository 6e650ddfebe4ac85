#include "bcolor/harness.hpp"

#include "bcolor/comm.hpp"
#include "bcolor/decomposition.hpp"
#include "bcolor/multitrial.hpp"
#include "bcolor/putaside.hpp"
#include "bcolor/sct.hpp"
#include "bcolor/slackgen.hpp"
#include "bcolor/state.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace bcolor {

using nlohmann::json;

RunConfig RunConfig::from_json(const json& j) {
  RunConfig rc;
  rc.cfg = Config::from_preset(j.value("preset", std::string("desk")));
  apply_overrides(rc.cfg, j);
  rc.graph = j.value("graph", std::string());
  rc.graph_seed = j.value("graph_seed", uint64_t{0});
  rc.out = j.value("out", std::string());
  if (rc.graph.empty()) throw ParameterError("graph", "a generator spec or an edge-list path is required");
  return rc;
}

void to_json(json& j, const RunConfig& rc) {
  j = rc.cfg;
  j["graph"] = rc.graph;
  j["graph_seed"] = rc.graph_seed;
  j["out"] = rc.out;
}

Graph load_graph(const std::string& spec, uint64_t seed) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) {
    std::ifstream in(spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_edge_list(ss.str()).graph;
  }
  return generate(GraphModel::parse(spec), seed);
}

VerifyResult verify_coloring(const Graph& g, const std::vector<Color>& colors) {
  VerifyResult r;
  const int delta = g.max_degree();
  for (NodeId v = 0; v < g.n(); ++v) {
    const Color c = v < static_cast<NodeId>(colors.size()) ? colors[v] : kNoColor;
    if (c == kNoColor) {
      ++r.uncolored;
      r.total = false;
    } else if (c < 1 || c > delta + 1) {
      ++r.out_of_range;
      r.in_range = false;
    }
  }
  for (auto [u, v] : g.edges()) {
    const Color cu = u < static_cast<NodeId>(colors.size()) ? colors[u] : kNoColor;
    const Color cv = v < static_cast<NodeId>(colors.size()) ? colors[v] : kNoColor;
    if (cu != kNoColor && cu == cv) {
      r.proper = false;
      ++r.conflict_count;
      if (r.conflicts.size() < 32) r.conflicts.emplace_back(u, v);
    }
  }
  return r;
}

namespace {

Color smallest_free(const Graph& g, const std::vector<Color>& colors, NodeId v) {
  std::vector<uint8_t> used(static_cast<size_t>(g.max_degree()) + 2, 0);
  for (NodeId u : g.neighbors(v))
    if (colors[u] != kNoColor && colors[u] <= g.max_degree() + 1) used[colors[u]] = 1;
  for (Color c = 1; c <= g.max_degree() + 1; ++c)
    if (!used[c]) return c;
  throw std::logic_error("fallback found a node with an empty palette");
}

}  // namespace

int64_t fallback_greedy(const Graph& g, std::vector<Color>& colors) {
  int64_t count = 0;
  for (NodeId v = 0; v < g.n(); ++v) {
    if (colors[v] != kNoColor) continue;
    colors[v] = smallest_free(g, colors, v);
    ++count;
  }
  return count;
}

int64_t fallback_greedy(Engine& eng) {
  int64_t count = 0;
  for (NodeId v = 0; v < eng.n(); ++v) {
    if (eng.color(v) != kNoColor) continue;
    eng.set_color(v, smallest_free(eng.graph(), eng.colors(), v));
    ++count;
  }
  return count;
}

namespace {

std::string rational_text(const Rational& r) {
  return r.denominator() == 1 ? std::to_string(r.numerator())
                              : std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

json config_json(const Config& cfg) {
  json j = cfg;
  j.erase("threads");  // worker count must not change the report
  return j;
}

Decomposition all_sparse(NodeId n) {
  Decomposition d;
  d.clique_of.assign(n, -1);
  d.ext.assign(n, 0);
  d.anti.assign(n, 0);
  for (NodeId v = 0; v < n; ++v) d.sparse.push_back(v);
  return d;
}

}  // namespace

void clique_statistics(PipelineState& st) {
  Engine& eng = st.eng;
  const NodeId n = eng.n();
  const int K = static_cast<int>(st.dec.cliques.size());
  st.clique_trees = build_group_trees(eng, st.dec.clique_of, K, LeaderRule::MinId, true);
  std::vector<int64_t> vals(static_cast<size_t>(n) * 2, 0);
  for (NodeId v = 0; v < n; ++v)
    if (st.dec.clique_of[v] >= 0) {
      vals[2 * v] = st.dec.ext[v];
      vals[2 * v + 1] = st.dec.anti[v];
    }
  const int bits = bits_for(static_cast<uint64_t>(n) * (static_cast<uint64_t>(st.delta()) + 1));
  auto totals = aggregate_sum(eng, st.clique_trees, vals, 2, bits, true);
  for (auto& k : st.dec.cliques) {
    if (!st.clique_trees.ok(k.id)) {
      st.demote(k.id, Fault::Kind::Decomposition, "clique tree does not reach every member");
      continue;
    }
    const auto size = static_cast<int64_t>(k.members.size());
    const Rational e(totals[2 * k.id], size), a(totals[2 * k.id + 1], size);
    if (e != k.e_bar || a != k.a_bar)
      eng.record_fault({Fault::Kind::Contract, "", k.leader, 0, k.id, "aggregated clique statistics disagree"});
  }
}

void classify(PipelineState& st) {
  for (auto& k : st.dec.cliques) {
    if (!st.live(k.id)) continue;
    try {
      auto r = classify_and_reserve(k.e_bar, k.a_bar, st.prm.ell, st.delta(), st.cfg);
      k.cls = r.cls;
      k.x = r.x;
    } catch (const ParameterError& e) {
      st.demote(k.id, Fault::Kind::Config, e.what());
      continue;
    }
    for (NodeId v : k.members) st.x_of[v] = k.x;
    k.outliers = find_outliers(k, st.dec, st.cfg.outlier_factor);
    for (NodeId v : k.outliers) st.role[v] = Role::Outlier;
  }
}

MultitrialResult inlier_multitrial(PipelineState& st) {
  Engine& eng = st.eng;
  std::vector<NodeId> active;
  std::vector<ColorList> lists(eng.n());
  for (NodeId v = 0; v < eng.n(); ++v) {
    if (eng.color(v) != kNoColor || st.in_putaside[v] || st.needs_fallback[v]) continue;
    if (st.role[v] == Role::Inlier) lists[v] = ColorList::prefix(st.x_of[v]);
    else if (st.role[v] == Role::Sparse) lists[v] = ColorList::full();
    else continue;
    active.push_back(v);
  }
  MultitrialOptions opt;
  opt.budget_rounds = 2 * st.prm.log_star + st.cfg.multitrial_extra;
  opt.t_max = st.prm.clog();
  opt.seed_bits = static_cast<int>(std::ceil(st.cfg.c_seed * st.prm.ceil_log_n));
  opt.ell = st.prm.ell;
  opt.tag = "inlier-multitrial";
  auto res = multitrial(eng, active, lists, opt);
  for (NodeId v : res.leftover) st.needs_fallback[v] = 1;
  return res;
}

namespace {

json stage_json(const StageMetrics& s) {
  return {{"stage", s.stage},   {"rounds", s.rounds},         {"max_bits", s.max_bits}, {"colored", s.colored},
          {"faults", s.faults}, {"peak_words", s.peak_words}, {"fallback", s.fallback}};
}

}  // namespace

RunReport run_pipeline(const Graph& g, const Config& cfg, const std::string& graph_name) {
  RunReport rep;
  rep.graph = graph_name;
  rep.n = g.n();
  rep.m = g.edge_count();
  rep.delta = g.max_degree();
  rep.config = config_json(cfg);

  EngineOptions opt;
  opt.c_bw = cfg.c_bw;
  opt.c_mem = cfg.c_mem;
  opt.mode = cfg.mode;
  opt.strict = cfg.strict_bandwidth;
  opt.threads = cfg.threads;
  opt.seed = cfg.seed;
  Engine eng(g, opt);

  // Decomposition first; an invalid one is never used.
  eng.begin_stage("decomposition");
  Decomposition dec;
  AcdReport acd;
  try {
    dec = cfg.acd_mode == AcdMode::Oracle ? acd_oracle(g, cfg.eps) : acd_distributed(eng, cfg.eps, cfg.acd_samples);
  } catch (const FaultError& e) {
    rep.aborted = describe(e.fault());
    dec = acd_oracle(g, cfg.eps);
  }
  fill_stats(g, dec);
  acd = validate_acd(g, dec, cfg.eps, cfg.c_sp);
  if (!acd.ok() && cfg.acd_mode == AcdMode::Distributed) {
    eng.record_fault({Fault::Kind::Decomposition, "", -1, 0, static_cast<int64_t>(acd.violations.size()),
                      "distributed decomposition invalid, using the centralized one"});
    dec = acd_oracle(g, cfg.eps);
    fill_stats(g, dec);
    acd = validate_acd(g, dec, cfg.eps, cfg.c_sp);
  }
  rep.validators.acd_violations = static_cast<int64_t>(acd.violations.size());
  if (!acd.ok()) {
    rep.validators.acd_accepted = false;
    eng.record_fault({Fault::Kind::Decomposition, "", acd.violations[0].node, 0,
                      static_cast<int64_t>(acd.violations.size()),
                      "decomposition rejected (" + acd.violations[0].clause + "), every node runs as sparse"});
    dec = all_sparse(g.n());
  }
  eng.end_stage();
  eng.set_groups(dec.clique_of);

  PipelineState st(eng, cfg, std::move(dec));
  const int K = static_cast<int>(st.dec.cliques.size());
  std::vector<Color> before_inliers;
  bool inliers_reached = false;

  auto stage = [&](const char* name, const std::function<void()>& fn) {
    if (!rep.aborted.empty()) return;
    eng.begin_stage(name);
    try {
      fn();
    } catch (const FaultError& e) {
      rep.aborted = describe(e.fault());
    }
    eng.end_stage();
  };
  auto any_live = [&](auto pred) {
    for (const auto& k : st.dec.cliques)
      if (st.live(k.id) && pred(k)) return true;
    return false;
  };

  stage("stats", [&] {
    if (K == 0) return;
    clique_statistics(st);
    classify(st);
  });
  stage("slack_generation", [&] { rep.details["slack_generation"] = {{"colored", slack_generation(st)}}; });
  stage("matching", [&] {
    json arr = json::array();
    for (const auto& m : colorful_matching(st))
      arr.push_back({{"clique", m.clique}, {"size", m.size}, {"target", m.target}, {"iterations", m.iterations},
                     {"colored", m.colored}, {"shortfall", m.shortfall}});
    rep.details["matching"] = arr;
    for (const auto& k : st.dec.cliques) {
      if (!st.live(k.id)) continue;
      for (NodeId v : k.members) rep.validators.palette_checked += eng.color(v) == kNoColor;
      rep.validators.palette_violations += static_cast<int64_t>(clique_palette_violations(st, k.id).size());
    }
  });
  stage("putaside", [&] {
    if (!any_live([](const AlmostClique& k) { return k.cls == CliqueClass::Full; })) return;
    auto p = build_putaside(st);
    rep.validators.putaside_cross_edges = p.cross_edges;
    rep.details["putaside"] = {{"waves", p.waves}, {"failed", p.failed}, {"cross_edges", p.cross_edges}};
  });
  stage("sparse_outliers", [&] {
    auto r = color_sparse_and_outliers(st);
    rep.details["sparse_outliers"] = {{"iterations", r.iterations},
                                      {"colored", r.colored},
                                      {"leftover", static_cast<int64_t>(r.leftover.size())},
                                      {"entry_violations", r.entry_violations}};
  });
  stage("sct", [&] {
    if (!any_live([](const AlmostClique&) { return true; })) return;
    eng.flush();
    rep.sct = synchronized_color_trial(st);
  });
  stage("open_cleanup", [&] {
    auto r = open_cleanup(st);
    rep.details["open_cleanup"] = {{"rounds", r.rounds}, {"colored", r.colored}, {"uncolored_degree", r.uncolored_degree}};
  });
  stage("inlier_multitrial", [&] {
    before_inliers = eng.colors();
    inliers_reached = true;
    auto r = inlier_multitrial(st);
    rep.details["inlier_multitrial"] = {{"iterations", r.iterations},
                                        {"colored", r.colored},
                                        {"leftover", static_cast<int64_t>(r.leftover.size())},
                                        {"entry_violations", r.entry_violations}};
  });
  auto open_putaside = [&] {
    for (const auto& k : st.dec.cliques)
      if (st.live(k.id))
        for (NodeId v : k.putaside)
          if (eng.color(v) == kNoColor) return true;
    return false;
  };
  stage("putaside_reduce", [&] {
    if (!open_putaside()) return;
    eng.flush();
    json arr = json::array();
    for (const auto& r : reduce_putaside(st))
      arr.push_back({{"clique", r.clique}, {"high_anti", r.high_anti}, {"before", r.before},
                     {"after_phase1", r.after_phase1}, {"after", r.after}, {"bound", r.bound},
                     {"within_bound", r.within_bound}});
    rep.details["putaside_reduce"] = arr;
  });
  stage("putaside_finish", [&] {
    if (!open_putaside()) return;
    eng.flush();
    json arr = json::array();
    for (const auto& r : finish_putaside(st))
      arr.push_back({{"clique", r.clique}, {"size", r.size}, {"colored", r.colored}, {"short_lists", r.short_lists}});
    rep.details["putaside_finish"] = arr;
  });
  if (!inliers_reached) before_inliers = eng.colors();

  // Out of the model: greedy completion of whatever is left.
  eng.begin_stage("fallback");
  rep.fallback_count = fallback_greedy(eng);
  rep.fallback_fired = rep.fallback_count > 0;
  eng.current_stage().fallback = rep.fallback_count;
  eng.end_stage();

  for (const auto& k : st.dec.cliques) {
    if (!st.live(k.id)) continue;
    for (NodeId v : k.members)
      if (before_inliers[v] != kNoColor && before_inliers[v] <= k.x) ++rep.validators.prefix_timeline_violations;
  }
  rep.validators.prefix_timeline_ok = rep.validators.prefix_timeline_violations == 0;

  for (const auto& k : st.dec.cliques) {
    CliqueDiag d;
    d.id = k.id;
    d.size = static_cast<int64_t>(k.members.size());
    d.cls = clique_class_name(k.cls);
    d.x = k.x;
    d.e_bar = k.e_bar;
    d.a_bar = k.a_bar;
    d.outliers = static_cast<int64_t>(k.outliers.size());
    d.putaside = static_cast<int64_t>(k.putaside.size());
    d.matching = static_cast<int64_t>(k.matching.size());
    d.demoted = k.demoted;
    d.demote_reason = k.demote_reason;
    rep.cliques.push_back(d);
  }
  rep.stages = eng.stages();
  rep.total_rounds = eng.round();
  rep.faults = eng.faults();
  for (const auto& f : rep.faults) {
    rep.validators.bandwidth_faults += f.kind == Fault::Kind::Bandwidth;
    rep.validators.memory_faults += f.kind == Fault::Kind::Memory;
  }
  rep.memory = memory_audit(eng);
  rep.coloring = eng.colors();
  rep.validators.coloring = verify_coloring(g, rep.coloring);
  return rep;
}

RunReport run_pipeline(const RunConfig& rc) {
  const Graph g = load_graph(rc.graph, rc.graph_seed ? rc.graph_seed : rc.cfg.seed);
  return run_pipeline(g, rc.cfg, rc.graph);
}

json report_json(const RunReport& r) {
  json j;
  j["graph"] = r.graph;
  j["n"] = r.n;
  j["m"] = r.m;
  j["delta"] = r.delta;
  j["config"] = r.config;
  j["stages"] = json::array();
  for (const auto& s : r.stages) j["stages"].push_back(stage_json(s));
  j["total_rounds"] = r.total_rounds;
  std::map<std::string, int64_t> by_kind;
  json first = json::array();
  for (const auto& f : r.faults) {
    ++by_kind[fault_kind_name(f.kind)];
    if (first.size() < 50) first.push_back(describe(f));
  }
  j["faults"] = {{"count", static_cast<int64_t>(r.faults.size())}, {"by_kind", by_kind}, {"first", first}};
  j["cliques"] = json::array();
  for (const auto& c : r.cliques)
    j["cliques"].push_back({{"id", c.id}, {"size", c.size}, {"class", c.cls}, {"x", c.x},
                            {"e_bar", rational_text(c.e_bar)}, {"a_bar", rational_text(c.a_bar)},
                            {"outliers", c.outliers}, {"putaside", c.putaside}, {"matching", c.matching},
                            {"demoted", c.demoted}, {"demote_reason", c.demote_reason}});
  j["sct"] = json::array();
  for (const auto& s : r.sct)
    j["sct"].push_back({{"clique", s.clique}, {"s_size", s.s_size}, {"palette", s.palette}, {"leftover", s.leftover},
                        {"bound", s.bound}, {"precondition", s.precondition}, {"permuted", s.permuted}});
  j["details"] = r.details.is_null() ? json::object() : r.details;
  j["fallback"] = {{"fired", r.fallback_fired}, {"count", r.fallback_count}};
  j["aborted"] = r.aborted;
  const auto& v = r.validators;
  json conflicts = json::array();
  for (auto [a, b] : v.coloring.conflicts) conflicts.push_back({a, b});
  j["validators"] = {{"proper", v.coloring.proper},
                     {"total", v.coloring.total},
                     {"in_range", v.coloring.in_range},
                     {"conflicts", conflicts},
                     {"conflict_count", v.coloring.conflict_count},
                     {"acd_accepted", v.acd_accepted},
                     {"acd_violations", v.acd_violations},
                     {"palette_violations", v.palette_violations},
                     {"palette_checked", v.palette_checked},
                     {"prefix_timeline_ok", v.prefix_timeline_ok},
                     {"prefix_timeline_violations", v.prefix_timeline_violations},
                     {"putaside_cross_edges", v.putaside_cross_edges},
                     {"bandwidth_faults", v.bandwidth_faults},
                     {"memory_faults", v.memory_faults}};
  j["memory"] = memory_audit_json(r.memory);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (Color c : r.coloring) h = mix64(h ^ static_cast<uint64_t>(c));
  std::ostringstream hs;
  hs << std::hex << std::setw(16) << std::setfill('0') << h;
  j["coloring_hash"] = hs.str();
  return j;
}

std::string stage_table(const RunReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "stage" << std::right << std::setw(8) << "rounds" << std::setw(10) << "max_bits"
     << std::setw(10) << "colored" << std::setw(8) << "faults" << std::setw(12) << "peak_words" << "\n";
  for (const auto& s : r.stages)
    os << std::left << std::setw(20) << s.stage << std::right << std::setw(8) << s.rounds << std::setw(10) << s.max_bits
       << std::setw(10) << s.colored << std::setw(8) << s.faults << std::setw(12) << s.peak_words << "\n";
  os << std::left << std::setw(20) << "total" << std::right << std::setw(8) << r.total_rounds << "\n";
  return os.str();
}

std::string emit_coloring(const std::vector<Color>& colors) {
  std::string out;
  for (size_t v = 0; v < colors.size(); ++v) {
    out += std::to_string(v);
    out += ' ';
    out += std::to_string(colors[v]);
    out += '\n';
  }
  return out;
}

std::vector<Color> parse_coloring(const std::string& text, NodeId n) {
  std::vector<Color> colors(n, kNoColor);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    int64_t v, c;
    if (!(ls >> v >> c)) throw ParseError(line_no, "expected 'node color'");
    if (v < 0 || v >= n) throw ParseError(line_no, "node outside the graph");
    colors[v] = static_cast<Color>(c);
  }
  return colors;
}

ChiSquare chi_square_uniform(const std::vector<int64_t>& counts, double alpha) {
  ChiSquare r;
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  r.dof = static_cast<int>(counts.size()) - 1;
  if (r.dof < 1 || total == 0) return r;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  for (int64_t c : counts) r.statistic += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(r.dof);
  r.critical = boost::math::quantile(boost::math::complement(dist, alpha));
  r.pass = r.statistic <= r.critical;
  return r;
}

int64_t permutation_rank(const std::vector<int64_t>& perm) {
  int64_t rank = 0;
  const size_t s = perm.size();
  for (size_t i = 0; i < s; ++i) {
    int64_t smaller = 0;
    for (size_t j = i + 1; j < s; ++j) smaller += perm[j] < perm[i];
    rank = rank * static_cast<int64_t>(s - i) + smaller;
  }
  return rank;
}

namespace {

Graph complete_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return Graph(n, e);
}

EngineOptions plain_options(const Config& cfg) {
  EngineOptions o;
  o.c_bw = cfg.c_bw;
  o.c_mem = cfg.c_mem;
  o.mode = cfg.mode;
  o.seed = cfg.seed;
  return o;
}

}  // namespace

PermutationTrial permutation_trial(PermuteVariant variant, int s, uint64_t seed) {
  static const Graph g = complete_graph(32);
  Config cfg = Config::desk();
  cfg.C = 2;
  cfg.seed = seed;
  cfg.permute = variant;
  const Params prm(cfg, g.n(), g.max_degree());
  Engine eng(g, plain_options(cfg));
  std::vector<int> group(g.n(), 0);
  eng.set_groups(group);
  auto trees = build_group_trees(eng, group, 1, LeaderRule::MinId, true);
  std::vector<uint8_t> in_s(g.n(), 0);
  for (int i = 0; i < s; ++i) in_s[i] = 1;
  auto r = variant == PermuteVariant::Const ? permute_const(eng, prm, cfg, trees, in_s)
                                            : permute_loglog(eng, prm, cfg, trees, in_s);
  PermutationTrial t;
  t.fell_back = !r.fell_back.empty();
  std::vector<uint8_t> seen(s, 0);
  t.bijective = r.failed.empty();
  for (int i = 0; i < s; ++i) {
    const int64_t p = r.pi[i];
    t.pi.push_back(p);
    if (p < 0 || p >= s || seen[p]) t.bijective = false;
    else seen[p] = 1;
  }
  return t;
}

CompressTrial compress_trial(int n, int s, uint64_t seed, int total) {
  Graph g = complete_graph(n);
  if (total > n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v : g.neighbors(u))
        if (u < v) e.emplace_back(u, v);
    g = Graph(total, e);
  }
  Config cfg = Config::desk();
  cfg.seed = seed;
  const Params prm(cfg, g.n(), g.max_degree());
  Engine eng(g, plain_options(cfg));
  CompressTrial t;
  t.z = static_cast<int64_t>(std::ceil(prm.c_log_n / prm.loglog_n - 1e-9));
  CompressTryInput in;
  in.group.assign(g.n(), -1);
  std::fill(in.group.begin(), in.group.begin() + n, 0);
  in.groups = 1;
  in.in_s.assign(g.n(), 0);
  in.short_id.assign(g.n(), -1);
  in.list.assign(g.n(), {});
  in.z = {t.z};
  in.k = std::max(1, static_cast<int>(std::ceil(prm.c_log_n / (prm.loglog_n * prm.loglog_n) - 1e-9)));
  in.instances = std::max(1, static_cast<int>(std::ceil(prm.loglog_n - 1e-9)));
  std::vector<Color> list;
  for (Color c = 1; c <= s + t.z; ++c) list.push_back(c);
  for (int i = 0; i < s; ++i) {
    in.in_s[i] = 1;
    in.short_id[i] = i;
    in.list[i] = list;
  }
  eng.set_groups(in.group);
  auto r = compress_try(eng, cfg, prm, in);
  t.leftover = r.leftover[0];
  t.message_bits = r.message_bits;
  t.bandwidth = eng.bandwidth_bits();
  for (const auto& f : eng.faults()) t.bandwidth_faults += f.kind == Fault::Kind::Bandwidth;
  std::vector<uint8_t> used(static_cast<size_t>(n) + 2, 0);
  for (int i = 0; i < s; ++i) {
    const Color c = eng.color(i);
    if (c == kNoColor) continue;
    if (used[c]) t.proper = false;
    used[c] = 1;
  }
  return t;
}

PrefixTrial prefix_trial(int groups, int size, double z0, uint64_t seed) {
  const NodeId n = groups * size;
  const Graph g = complete_graph(n);
  Config cfg = Config::desk();
  cfg.seed = seed;
  cfg.mode = Mode::BCStream;
  Engine eng(g, plain_options(cfg));
  std::vector<int> job(n, 0), index(n);
  for (NodeId v = 0; v < n; ++v) index[v] = v / size;
  Rng rng(mix64(seed ^ hash_tag("prefix-values")));
  std::vector<std::vector<int64_t>> y(1, std::vector<int64_t>(groups));
  for (auto& val : y[0]) val = static_cast<int64_t>(rng.below(1000));
  const int bits = bits_for(static_cast<uint64_t>(groups) * 1000);
  auto r = prefix_sums(eng, job, index, {groups}, y, z0, bits);
  PrefixTrial t;
  t.failed = !r.failed_jobs.empty();
  t.exact = !t.failed;
  int64_t all = 0;
  for (int64_t val : y[0]) all += val;
  for (NodeId v = 0; v < n; ++v) {
    int64_t want = 0;
    for (int i = 0; i < index[v]; ++i) want += y[0][i];
    if (r.prefix[v] != want || r.total[v] != all) t.exact = false;
  }
  t.levels = static_cast<int>(r.ledger.levels.size()) - 1;
  t.level_bound = r.ledger.level_bound;
  t.levels_needed = prefix_levels_needed(groups, z0);
  t.size_invariant = r.ledger.size_invariant;
  return t;
}

void parallel_trials(int64_t count, int threads, const std::function<void(int64_t)>& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::max<int64_t>(1, count))));
  if (workers == 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int64_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

StatSpec StatSpec::from_json(const json& j) {
  StatSpec s;
  s.property = j.at("property").get<std::string>();
  s.trials = j.value("trials", s.trials);
  s.threshold = j.value("threshold", s.threshold);
  s.alpha = j.value("alpha", s.alpha);
  s.seed = j.value("seed", s.seed);
  s.threads = j.value("threads", s.threads);
  s.params = j.value("params", json::object());
  if (s.trials < 1) throw ParameterError("trials", "must be at least 1");
  return s;
}

namespace {

uint64_t trial_seed(uint64_t base, int64_t i) { return mix64(base ^ mix64(static_cast<uint64_t>(i) + 1)); }

int64_t factorial(int s) {
  int64_t f = 1;
  for (int i = 2; i <= s; ++i) f *= i;
  return f;
}

}  // namespace

StatResult stat_driver(const StatSpec& spec) {
  StatResult res;
  res.property = spec.property;
  res.trials = spec.trials;
  const auto& p = spec.params;

  auto chi_verdict = [&](const std::vector<int64_t>& counts) {
    auto chi = chi_square_uniform(counts, spec.alpha);
    res.detail["chi_square"] = {{"statistic", chi.statistic}, {"critical", chi.critical}, {"dof", chi.dof}};
    res.detail["bins"] = counts;
    return chi.pass;
  };

  if (spec.property == "uniform-sampler" || spec.property == "constant-sampler") {
    const int bins = p.value("bins", 6);
    std::vector<int64_t> counts(bins, 0);
    for (int64_t i = 0; i < spec.trials; ++i) {
      Rng rng(trial_seed(spec.seed, i));
      ++counts[spec.property == "constant-sampler" ? 0 : rng.below(bins)];
    }
    res.successes = spec.trials;
    res.pass = chi_verdict(counts);
  } else if (spec.property == "permute-uniformity") {
    const int s = p.value("s", 3);
    const std::string v = p.value("variant", std::string("loglog"));
    const PermuteVariant variant = v == "const" ? PermuteVariant::Const : PermuteVariant::LogLog;
    std::vector<int64_t> rank(spec.trials, -1);
    std::vector<uint8_t> fell(spec.trials, 0);
    parallel_trials(spec.trials, spec.threads, [&](int64_t i) {
      auto t = permutation_trial(variant, s, trial_seed(spec.seed, i));
      if (t.bijective) rank[i] = permutation_rank(t.pi);
      fell[i] = t.fell_back;
    });
    std::vector<int64_t> counts(factorial(s), 0);
    for (int64_t r : rank)
      if (r >= 0) {
        ++counts[r];
        ++res.successes;
      }
    res.detail["fell_back"] = std::count(fell.begin(), fell.end(), 1);
    res.pass = chi_verdict(counts) && res.successes == spec.trials;
  } else if (spec.property == "compress-try") {
    const int n = p.value("n", 200), s = p.value("s", 40), total = p.value("total", 0);
    std::vector<CompressTrial> t(spec.trials);
    parallel_trials(spec.trials, spec.threads, [&](int64_t i) { t[i] = compress_trial(n, s, trial_seed(spec.seed, i), total); });
    int64_t faults = 0, worst = 0, bits = 0;
    for (const auto& x : t) {
      res.successes += x.leftover <= x.z && x.proper;
      faults += x.bandwidth_faults;
      worst = std::max(worst, x.leftover);
      bits = std::max(bits, x.message_bits);
    }
    res.detail = {{"z", t[0].z}, {"worst_leftover", worst}, {"bandwidth_faults", faults}, {"max_message_bits", bits},
                  {"bandwidth", t[0].bandwidth}};
    res.rate = static_cast<double>(res.successes) / spec.trials;
    res.pass = res.rate >= spec.threshold && faults == 0;
  } else if (spec.property == "prefix-sums") {
    const int groups = p.value("groups", 100), size = p.value("size", 4);
    const double z0 = p.value("z0", 4.0);
    std::vector<PrefixTrial> t(spec.trials);
    parallel_trials(spec.trials, spec.threads,
                    [&](int64_t i) { t[i] = prefix_trial(groups, size, z0, trial_seed(spec.seed, i)); });
    bool schedule = true;
    for (const auto& x : t) {
      res.successes += x.exact;
      schedule = schedule && x.levels == x.levels_needed && x.levels <= x.level_bound && x.size_invariant;
    }
    res.detail = {{"levels", t[0].levels}, {"levels_needed", t[0].levels_needed}, {"level_bound", t[0].level_bound},
                  {"schedule_consistent", schedule}};
    res.rate = static_cast<double>(res.successes) / spec.trials;
    res.pass = res.rate >= spec.threshold && schedule;
  } else if (spec.property == "sct-leftover") {
    const std::string graph = p.value("graph", std::string("planted:n=4096,k=2,s=1800,r=0.005"));
    Config cfg = Config::from_preset(p.value("preset", std::string("desk")));
    std::vector<std::pair<int64_t, int64_t>> per(spec.trials);
    parallel_trials(spec.trials, spec.threads, [&](int64_t i) {
      Config c = cfg;
      c.seed = trial_seed(spec.seed, i);
      auto rep = run_pipeline(load_graph(graph, c.seed), c, graph);
      for (const auto& s : rep.sct) {
        ++per[i].first;
        per[i].second += static_cast<double>(s.leftover) <= s.bound;
      }
    });
    int64_t runs = 0;
    for (auto [a, b] : per) {
      runs += a;
      res.successes += b;
    }
    res.trials = runs;
    res.detail = {{"pipeline_runs", spec.trials}};
    res.rate = runs ? static_cast<double>(res.successes) / runs : 0;
    res.pass = runs > 0 && res.rate >= spec.threshold;
  } else {
    throw ParameterError("property", "unknown property '" + spec.property + "'");
  }
  if (res.rate == 0 && res.trials > 0) res.rate = static_cast<double>(res.successes) / res.trials;
  return res;
}

json stat_json(const StatResult& r) {
  return {{"property", r.property}, {"trials", r.trials}, {"successes", r.successes},
          {"rate", r.rate},         {"pass", r.pass},     {"detail", r.detail}};
}

}  // namespace bcolor
