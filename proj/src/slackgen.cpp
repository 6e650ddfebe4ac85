#include "bcolor/slackgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace bcolor {

int64_t try_color(Engine& eng, const std::vector<NodeId>& active_in, const std::vector<Color>& candidate, bool strict) {
  const int delta = eng.graph().max_degree();
  const int cb = eng.color_bits();
  std::vector<NodeId> active;
  for (NodeId v : active_in) {
    if (eng.color(v) != kNoColor) continue;
    const Color c = candidate[v];
    const bool outside = c < 1 || c > delta + 1;
    if (outside || (strict && eng.known_used(v, c))) {
      eng.record_fault({Fault::Kind::Contract, "", v, eng.round() + 1, c, "tried color is not in the palette"});
      continue;
    }
    active.push_back(v);
  }
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  const int64_t before = eng.colored_count();
  eng.round(
      &active, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(candidate[c.id]), cb); }, &active,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        bool blocked = false;
        in.for_each([&](NodeId u, BitReader& r) {
          if (static_cast<Color>(r.get(cb)) == candidate[v] && u < v) blocked = true;
        });
        if (!blocked && !eng.known_used(v, candidate[v])) eng.set_color(v, candidate[v]);
      });
  return eng.colored_count() - before;
}

int64_t slack_generation(PipelineState& st) {
  Engine& eng = st.eng;
  const int delta = st.delta();
  std::vector<NodeId> active;
  std::vector<Color> cand(eng.n(), kNoColor);
  for (NodeId v = 0; v < eng.n(); ++v) {
    if (eng.color(v) != kNoColor) continue;
    Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "slack-generation");
    if (!rng.bernoulli(st.cfg.p_s)) continue;
    const int x = st.x_of[v];
    if (x >= delta + 1) continue;
    cand[v] = static_cast<Color>(rng.range(x + 1, delta + 1));
    active.push_back(v);
  }
  return try_color(eng, active, cand, false);
}

namespace {

Color uniform_free_above(const Engine& eng, NodeId v, int x, Rng& rng) {
  const int delta = eng.graph().max_degree();
  int free = 0;
  for (Color c = x + 1; c <= delta + 1; ++c) free += !eng.known_used(v, c);
  if (free == 0) return kNoColor;
  int pick = static_cast<int>(rng.below(static_cast<uint64_t>(free)));
  for (Color c = x + 1; c <= delta + 1; ++c)
    if (!eng.known_used(v, c) && pick-- == 0) return c;
  return kNoColor;
}

}  // namespace

std::vector<MatchingReport> colorful_matching(PipelineState& st) {
  Engine& eng = st.eng;
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  const int cb = eng.color_bits();
  const int idb = eng.log_n();
  std::vector<MatchingReport> reports;
  std::vector<int> slot(st.dec.cliques.size(), -1);
  for (const auto& k : st.dec.cliques) {
    if (!st.live(k.id) || k.a_bar <= 0) continue;
    if (k.cls != CliqueClass::Closed && k.a_bar < Rational(static_cast<int64_t>(std::ceil(st.prm.c_log_n)))) continue;
    MatchingReport r;
    r.clique = k.id;
    const double a = static_cast<double>(k.a_bar.numerator()) / k.a_bar.denominator();
    r.target = static_cast<int64_t>(std::ceil(st.cfg.beta * a - 1e-9));
    slot[k.id] = static_cast<int>(reports.size());
    reports.push_back(r);
  }
  if (reports.empty()) return reports;

  std::vector<int64_t> known(reports.size(), 0);  // |M| as aggregated inside each clique
  std::vector<uint8_t> running(reports.size(), 1);
  std::vector<NodeId> partner(n, -1);
  std::vector<Color> tried(n, kNoColor);
  std::vector<uint8_t> clean(n, 0);
  std::vector<std::pair<NodeId, NodeId>> claim(n, {-1, -1});
  std::vector<int64_t> pair_flag(n, 0);
  const int budget = std::max(1, static_cast<int>(std::ceil(st.cfg.matching_budget * st.cfg.beta)));
  constexpr int kCountEvery = 8;

  auto clique_running = [&](NodeId v) {
    const int k = st.dec.clique_of[v];
    return k >= 0 && slot[k] >= 0 && running[slot[k]];
  };

  auto count_pairs = [&] {
    auto totals = aggregate_sum(eng, st.clique_trees, pair_flag, 1, 2 * idb, true);
    for (size_t i = 0; i < reports.size(); ++i) {
      known[i] = totals[reports[i].clique];
      if (known[i] >= reports[i].target) running[i] = 0;
    }
  };

  auto run = [&](int iterations) {
    for (int it = 1; it <= iterations; ++it) {
      std::vector<NodeId> members, triers;
      for (size_t i = 0; i < reports.size(); ++i) {
        if (!running[i]) continue;
        ++reports[i].iterations;
        for (NodeId v : st.dec.cliques[reports[i].clique].members)
          if (eng.color(v) == kNoColor) members.push_back(v);
      }
      if (members.empty()) break;
      std::sort(members.begin(), members.end());
      for (NodeId v : members) {
        tried[v] = kNoColor;
        clean[v] = 0;
        claim[v] = {-1, -1};
        Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "matching-try");
        if (!rng.bernoulli(0.5)) continue;
        tried[v] = uniform_free_above(eng, v, st.x_of[v], rng);
        if (tried[v] != kNoColor) triers.push_back(v);
      }
      // Try: every trier learns whether a neighbor picked the same color.
      eng.round(
          &triers, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(tried[c.id]), cb); }, &triers,
          [&](NodeCtx& c, Inbox& in) {
            bool same = false;
            in.for_each([&](NodeId, BitReader& r) { same |= static_cast<Color>(r.get(cb)) == tried[c.id]; });
            clean[c.id] = !same && !eng.known_used(c.id, tried[c.id]);
          });
      std::vector<NodeId> clean_triers;
      for (NodeId v : triers)
        if (clean[v]) clean_triers.push_back(v);
      // Clean triers repeat their color; members look for colors tried by exactly two of them.
      eng.round(
          &clean_triers, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(tried[c.id]), cb); }, &members,
          [&](NodeCtx& c, Inbox& in) {
            const int mine = st.dec.clique_of[c.id];
            std::map<Color, std::pair<NodeId, NodeId>> seen;  // second == -2 marks three or more
            in.for_each([&](NodeId u, BitReader& r) {
              const auto col = static_cast<Color>(r.get(cb));
              if (st.dec.clique_of[u] != mine) return;
              auto [itr, fresh] = seen.try_emplace(col, u, -1);
              if (fresh) return;
              if (itr->second.second == -1) itr->second.second = u;
              else itr->second.second = -2;
            });
            c.mem.charge(2 * static_cast<int64_t>(seen.size()));
            for (const auto& [col, p] : seen)
              if (p.second >= 0) {
                claim[c.id] = {std::min(p.first, p.second), std::max(p.first, p.second)};
                break;
              }
          });
      std::vector<NodeId> witnesses;
      for (NodeId v : members)
        if (claim[v].first >= 0) witnesses.push_back(v);
      // Witnesses name one pair each; a trier adopts when every claim about it agrees.
      eng.round(
          &witnesses,
          [&](NodeCtx& c, BitWriter& w) {
            w.put(static_cast<uint64_t>(claim[c.id].first), idb);
            w.put(static_cast<uint64_t>(claim[c.id].second), idb);
          },
          &clean_triers,
          [&](NodeCtx& c, Inbox& in) {
            const NodeId v = c.id;
            NodeId mate = -1;
            bool conflict = false;
            in.for_each([&](NodeId u, BitReader& r) {
              if (st.dec.clique_of[u] != st.dec.clique_of[v]) return;
              const auto a = static_cast<NodeId>(r.get(idb));
              const auto b = static_cast<NodeId>(r.get(idb));
              if (a != v && b != v) return;
              const NodeId other = a == v ? b : a;
              if (mate >= 0 && mate != other) conflict = true;
              mate = other;
            });
            if (mate < 0 || conflict || eng.known_used(v, tried[v])) return;
            partner[v] = mate;
            eng.set_color(v, tried[v]);
          });
      for (NodeId v : clean_triers) {
        const NodeId p = partner[v];
        if (p < 0 || v > p || partner[p] != v || eng.color(v) != eng.color(p) || eng.color(v) == kNoColor) continue;
        if (pair_flag[v]) continue;
        pair_flag[v] = 1;
        auto& k = st.dec.cliques[st.dec.clique_of[v]];
        const bool repeat = std::any_of(k.matching.begin(), k.matching.end(),
                                        [&](const MatchedPair& m) { return m.color == eng.color(v); });
        if (!repeat) k.matching.push_back({v, p, eng.color(v)});
      }
      for (NodeId v : clean_triers)
        if (eng.color(v) != kNoColor && clique_running(v)) ++reports[slot[st.dec.clique_of[v]]].colored;
      if (it % kCountEvery == 0 || it == iterations) count_pairs();
      if (std::none_of(running.begin(), running.end(), [](uint8_t r) { return r != 0; })) break;
    }
  };

  run(budget);
  bool retry = false;
  for (size_t i = 0; i < reports.size(); ++i) {
    if (known[i] >= reports[i].target) continue;
    retry = true;
    running[i] = 1;
    eng.record_fault({Fault::Kind::Matching, "", st.dec.cliques[reports[i].clique].leader, 0, known[i],
                      "matching short of target " + std::to_string(reports[i].target) + ", retrying with twice the budget"});
  }
  if (retry) run(2 * budget);
  for (size_t i = 0; i < reports.size(); ++i) {
    auto& k = st.dec.cliques[reports[i].clique];
    reports[i].size = static_cast<int64_t>(k.matching.size());
    reports[i].shortfall = known[i] < reports[i].target;
    if (reports[i].shortfall)
      eng.record_fault({Fault::Kind::Matching, "", k.leader, 0, known[i], "matching short after retry; clique flagged"});
  }
  return reports;
}

bool matching_valid(const Graph& g, const std::vector<Color>& colors, const AlmostClique& k) {
  std::set<Color> used;
  std::set<NodeId> ends;
  for (const auto& m : k.matching) {
    if (m.color == kNoColor || colors[m.u] != m.color || colors[m.v] != m.color) return false;
    if (g.has_edge(m.u, m.v) || m.u == m.v) return false;
    if (!std::binary_search(k.members.begin(), k.members.end(), m.u) ||
        !std::binary_search(k.members.begin(), k.members.end(), m.v))
      return false;
    if (!used.insert(m.color).second) return false;
    if (!ends.insert(m.u).second || !ends.insert(m.v).second) return false;
  }
  return true;
}

std::vector<NodeId> clique_palette_violations(const PipelineState& st, int k) {
  const auto& K = st.dec.cliques[k];
  const auto& colors = st.eng.colors();
  std::set<Color> used;
  int64_t uncolored = 0;
  for (NodeId v : K.members) {
    if (colors[v] != kNoColor) used.insert(colors[v]);
    else ++uncolored;
  }
  const int64_t palette = st.delta() + 1 - static_cast<int64_t>(used.size());
  std::vector<NodeId> bad;
  for (NodeId v : K.members) {
    if (colors[v] != kNoColor) continue;
    // |K \ N(v)| here counts v itself, so |K| = |N(v) ∩ K| + a_v holds.
    const int64_t a_v = st.dec.anti[v] + 1;
    const int64_t rhs = uncolored + 1 + st.dec.ext[v] - a_v + static_cast<int64_t>(K.matching.size());
    if (palette < rhs) bad.push_back(v);
  }
  return bad;
}

std::vector<std::pair<NodeId, NodeId>> anti_edges(const Graph& g, const std::vector<NodeId>& nodes) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (size_t i = 0; i < nodes.size(); ++i)
    for (size_t j = i + 1; j < nodes.size(); ++j)
      if (!g.has_edge(nodes[i], nodes[j])) out.emplace_back(std::min(nodes[i], nodes[j]), std::max(nodes[i], nodes[j]));
  return out;
}

int64_t avail(const Engine& eng, const std::vector<Color>& D, const std::vector<std::pair<NodeId, NodeId>>& F) {
  const Graph& g = eng.graph();
  const auto& colors = eng.colors();
  int64_t total = 0;
  std::vector<uint8_t> held(g.max_degree() + 2, 0);
  for (auto [u, v] : F) {
    std::fill(held.begin(), held.end(), 0);
    for (NodeId w : g.neighbors(u)) held[colors[w]] = 1;
    for (NodeId w : g.neighbors(v)) held[colors[w]] = 1;
    for (Color c : D)
      if (c >= 1 && c < static_cast<Color>(held.size()) && !held[c]) ++total;
  }
  return total;
}

PutasideReport build_putaside(PipelineState& st) {
  Engine& eng = st.eng;
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  const int idb = eng.log_n();
  const int64_t start = eng.round();
  PutasideReport rep;
  const int need = st.putaside_size();
  std::vector<int> waiting;
  for (const auto& k : st.dec.cliques)
    if (st.live(k.id) && k.cls == CliqueClass::Full) waiting.push_back(k.id);
  const int max_waves = static_cast<int>(waiting.size());
  const int kb = bits_for(st.dec.cliques.size());
  std::vector<uint8_t> near_p(n, 0);

  auto fail = [&](int k, const std::string& why) {
    rep.failed.push_back(k);
    st.demote(k, Fault::Kind::PutAside, why);
  };

  while (!waiting.empty() && rep.waves < max_waves) {
    ++rep.waves;
    std::vector<uint8_t> wave_clique(st.dec.cliques.size(), 0);
    for (int k : waiting) wave_clique[k] = 1;
    std::vector<int64_t> eligible(n, 0);
    for (int k : waiting)
      for (NodeId v : st.dec.cliques[k].members)
        eligible[v] = st.role[v] == Role::Inlier && eng.color(v) == kNoColor && !near_p[v];
    auto counts = aggregate_sum(eng, st.clique_trees, eligible, 1, idb + 1, true);
    std::vector<int> still;
    for (int k : waiting) {
      if (counts[k] < need) fail(k, "only " + std::to_string(counts[k]) + " eligible inliers for a put-aside set of " +
                                        std::to_string(need));
      else still.push_back(k);
    }
    waiting.swap(still);
    if (waiting.empty()) break;

    std::vector<NodeId> candidates;
    std::vector<uint8_t> survive(n, 0);
    for (int k : waiting) {
      const double q = std::min(1.0, st.cfg.putaside_oversample * need / static_cast<double>(counts[k]));
      for (NodeId v : st.dec.cliques[k].members) {
        if (!eligible[v]) continue;
        Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "putaside-candidate");
        if (rng.bernoulli(q)) candidates.push_back(v);
      }
    }
    std::sort(candidates.begin(), candidates.end());
    // A candidate steps back when it sees a candidate of a clique with a smaller ID.
    eng.round(
        &candidates,
        [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(st.dec.clique_of[c.id]), kb); }, &candidates,
        [&](NodeCtx& c, Inbox& in) {
          const int mine = st.dec.clique_of[c.id];
          bool keep = true;
          in.for_each([&](NodeId, BitReader& r) {
            if (static_cast<int>(r.get(kb)) < mine) keep = false;
          });
          survive[c.id] = keep;
        });
    std::vector<uint64_t> ids(n);
    for (NodeId v = 0; v < n; ++v) ids[v] = static_cast<uint64_t>(v);
    auto gathered = gather_to_leader(eng, st.clique_trees, survive, ids, idb);
    std::vector<std::vector<uint64_t>> verdict(st.dec.cliques.size());
    for (int k : waiting) {
      const auto& got = gathered[k];
      // Threshold ID + 1 when the clique has enough survivors, else 0.
      verdict[k].push_back(static_cast<int64_t>(got.size()) >= need ? got[need - 1] + 1 : 0);
    }
    auto told = disseminate_from_leader(eng, st.clique_trees, verdict, idb + 1, std::vector<int64_t>(n, -1), true);
    std::vector<NodeId> announcers;
    std::vector<int> next;
    for (int k : waiting) {
      auto& K = st.dec.cliques[k];
      const uint64_t threshold = verdict[k][0];
      if (threshold == 0) {
        next.push_back(k);
        continue;
      }
      for (NodeId v : K.members) {
        if (!told.heard[v].empty() && told.heard[v][0] != threshold)
          eng.record_fault({Fault::Kind::Delivery, "", v, 0, k, "put-aside verdict not received"});
        if (survive[v] && static_cast<uint64_t>(v) < threshold) {
          st.in_putaside[v] = 1;
          K.putaside.push_back(v);
          announcers.push_back(v);
        }
      }
    }
    std::sort(announcers.begin(), announcers.end());
    eng.round(
        &announcers, [&](NodeCtx&, BitWriter& w) { w.put_bit(true); }, nullptr,
        [&](NodeCtx& c, Inbox& in) {
          in.for_each([&](NodeId u, BitReader&) {
            if (st.dec.clique_of[u] != st.dec.clique_of[c.id]) near_p[c.id] = 1;
          });
        });
    waiting.swap(next);
  }
  for (int k : waiting) fail(k, "no put-aside set after " + std::to_string(rep.waves) + " waves");

  for (NodeId v = 0; v < n; ++v) {
    if (!st.in_putaside[v]) continue;
    for (NodeId u : g.neighbors(v))
      if (u > v && st.in_putaside[u] && st.dec.clique_of[u] != st.dec.clique_of[v]) ++rep.cross_edges;
  }
  if (rep.cross_edges > 0)
    eng.record_fault({Fault::Kind::Contract, "", -1, 0, rep.cross_edges, "put-aside sets of different cliques touch"});
  rep.rounds = eng.round() - start;
  return rep;
}

MultitrialResult color_sparse_and_outliers(PipelineState& st) {
  Engine& eng = st.eng;
  std::vector<NodeId> active;
  std::vector<ColorList> lists(eng.n());
  for (NodeId v = 0; v < eng.n(); ++v) {
    if (eng.color(v) != kNoColor || st.in_putaside[v]) continue;
    if (st.role[v] == Role::Sparse) {
      lists[v] = ColorList::full();
      active.push_back(v);
    } else if (st.role[v] == Role::Outlier) {
      lists[v] = ColorList::suffix(st.x_of[v]);
      active.push_back(v);
    }
  }
  MultitrialOptions opt;
  opt.budget_rounds = 2 * st.prm.log_star + st.cfg.sparse_budget_extra;
  opt.t_max = st.prm.clog();
  opt.seed_bits = static_cast<int>(std::ceil(st.cfg.c_seed * st.prm.ceil_log_n));
  opt.ell = st.prm.ell;
  opt.tag = "sparse-outliers";
  auto res = multitrial(eng, active, lists, opt);
  for (NodeId v : res.leftover) st.needs_fallback[v] = 1;
  return res;
}

}  // namespace bcolor
