#include "bcolor/putaside.hpp"

#include "bcolor/comm.hpp"
#include "bcolor/sct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bcolor {

int64_t many_to_all_capacity(const Config& cfg, const Params& prm) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::floor(cfg.m2a_capacity * prm.delta / prm.log_n)));
}

ManyToAllResult many_to_all(Engine& eng, const Config& cfg, const Params& prm, const std::vector<int>& group,
                            int groups, const std::vector<std::vector<uint64_t>>& pieces, int piece_bits) {
  const NodeId n = eng.n();
  const int64_t start = eng.round();
  ManyToAllResult res;
  res.delivered.assign(groups, 1);
  std::vector<std::vector<NodeId>> senders(groups), members(groups);
  for (NodeId v = 0; v < n; ++v) {
    if (group[v] < 0) continue;
    members[group[v]].push_back(v);
    if (!pieces[v].empty()) senders[group[v]].push_back(v);
  }
  const int64_t cap = many_to_all_capacity(cfg, prm);
  std::vector<std::vector<std::vector<NodeId>>> batches(groups);
  for (int gi = 0; gi < groups; ++gi) {
    int64_t used = 0;
    for (NodeId v : senders[gi]) {
      const auto m = static_cast<int64_t>(pieces[v].size());
      if (batches[gi].empty() || used + m > cap) {
        batches[gi].emplace_back();
        used = 0;
      }
      batches[gi].back().push_back(v);
      used += m;
    }
    res.batches = std::max(res.batches, static_cast<int>(batches[gi].size()));
  }
  const int idb = eng.log_n();
  const int payload = payload_budget(eng);
  std::vector<int64_t> offset(n, -1);
  std::vector<std::vector<uint64_t>> held(n);
  std::vector<std::vector<int>> held_list(n);
  std::vector<std::vector<std::pair<NodeId, int>>> entries(groups);

  for (int b = 0; b < res.batches; ++b) {
    std::vector<NodeId> in_batch, listeners;
    size_t m = 0;
    for (int gi = 0; gi < groups; ++gi) {
      entries[gi].clear();
      if (b >= static_cast<int>(batches[gi].size())) continue;
      for (NodeId v : batches[gi][b]) {
        offset[v] = static_cast<int64_t>(entries[gi].size());
        for (int s = 0; s < static_cast<int>(pieces[v].size()); ++s) entries[gi].emplace_back(v, s);
        m = std::max(m, pieces[v].size());
        in_batch.push_back(v);
      }
      listeners.insert(listeners.end(), members[gi].begin(), members[gi].end());
    }
    std::sort(in_batch.begin(), in_batch.end());
    std::sort(listeners.begin(), listeners.end());
    for (NodeId v : listeners) {
      const size_t e = entries[group[v]].size();
      held[v].assign((e + 63) / 64, 0);
      held_list[v].clear();
    }
    auto mark = [&](NodeId v, int64_t e) {
      uint64_t& w = held[v][e >> 6];
      const uint64_t bit = uint64_t{1} << (e & 63);
      if (w & bit) return;
      w |= bit;
      held_list[v].push_back(static_cast<int>(e));
    };
    for (NodeId v : in_batch)
      for (size_t s = 0; s < pieces[v].size(); ++s) mark(v, offset[v] + static_cast<int64_t>(s));
    const int64_t piece_words = (piece_bits + eng.log_n() - 1) / eng.log_n();

    for (size_t s = 0; s < m; ++s) {
      std::vector<NodeId> snd;
      for (NodeId v : in_batch)
        if (pieces[v].size() > s) snd.push_back(v);
      eng.round(
          &snd, [&](NodeCtx& c, BitWriter& w) { w.put(pieces[c.id][s], piece_bits); }, &listeners,
          [&](NodeCtx& c, Inbox& in) {
            const NodeId v = c.id;
            in.for_each([&](NodeId u, BitReader&) {
              if (group[u] == group[v] && offset[u] >= 0) mark(v, offset[u] + static_cast<int64_t>(s));
            });
            c.mem.charge(static_cast<int64_t>(held_list[v].size()) * piece_words + static_cast<int64_t>(held[v].size()));
          });
    }
    const int seqb = bits_for(m);
    const int tuple = idb + seqb + piece_bits;
    if (tuple > payload) throw std::logic_error("many-to-all entry does not fit one broadcast");
    const int t = std::max(1, std::min(cfg.m2a_relays, payload / tuple));
    res.relay_width = t;
    // decoded tuples per sender, filled in the send phase so listeners skip re-parsing
    std::vector<std::vector<int>> sent(n);
    auto relay = [&](const std::vector<NodeId>& who) {
      eng.round(
          &who,
          [&](NodeCtx& c, BitWriter& w) {
            const NodeId v = c.id;
            const auto& hl = held_list[v];
            std::vector<int>& pick = sent[v];
            pick.clear();
            if (hl.empty()) return;
            Rng rng = c.rng("m2a-relay");
            const int want = std::min<int>(t, static_cast<int>(hl.size()));
            while (static_cast<int>(pick.size()) < want) {
              const int e = hl[rng.below(hl.size())];
              if (std::find(pick.begin(), pick.end(), e) == pick.end()) pick.push_back(e);
            }
            for (int e : pick) {
              const auto [origin, seq] = entries[group[v]][e];
              w.put(static_cast<uint64_t>(origin), idb);
              w.put(static_cast<uint64_t>(seq), seqb);
              w.put(pieces[origin][seq], piece_bits);
            }
          },
          &listeners,
          [&](NodeCtx& c, Inbox& in) {
            const NodeId v = c.id;
            in.for_each([&](NodeId u, BitReader&) {
              if (group[u] != group[v]) return;
              for (int e : sent[u]) mark(v, e);
            });
            c.mem.charge(static_cast<int64_t>(held_list[v].size()) * piece_words + static_cast<int64_t>(held[v].size()));
          });
    };
    for (int r = 1; r < cfg.m2a_rounds; ++r) relay(listeners);
    auto missing_groups = [&] {
      std::vector<uint8_t> miss(groups, 0);
      for (NodeId v : listeners)
        if (held_list[v].size() < entries[group[v]].size()) miss[group[v]] = 1;
      return miss;
    };
    auto miss = missing_groups();
    if (std::any_of(miss.begin(), miss.end(), [](uint8_t x) { return x != 0; })) {
      std::vector<NodeId> who;
      for (NodeId v : listeners)
        if (miss[group[v]]) who.push_back(v);
      relay(who);
      miss = missing_groups();
    }
    for (NodeId v : listeners)
      if (held_list[v].size() < entries[group[v]].size())
        res.missing += static_cast<int64_t>(entries[group[v]].size() - held_list[v].size());
    for (int gi = 0; gi < groups; ++gi)
      if (miss[gi]) {
        res.delivered[gi] = 0;
        eng.record_fault({Fault::Kind::Delivery, "", members[gi].empty() ? -1 : members[gi][0], 0, gi,
                          "many-to-all left members without every message"});
      }
    for (NodeId v : in_batch) offset[v] = -1;
  }
  res.rounds = eng.round() - start;
  return res;
}

std::vector<Color> sequential_pass(const std::vector<std::vector<Color>>& samples) {
  std::vector<Color> out(samples.size(), kNoColor);
  std::vector<Color> taken;
  for (size_t i = 0; i < samples.size(); ++i)
    for (Color c : samples[i]) {
      if (c == kNoColor || std::find(taken.begin(), taken.end(), c) != taken.end()) continue;
      out[i] = c;
      taken.push_back(c);
      break;
    }
  return out;
}

CompressTryResult compress_try(Engine& eng, const Config& cfg, const Params& prm, const CompressTryInput& in) {
  const NodeId n = eng.n();
  const int64_t start = eng.round();
  CompressTryResult res;
  res.leftover.assign(in.groups, 0);
  res.chosen.assign(in.groups, 0);
  res.success.assign(in.groups, 0);
  res.delivered.assign(in.groups, 1);
  if (eng.has_pending_announcements()) eng.flush();

  std::vector<std::vector<NodeId>> order(in.groups);
  int max_sid = 0;
  for (NodeId v = 0; v < n; ++v)
    if (in.group[v] >= 0 && in.in_s[v]) {
      order[in.group[v]].push_back(v);
      max_sid = std::max(max_sid, in.short_id[v]);
    }
  for (auto& o : order)
    std::sort(o.begin(), o.end(), [&](NodeId a, NodeId b) { return in.short_id[a] < in.short_id[b]; });
  const int sb = std::max(1, bits_for(static_cast<uint64_t>(max_sid) + 1));
  const int instances = std::max(1, in.instances);

  // samples[v][instance] = k colors; index |L(v)| stands for "no usable color".
  std::vector<std::vector<std::vector<Color>>> samples(n);
  std::vector<std::vector<uint64_t>> pieces(n);
  int piece_bits = 1;
  std::vector<uint8_t> short_group(in.groups, 0);
  for (int gi = 0; gi < in.groups; ++gi)
    for (NodeId v : order[gi]) {
      const auto& list = in.list[v];
      std::vector<int> usable;
      for (size_t i = 0; i < list.size(); ++i)
        if (!eng.known_used(v, list[i])) usable.push_back(static_cast<int>(i));
      if (static_cast<int64_t>(usable.size()) < static_cast<int64_t>(order[gi].size()) + in.z[gi]) {
        ++res.precondition_failures;
        short_group[gi] = 1;
      }
      const int ib = std::max(1, bits_for(list.size() + 1));
      const int bits = sb + in.k * ib;
      piece_bits = std::max(piece_bits, bits);
      res.message_bits = std::max<int64_t>(res.message_bits, bits);
      Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "compress-try");
      samples[v].resize(instances);
      for (int t = 0; t < instances; ++t) {
        uint64_t p = static_cast<uint64_t>(in.short_id[v]);
        int at = sb;
        for (int s = 0; s < in.k; ++s) {
          const int idx = usable.empty() ? static_cast<int>(list.size()) : usable[rng.below(usable.size())];
          samples[v][t].push_back(idx < static_cast<int>(list.size()) ? list[idx] : kNoColor);
          p |= static_cast<uint64_t>(idx) << at;
          at += ib;
        }
        pieces[v].push_back(p);
      }
    }
  if (piece_bits > 64) throw std::logic_error("compressed try message wider than one word");
  for (int gi = 0; gi < in.groups; ++gi)
    if (short_group[gi])
      eng.record_fault({Fault::Kind::Precondition, "", order[gi].empty() ? -1 : order[gi][0], 0, gi,
                        "compress-try lists shorter than |S| + z"});
  if (res.message_bits > eng.bandwidth_bits())
    eng.record_fault({Fault::Kind::Bandwidth, "", -1, 0, res.message_bits, "compressed try message over budget"});

  auto m2a = many_to_all(eng, cfg, prm, in.group, in.groups, pieces, piece_bits);
  for (int gi = 0; gi < in.groups; ++gi) {
    if (order[gi].empty()) continue;
    res.delivered[gi] = m2a.delivered[gi];
    if (!m2a.delivered[gi]) {
      res.leftover[gi] = static_cast<int64_t>(order[gi].size());
      continue;
    }
    std::vector<std::vector<Color>> best;
    int64_t best_left = INT64_MAX;
    int best_t = 0;
    for (int t = 0; t < instances; ++t) {
      std::vector<std::vector<Color>> s;
      for (NodeId v : order[gi]) s.push_back(samples[v][t]);
      auto out = sequential_pass(s);
      const int64_t left = std::count(out.begin(), out.end(), kNoColor);
      if (left < best_left) {
        best_left = left;
        best_t = t;
        best = {out};
      }
      if (left <= in.z[gi]) break;
    }
    res.chosen[gi] = best_t;
    res.leftover[gi] = best_left;
    res.success[gi] = best_left <= in.z[gi];
    const auto& out = best[0];
    for (size_t i = 0; i < order[gi].size(); ++i)
      if (out[i] != kNoColor) {
        eng.set_color(order[gi][i], out[i]);
        ++res.colored;
      }
  }
  res.rounds = eng.round() - start;
  return res;
}

namespace {

// Every group member learns the IDs of the set's members; short IDs are ranks.
std::vector<int> assign_short_ids(Engine& eng, const Config& cfg, const Params& prm, const std::vector<int>& group,
                                  int groups, const std::vector<uint8_t>& in_set, std::vector<uint8_t>& delivered) {
  const NodeId n = eng.n();
  std::vector<std::vector<uint64_t>> pieces(n);
  for (NodeId v = 0; v < n; ++v)
    if (group[v] >= 0 && in_set[v]) pieces[v].push_back(static_cast<uint64_t>(v));
  auto m2a = many_to_all(eng, cfg, prm, group, groups, pieces, eng.log_n());
  delivered = m2a.delivered;
  std::vector<int> rank(n, -1), next(groups, 0);
  for (NodeId v = 0; v < n; ++v)
    if (group[v] >= 0 && in_set[v]) rank[v] = next[group[v]]++;
  return rank;
}

// Colors of the colored anti-neighbors of each target, spread by many-to-all from the colored
// members: (color, count, short IDs of non-adjacent targets).
std::vector<std::vector<Color>> anti_colors(Engine& eng, const Config& cfg, const Params& prm,
                                            const std::vector<int>& group, int groups,
                                            const std::vector<uint8_t>& target, const std::vector<int>& short_id,
                                            std::vector<uint8_t>& delivered) {
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  std::vector<std::vector<NodeId>> targets(groups);
  int max_sid = 0;
  for (NodeId v = 0; v < n; ++v)
    if (group[v] >= 0 && target[v]) {
      targets[group[v]].push_back(v);
      max_sid = std::max(max_sid, short_id[v]);
    }
  const int sb = std::max(1, bits_for(static_cast<uint64_t>(max_sid) + 1));
  const int cb = eng.color_bits();
  const int payload = payload_budget(eng);
  std::vector<std::vector<NodeId>> anti(n);
  size_t most = 0;
  for (NodeId u = 0; u < n; ++u) {
    if (group[u] < 0 || eng.color(u) == kNoColor) continue;
    for (NodeId v : targets[group[u]])
      if (v != u && !g.has_edge(u, v)) anti[u].push_back(v);
    most = std::max(most, anti[u].size());
  }
  int seqb = 0, q = 1, piece_bits = 0;
  for (int guess = 0; guess < 8; ++guess) {
    piece_bits = std::min(64, payload - eng.log_n() - seqb);
    const int cntb = bits_for(static_cast<uint64_t>(std::max(1, (piece_bits - cb) / sb)) + 1);
    q = std::max(1, (piece_bits - cb - cntb) / sb);
    const int m = static_cast<int>((most + q - 1) / q);
    if (bits_for(static_cast<uint64_t>(std::max(1, m))) <= seqb) break;
    seqb = bits_for(static_cast<uint64_t>(std::max(1, m)));
  }
  const int cntb = bits_for(static_cast<uint64_t>(q) + 1);
  std::vector<std::vector<uint64_t>> pieces(n);
  for (NodeId u = 0; u < n; ++u)
    for (size_t i = 0; i < anti[u].size(); i += q) {
      const size_t end = std::min(anti[u].size(), i + q);
      uint64_t p = static_cast<uint64_t>(eng.color(u));
      p |= static_cast<uint64_t>(end - i) << cb;
      int at = cb + cntb;
      for (size_t j = i; j < end; ++j, at += sb) p |= static_cast<uint64_t>(short_id[anti[u][j]]) << at;
      pieces[u].push_back(p);
    }
  auto m2a = many_to_all(eng, cfg, prm, group, groups, pieces, piece_bits);
  delivered = m2a.delivered;
  std::vector<std::vector<Color>> out(n);
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v : anti[u]) out[v].push_back(eng.color(u));
  for (auto& l : out) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return out;
}

std::vector<Color> palette_list(const std::vector<uint64_t>& used, int delta) {
  std::vector<Color> out;
  for (Color c = 1; c <= delta + 1; ++c)
    if (!bitmap_has(used, c)) out.push_back(c);
  return out;
}

std::vector<Color> merge_lists(const std::vector<Color>& a, const std::vector<Color>& b) {
  std::vector<Color> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct PutasideWork {
  std::vector<int> cliques;           // live full cliques with uncolored put-aside nodes
  std::vector<int> group;             // per node
  std::vector<uint8_t> open_p;        // uncolored put-aside nodes
  std::vector<std::vector<Color>> psi;  // per clique, as learned
};

PutasideWork collect(PipelineState& st) {
  Engine& eng = st.eng;
  PutasideWork w;
  w.group.assign(eng.n(), -1);
  w.open_p.assign(eng.n(), 0);
  w.psi.assign(st.dec.cliques.size(), {});
  for (const auto& k : st.dec.cliques) {
    if (!st.live(k.id) || k.cls != CliqueClass::Full) continue;
    bool any = false;
    for (NodeId v : k.putaside)
      if (eng.color(v) == kNoColor) {
        w.open_p[v] = 1;
        any = true;
      }
    if (!any) continue;
    w.cliques.push_back(k.id);
    for (NodeId v : k.members) w.group[v] = k.id;
  }
  if (w.cliques.empty()) return w;
  auto pal = learn_palette(eng, st.prm, w.group, static_cast<int>(st.dec.cliques.size()));
  for (int k : w.cliques) w.psi[k] = palette_list(pal.used[st.dec.cliques[k].members[0]], st.delta());
  for (int k : pal.failed) eng.record_fault({Fault::Kind::PutAside, "", -1, 0, k, "put-aside palette not learned"});
  return w;
}

int64_t uncolored_putaside(const PipelineState& st, int k) {
  int64_t c = 0;
  for (NodeId v : st.dec.cliques[k].putaside) c += st.eng.color(v) == kNoColor;
  return c;
}

}  // namespace

std::vector<ReduceReport> reduce_putaside(PipelineState& st) {
  Engine& eng = st.eng;
  const NodeId n = eng.n();
  const int groups = static_cast<int>(st.dec.cliques.size());
  std::vector<ReduceReport> reports;
  PutasideWork w = collect(st);
  if (w.cliques.empty()) return reports;
  const double clog = st.prm.c_log_n;
  const int64_t z1 = static_cast<int64_t>(std::ceil(clog / st.prm.loglog_n - 1e-9));
  const int instances = std::max(1, static_cast<int>(std::ceil(st.prm.loglog_n - 1e-9)));
  const int kk = std::max(1, static_cast<int>(std::ceil(clog / (st.prm.loglog_n * st.prm.loglog_n) - 1e-9)));
  std::vector<uint8_t> delivered;
  auto sid = assign_short_ids(eng, st.cfg, st.prm, w.group, groups, w.open_p, delivered);

  std::map<int, size_t> slot;
  for (int k : w.cliques) {
    const auto& K = st.dec.cliques[k];
    ReduceReport r;
    r.clique = k;
    r.high_anti = K.a_bar >= Rational(static_cast<int64_t>(std::ceil(clog)));
    r.before = uncolored_putaside(st, k);
    r.bound = 2 * z1;
    slot[k] = reports.size();
    reports.push_back(r);
  }

  // High anti-degree cliques go straight to z with the clique palette; the others first drop
  // to O(C log n) with a carved-out reserve.
  CompressTryInput first;
  first.group.assign(n, -1);
  first.groups = groups;
  first.in_s.assign(n, 0);
  first.short_id = sid;
  first.list.assign(n, {});
  first.z.assign(groups, z1);
  first.k = kk;
  first.instances = instances;
  const int64_t carve = static_cast<int64_t>(std::ceil(st.cfg.carve_factor * clog - 1e-9));
  for (int k : w.cliques) {
    auto& r = reports[slot[k]];
    if (r.before <= z1 || !delivered[k]) continue;
    std::vector<NodeId> p;
    for (NodeId v : st.dec.cliques[k].putaside)
      if (w.open_p[v]) p.push_back(v);
    std::sort(p.begin(), p.end(), [&](NodeId a, NodeId b) { return sid[a] < sid[b]; });
    size_t take = p.size();
    if (!r.high_anti) {
      if (static_cast<int64_t>(p.size()) <= carve + static_cast<int64_t>(std::ceil(clog))) continue;
      take = p.size() - static_cast<size_t>(carve);
      first.z[k] = static_cast<int64_t>(std::ceil(clog));
    }
    for (NodeId v : st.dec.cliques[k].members) first.group[v] = k;
    for (size_t i = 0; i < take; ++i) {
      first.in_s[p[i]] = 1;
      first.list[p[i]] = w.psi[k];
    }
  }
  if (std::any_of(first.in_s.begin(), first.in_s.end(), [](uint8_t x) { return x != 0; }))
    compress_try(eng, st.cfg, st.prm, first);
  for (auto& r : reports) r.after_phase1 = uncolored_putaside(st, r.clique);

  // Low anti-degree cliques: lists grow by the colors of anti-neighbors, z nodes stay out.
  std::vector<uint8_t> target(n, 0);
  std::vector<int> group2(n, -1);
  bool any2 = false;
  for (auto& r : reports) {
    if (r.high_anti || r.after_phase1 <= z1 || !delivered[r.clique]) continue;
    any2 = true;
    for (NodeId v : st.dec.cliques[r.clique].members) group2[v] = r.clique;
    for (NodeId v : st.dec.cliques[r.clique].putaside)
      if (eng.color(v) == kNoColor) target[v] = 1;
  }
  if (any2) {
    std::vector<uint8_t> adel;
    auto anti = anti_colors(eng, st.cfg, st.prm, group2, groups, target, sid, adel);
    CompressTryInput second;
    second.group.assign(n, -1);
    second.groups = groups;
    second.in_s.assign(n, 0);
    second.short_id = sid;
    second.list.assign(n, {});
    second.z.assign(groups, z1);
    second.k = kk;
    second.instances = instances;
    for (auto& r : reports) {
      if (r.high_anti || r.after_phase1 <= z1 || !delivered[r.clique] || !adel[r.clique]) continue;
      const auto& K = st.dec.cliques[r.clique];
      // Phase-one adoptions are known to every member through the replayed pass.
      auto psi = palette_list(clique_colors(eng, K.members), st.delta());
      std::vector<NodeId> p;
      for (NodeId v : K.putaside)
        if (eng.color(v) == kNoColor) p.push_back(v);
      std::sort(p.begin(), p.end(), [&](NodeId a, NodeId b) { return sid[a] < sid[b]; });
      const size_t take = p.size() - static_cast<size_t>(std::min<int64_t>(z1, static_cast<int64_t>(p.size())));
      for (NodeId v : K.members) second.group[v] = r.clique;
      for (size_t i = 0; i < take; ++i) {
        second.in_s[p[i]] = 1;
        second.list[p[i]] = merge_lists(psi, anti[p[i]]);
      }
    }
    if (std::any_of(second.in_s.begin(), second.in_s.end(), [](uint8_t x) { return x != 0; }))
      compress_try(eng, st.cfg, st.prm, second);
  }
  for (auto& r : reports) {
    r.after = uncolored_putaside(st, r.clique);
    r.within_bound = r.after <= r.bound;
    if (!r.within_bound)
      eng.record_fault({Fault::Kind::PutAside, "", st.dec.cliques[r.clique].leader, 0, r.after,
                        "put-aside set still above 2 C log n / log log n"});
  }
  return reports;
}

std::vector<FinishReport> finish_putaside(PipelineState& st) {
  Engine& eng = st.eng;
  const NodeId n = eng.n();
  const int groups = static_cast<int>(st.dec.cliques.size());
  std::vector<FinishReport> reports;
  PutasideWork w = collect(st);
  if (w.cliques.empty()) return reports;
  const double clog = st.prm.c_log_n;
  std::vector<uint8_t> delivered;
  auto sid = assign_short_ids(eng, st.cfg, st.prm, w.group, groups, w.open_p, delivered);
  const double l = st.prm.log_n;
  const auto dcap = static_cast<size_t>(std::max(1.0, std::floor(st.cfg.finish_palette * l * l * l)));

  std::vector<uint8_t> low(groups, 0);
  std::vector<int> group_low(n, -1);
  bool any_low = false;
  for (int k : w.cliques)
    if (st.dec.cliques[k].a_bar < Rational(static_cast<int64_t>(std::ceil(clog)))) {
      low[k] = 1;
      any_low = true;
      for (NodeId v : st.dec.cliques[k].members) group_low[v] = k;
    }
  std::vector<std::vector<Color>> anti(n);
  std::vector<uint8_t> adel(groups, 1);
  if (any_low) anti = anti_colors(eng, st.cfg, st.prm, group_low, groups, w.open_p, sid, adel);

  const int cb = eng.color_bits();
  const int payload = payload_budget(eng);
  std::vector<std::vector<Color>> chosen(n);
  std::vector<std::vector<uint64_t>> pieces(n);
  std::vector<std::vector<NodeId>> order(groups);
  int piece_bits = 1;
  for (int k : w.cliques) {
    FinishReport r;
    r.clique = k;
    const auto& K = st.dec.cliques[k];
    std::vector<Color> d = w.psi[k];
    if (d.size() > dcap) d.resize(dcap);
    for (NodeId v : K.putaside)
      if (w.open_p[v]) order[k].push_back(v);
    std::sort(order[k].begin(), order[k].end(), [&](NodeId a, NodeId b) { return sid[a] < sid[b]; });
    r.size = static_cast<int64_t>(order[k].size());
    const size_t need = order[k].size() + 1;
    for (NodeId v : order[k]) {
      const std::vector<Color> list = low[k] ? merge_lists(d, anti[v]) : d;
      const int ib = std::max(1, bits_for(list.size()));
      for (size_t i = 0; i < list.size() && chosen[v].size() < need; ++i)
        if (!eng.known_used(v, list[i])) chosen[v].push_back(list[i]);
      if (chosen[v].size() < need) ++r.short_lists;
      // Indices into the public list, packed as many per piece as fit.
      const int per = std::max(1, std::min(64, payload - eng.log_n() - 6) / ib);
      piece_bits = std::max(piece_bits, std::min(64, per * ib));
      for (size_t i = 0; i < chosen[v].size(); i += per) {
        uint64_t p = 0;
        for (size_t j = i; j < std::min(chosen[v].size(), i + per); ++j) {
          const auto idx = static_cast<uint64_t>(std::lower_bound(list.begin(), list.end(), chosen[v][j]) - list.begin());
          p |= idx << ((j - i) * ib);
        }
        pieces[v].push_back(p);
      }
    }
    if (r.short_lists > 0)
      eng.record_fault({Fault::Kind::Precondition, "", K.leader, 0, r.short_lists,
                        "put-aside lists shorter than |P| + 1"});
    reports.push_back(r);
  }
  (void)cb;
  auto m2a = many_to_all(eng, st.cfg, st.prm, w.group, groups, pieces, piece_bits);
  for (auto& r : reports) {
    const int k = r.clique;
    if (!m2a.delivered[k] || !delivered[k] || !adel[k]) {
      for (NodeId v : order[k]) st.needs_fallback[v] = 1;
      continue;
    }
    std::vector<std::vector<Color>> lists;
    for (NodeId v : order[k]) lists.push_back(chosen[v]);
    auto out = sequential_pass(lists);
    for (size_t i = 0; i < order[k].size(); ++i) {
      if (out[i] == kNoColor) {
        st.needs_fallback[order[k][i]] = 1;
        continue;
      }
      eng.set_color(order[k][i], out[i]);
      ++r.colored;
    }
  }
  return reports;
}

}  // namespace bcolor
