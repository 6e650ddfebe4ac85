#include "bcolor/sct.hpp"

#include "bcolor/putaside.hpp"
#include "bcolor/slackgen.hpp"
#include "bcolor/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace bcolor {

int bucket_count(const Params& prm) {
  const int64_t width = std::max<int64_t>(1, static_cast<int64_t>(std::floor(prm.c_log_n)));
  return static_cast<int>(std::max<int64_t>(1, (prm.delta + 1 + width - 1) / width));
}

std::pair<Color, Color> color_range(int i, int k, int delta) {
  return {static_cast<Color>(static_cast<int64_t>(i) * (delta + 1) / k + 1),
          static_cast<Color>(static_cast<int64_t>(i + 1) * (delta + 1) / k)};
}

bool two_hop_connects(const Graph& g, const std::vector<NodeId>& members, const std::vector<NodeId>& bucket,
                      int threshold) {
  std::vector<NodeId> t = bucket;
  std::sort(t.begin(), t.end());
  const size_t words = (t.size() + 63) / 64;
  std::vector<uint64_t> rows(members.size() * std::max<size_t>(1, words), 0);
  for (size_t a = 0; a < members.size(); ++a)
    for (NodeId u : g.neighbors(members[a])) {
      auto it = std::lower_bound(t.begin(), t.end(), u);
      if (it == t.end() || *it != u) continue;
      const size_t pos = static_cast<size_t>(it - t.begin());
      rows[a * words + pos / 64] |= uint64_t{1} << (pos % 64);
    }
  for (size_t a = 0; a < members.size(); ++a)
    for (size_t b = a + 1; b < members.size(); ++b) {
      int common = 0;
      for (size_t w = 0; w < words; ++w) common += std::popcount(rows[a * words + w] & rows[b * words + w]);
      if (common < threshold) return false;
    }
  return true;
}

std::vector<uint64_t> clique_colors(const Engine& eng, const std::vector<NodeId>& members) {
  std::vector<uint64_t> b((eng.graph().max_degree() + 2 + 63) / 64, 0);
  for (NodeId v : members) {
    const Color c = eng.color(v);
    if (c != kNoColor) b[c >> 6] |= uint64_t{1} << (c & 63);
  }
  return b;
}

PaletteResult learn_palette(Engine& eng, const Params& prm, const std::vector<int>& group, int groups) {
  const NodeId n = eng.n();
  const int delta = eng.graph().max_degree();
  const size_t words = (delta + 2 + 63) / 64;
  PaletteResult res;
  res.k = bucket_count(prm);
  const int k = res.k;
  res.bucket.assign(n, -1);
  res.used.assign(n, {});
  res.range_used.assign(n, 0);
  if (eng.has_pending_announcements()) eng.flush();

  std::vector<std::vector<NodeId>> members(groups);
  for (NodeId v = 0; v < n; ++v)
    if (group[v] >= 0) members[group[v]].push_back(v);
  std::vector<std::vector<uint64_t>> oracle(groups);
  for (int gi = 0; gi < groups; ++gi) oracle[gi] = clique_colors(eng, members[gi]);

  const int ib = std::max(1, bits_for(static_cast<uint64_t>(k)));
  const int64_t full_words = (delta + 2 + eng.log_n() - 1) / eng.log_n();
  std::vector<uint8_t> pending(groups, 1);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<NodeId> part;
    for (int gi = 0; gi < groups; ++gi)
      if (pending[gi]) part.insert(part.end(), members[gi].begin(), members[gi].end());
    std::sort(part.begin(), part.end());
    if (part.empty()) break;
    for (NodeId v : part) {
      Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "palette-bucket");
      res.bucket[v] = static_cast<int>(rng.below(static_cast<uint64_t>(k)));
    }
    eng.round(
        &part,
        [&](NodeCtx& c, BitWriter& w) {
          const NodeId v = c.id;
          const auto [lo, hi] = color_range(res.bucket[v], k, delta);
          uint64_t bits = 0;
          for (Color col = lo; col <= hi; ++col)
            if (eng.color(v) == col || eng.known_used_in_group(v, col)) bits |= uint64_t{1} << (col - lo);
          w.put(static_cast<uint64_t>(res.bucket[v]), ib);
          w.put(bits, hi - lo + 1);
        },
        &part,
        [&](NodeCtx& c, Inbox& in) {
          const NodeId v = c.id;
          std::vector<uint64_t> used(words, 0);
          const Color own = eng.color(v);
          if (own != kNoColor) used[own >> 6] |= uint64_t{1} << (own & 63);
          const auto [mlo, mhi] = color_range(res.bucket[v], k, delta);
          uint64_t mine = 0;
          for (Color col = mlo; col <= mhi; ++col)
            if (own == col || eng.known_used_in_group(v, col)) mine |= uint64_t{1} << (col - mlo);
          c.mem.charge(eng.streaming() ? 2 : full_words);
          in.for_each([&](NodeId u, BitReader& r) {
            const int i = static_cast<int>(r.get(ib));
            const auto [lo, hi] = color_range(i, k, delta);
            const uint64_t bits = r.get(hi - lo + 1);
            if (group[u] != group[v] || bits == 0) return;
            const int off = lo & 63;
            used[lo >> 6] |= bits << off;
            if (off != 0 && (bits >> (64 - off)) != 0) used[(lo >> 6) + 1] |= bits >> (64 - off);
            if (i == res.bucket[v]) mine |= bits;
          });
          res.used[v] = std::move(used);
          res.range_used[v] = mine;
        });
    for (int gi = 0; gi < groups; ++gi) {
      if (!pending[gi]) continue;
      bool good = true;
      for (NodeId v : members[gi]) good = good && res.used[v] == oracle[gi];
      if (good) {
        pending[gi] = 0;
        continue;
      }
      if (attempt == 0) res.resampled.push_back(gi);
      else {
        res.failed.push_back(gi);
        eng.record_fault({Fault::Kind::Bucketing, "", members[gi].empty() ? -1 : members[gi][0], 0, gi,
                          "palette buckets do not connect the clique within two hops"});
      }
    }
  }
  return res;
}

RelabelResult relabel(Engine& eng, const Params& prm, const std::vector<int>& group, int groups,
                      const std::vector<uint8_t>& in_s, const std::vector<int64_t>& s_count,
                      const RelabelHooks* hooks) {
  const NodeId n = eng.n();
  const int64_t start = eng.round();
  RelabelResult res;
  res.x = std::max(1, static_cast<int>(std::ceil(prm.c_log_n / prm.loglog_n - 1e-9)));
  const int x = res.x;
  res.label.assign(n, 0);
  res.index.assign(groups, -1);
  res.width.assign(groups, 1);
  int maxw = 1;
  for (int gi = 0; gi < groups; ++gi) {
    const uint64_t range = static_cast<uint64_t>(std::max<int64_t>(1, s_count[gi] * s_count[gi])) * prm.ceil_log_n;
    res.width[gi] = std::max(1, bits_for(range));
    maxw = std::max(maxw, res.width[gi]);
  }
  std::vector<NodeId> tnodes, snodes;
  for (NodeId v = 0; v < n; ++v) {
    if (group[v] < 0) continue;
    tnodes.push_back(v);
    if (in_s[v]) snodes.push_back(v);
  }
  if (snodes.empty()) return res;

  std::vector<std::vector<uint64_t>> labels(n);
  for (NodeId v : snodes) {
    Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "relabel");
    const uint64_t range = uint64_t{1} << res.width[group[v]];
    const uint64_t bound = static_cast<uint64_t>(std::max<int64_t>(1, s_count[group[v]] * s_count[group[v]])) *
                           prm.ceil_log_n;
    labels[v].resize(x);
    for (auto& l : labels[v]) l = rng.below(std::min(range, bound));
  }
  if (hooks)
    for (auto [a, b] : hooks->equal_streams)
      if (!labels[a].empty() && !labels[b].empty()) labels[b] = labels[a];

  const int gb = std::max(1, bits_for(static_cast<uint64_t>(groups)));
  const int per = std::max(1, (payload_budget(eng) - gb) / maxw);
  const int chunks = (x + per - 1) / per;
  // heard[v] holds the label streams of v's S neighbors of the same group.
  std::vector<std::vector<std::pair<NodeId, std::vector<uint64_t>>>> heard(n);
  for (int ch = 0; ch < chunks; ++ch) {
    const int lo = ch * per, hi = std::min(x, lo + per);
    eng.round(
        &snodes,
        [&](NodeCtx& c, BitWriter& w) {
          w.put(static_cast<uint64_t>(group[c.id]), gb);
          for (int j = lo; j < hi; ++j) w.put(labels[c.id][j], res.width[group[c.id]]);
        },
        &tnodes,
        [&](NodeCtx& c, Inbox& in) {
          const NodeId v = c.id;
          auto& hv = heard[v];
          size_t pos = 0;
          in.for_each([&](NodeId u, BitReader& r) {
            const int gu = static_cast<int>(r.get(gb));
            if (gu != group[v]) return;
            if (ch == 0) hv.emplace_back(u, std::vector<uint64_t>());
            auto& slot = ch == 0 ? hv.back() : hv[pos++];
            for (int j = lo; j < hi; ++j) slot.second.push_back(r.get(res.width[gu]));
          });
          c.mem.charge(static_cast<int64_t>(hv.size()) * ((hi * res.width[group[v]]) / eng.log_n() + 1));
        });
  }
  // Collision maps over S neighbors and self, then one echo.
  std::vector<uint64_t> cmap(n, 0), echo(n, 0);
  for (NodeId v : tnodes) {
    std::vector<std::vector<uint64_t>> streams;
    for (auto& [u, s] : heard[v]) streams.push_back(s);
    if (in_s[v]) streams.push_back(labels[v]);
    for (int j = 0; j < x; ++j) {
      std::vector<uint64_t> col;
      for (auto& s : streams)
        if (j < static_cast<int>(s.size())) col.push_back(s[j]);
      std::sort(col.begin(), col.end());
      if (std::adjacent_find(col.begin(), col.end()) != col.end()) cmap[v] |= uint64_t{1} << j;
    }
  }
  auto exchange = [&](const std::vector<uint64_t>& src, std::vector<uint64_t>& dst) {
    dst = src;
    eng.round(
        &tnodes,
        [&](NodeCtx& c, BitWriter& w) {
          w.put(static_cast<uint64_t>(group[c.id]), gb);
          w.put(src[c.id], x);
        },
        &tnodes,
        [&](NodeCtx& c, Inbox& in) {
          c.mem.charge(1);
          in.for_each([&](NodeId, BitReader& r) {
            const int gu = static_cast<int>(r.get(gb));
            const uint64_t bits = r.get(x);
            if (gu == group[c.id]) dst[c.id] |= bits;
          });
        });
  };
  std::vector<uint64_t> first, second;
  exchange(cmap, first);
  exchange(first, second);

  std::vector<int> chosen(n, -1);
  for (NodeId v : snodes) {
    for (int j = 0; j < x; ++j)
      if (!((second[v] >> j) & 1ULL)) {
        chosen[v] = j;
        break;
      }
    if (chosen[v] >= 0) res.label[v] = labels[v][chosen[v]];
  }
  std::vector<std::vector<NodeId>> sg(groups);
  for (NodeId v : snodes) sg[group[v]].push_back(v);
  for (int gi = 0; gi < groups; ++gi) {
    if (sg[gi].empty()) continue;
    const int j = chosen[sg[gi][0]];
    bool ok = j >= 0;
    for (NodeId v : sg[gi]) ok = ok && chosen[v] == j;
    if (ok) {
      std::vector<uint64_t> ls;
      for (NodeId v : sg[gi]) ls.push_back(res.label[v]);
      std::sort(ls.begin(), ls.end());
      ok = std::adjacent_find(ls.begin(), ls.end()) == ls.end();
    }
    if (ok) {
      res.index[gi] = j;
    } else {
      res.failed.push_back(gi);
      eng.record_fault({Fault::Kind::Relabel, "", sg[gi][0], 0, gi, "no collision-free label index"});
    }
  }
  res.rounds = eng.round() - start;
  return res;
}

bool use_const_permute(const Config& cfg, const Params& prm) {
  if (cfg.permute == PermuteVariant::Const) return true;
  if (cfg.permute == PermuteVariant::LogLog) return false;
  const double l = prm.ceil_log_n;
  return prm.delta >= l * l * l;
}

namespace {

// Rough bucketing, trees, counts, prefix and relabel for every job still pending.
struct Rough {
  int k = 1;
  std::vector<int> bucket;     // per node
  std::vector<int> group;      // per node: job * k + bucket
  GroupTrees trees;
  std::vector<int64_t> count;  // per group |S_i|
  std::vector<int64_t> prefix; // per node
  RelabelResult labels;
  std::vector<uint8_t> bad;    // per job
};

Rough rough_stage(Engine& eng, const Params& prm, const GroupTrees& cliques, const std::vector<uint8_t>& in_s,
                  const std::vector<uint8_t>& active, const PermuteHooks* hooks) {
  const NodeId n = eng.n();
  const int jobs = cliques.groups;
  Rough r;
  r.k = bucket_count(prm);
  const int k = r.k;
  r.bucket.assign(n, -1);
  r.group.assign(n, -1);
  r.prefix.assign(n, -1);
  r.bad.assign(jobs, 0);
  std::vector<int64_t> s_of_job(jobs, 0);
  for (NodeId v : cliques.participants) {
    const int j = cliques.group[v];
    if (!active[j]) continue;
    Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "rough-bucket");
    r.bucket[v] = static_cast<int>(rng.below(static_cast<uint64_t>(k)));
    r.group[v] = j * k + r.bucket[v];
    s_of_job[j] += in_s[v];
  }
  r.trees = build_group_trees(eng, r.group, jobs * k, LeaderRule::MaxId, false);
  for (int gi : r.trees.unreachable) r.bad[gi / k] = 1;
  std::vector<int64_t> ones(n, 0);
  for (NodeId v = 0; v < n; ++v) ones[v] = r.group[v] >= 0 && in_s[v];
  int64_t max_job = 1;
  for (int64_t s : s_of_job) max_job = std::max(max_job, s);
  const int cbits = bits_for(static_cast<uint64_t>(max_job) + 1);
  r.count = aggregate_sum(eng, r.trees, ones, 1, std::max(1, cbits), true);

  // Every member learns how many S nodes sit in lower buckets of its clique.
  std::vector<NodeId> part;
  for (NodeId v = 0; v < n; ++v)
    if (r.group[v] >= 0) part.push_back(v);
  if (eng.streaming()) {
    std::vector<int> job(n, -1);
    for (NodeId v : part) job[v] = cliques.group[v];
    std::vector<std::vector<int64_t>> y(jobs, std::vector<int64_t>(k, 0));
    for (int j = 0; j < jobs; ++j)
      for (int i = 0; i < k; ++i) y[j][i] = r.count[static_cast<size_t>(j) * k + i];
    auto pre = prefix_sums(eng, job, r.bucket, std::vector<int>(jobs, k), y, prm.c_log_n,
                           std::max(1, 2 * prm.ceil_log_n));
    for (NodeId v : part) r.prefix[v] = pre.prefix[v];
    for (int j : pre.failed_jobs) r.bad[j] = 1;
  } else {
    const int ib = std::max(1, bits_for(static_cast<uint64_t>(k)));
    eng.round(
        &part,
        [&](NodeCtx& c, BitWriter& w) {
          w.put(static_cast<uint64_t>(r.bucket[c.id]), ib);
          w.put(static_cast<uint64_t>(r.count[r.group[c.id]]), std::max(1, cbits));
        },
        &part,
        [&](NodeCtx& c, Inbox& in) {
          const NodeId v = c.id;
          thread_local std::vector<uint8_t> seen;
          seen.assign(k, 0);
          c.mem.charge(k / 64 + 2);
          int64_t p = 0;
          in.for_each([&](NodeId u, BitReader& rd) {
            const int i = static_cast<int>(rd.get(ib));
            const auto cnt = static_cast<int64_t>(rd.get(std::max(1, cbits)));
            if (cliques.group[u] != cliques.group[v] || seen[i]) return;
            seen[i] = 1;
            if (i < r.bucket[v]) p += cnt;
          });
          r.prefix[v] = p;
        });
  }
  for (NodeId v : part) {
    const int j = cliques.group[v];
    int64_t expect = 0;
    for (int i = 0; i < r.bucket[v]; ++i) expect += r.count[static_cast<size_t>(j) * k + i];
    if (r.prefix[v] != expect && !r.bad[j]) {
      r.bad[j] = 1;
      eng.record_fault({Fault::Kind::Delivery, "", v, 0, j, "bucket counts of the clique not all heard"});
    }
  }
  const int64_t cap = 2 * static_cast<int64_t>(std::ceil(prm.c_log_n));
  for (int gi = 0; gi < jobs * k; ++gi)
    if (r.count[gi] > cap && !r.bad[gi / k]) {
      r.bad[gi / k] = 1;
      eng.record_fault({Fault::Kind::Bucketing, "", -1, 0, r.count[gi], "rough bucket larger than 2 C log n"});
    }
  std::vector<uint8_t> s_in(n, 0);
  for (NodeId v : part) s_in[v] = in_s[v];
  r.labels = relabel(eng, prm, r.group, jobs * k, s_in, r.count, hooks ? &hooks->relabel : nullptr);
  for (int gi : r.labels.failed) r.bad[gi / k] = 1;
  return r;
}

// Leaders of the given groups collect S labels, shuffle, and send the order back.
// Returns the position of each S node inside its group, -1 when it did not arrive.
std::vector<int64_t> leader_shuffle(Engine& eng, const GroupTrees& trees, const std::vector<uint8_t>& in_s,
                                    const std::vector<uint64_t>& label, int label_bits,
                                    const std::vector<int64_t>& expected, std::vector<uint8_t>& group_bad) {
  const NodeId n = eng.n();
  std::vector<uint8_t> holds(n, 0);
  for (NodeId v : trees.participants) holds[v] = in_s[v];
  auto lists = gather_to_leader(eng, trees, holds, label, label_bits);
  for (int gi = 0; gi < trees.groups; ++gi) {
    if (static_cast<int64_t>(lists[gi].size()) != expected[gi]) group_bad[gi] = 1;
    if (lists[gi].size() < 2 || trees.leader[gi] < 0) continue;
    Rng rng = derive_rng(eng.options().seed, trees.leader[gi], eng.round(), "leader-shuffle");
    rng.shuffle(lists[gi]);
  }
  std::vector<int64_t> key(n, -1);
  for (NodeId v : trees.participants)
    if (in_s[v]) key[v] = static_cast<int64_t>(label[v]);
  auto d = disseminate_from_leader(eng, trees, lists, label_bits, key, false);
  for (NodeId v : trees.participants)
    if (in_s[v] && d.position[v] < 0) group_bad[trees.group[v]] = 1;
  return d.position;
}

int max_width(const RelabelResult& r) {
  int w = 1;
  for (int x : r.width) w = std::max(w, x);
  return w;
}

bool check_bijection(Engine& eng, const GroupTrees& cliques, const std::vector<uint8_t>& in_s,
                     const std::vector<int64_t>& pi, int job) {
  std::vector<int64_t> got;
  for (NodeId v : cliques.participants)
    if (cliques.group[v] == job && in_s[v]) got.push_back(pi[v]);
  std::sort(got.begin(), got.end());
  for (size_t i = 0; i < got.size(); ++i)
    if (got[i] != static_cast<int64_t>(i)) {
      eng.record_fault({Fault::Kind::Contract, "", -1, 0, job, "permutation is not a bijection"});
      return false;
    }
  return true;
}

std::vector<uint8_t> jobs_with_s(const GroupTrees& cliques, const std::vector<uint8_t>& in_s) {
  std::vector<uint8_t> on(cliques.groups, 0);
  for (NodeId v : cliques.participants)
    if (in_s[v] && cliques.ok(cliques.group[v])) on[cliques.group[v]] = 1;
  return on;
}

// Rough stage plus leader shuffles in the rough buckets, for the given jobs.
void loglog_attempt(Engine& eng, const Params& prm, const GroupTrees& cliques, const std::vector<uint8_t>& in_s,
                    const std::vector<uint8_t>& active, const PermuteHooks* hooks, PermuteResult& res,
                    std::vector<uint8_t>& bad) {
  Rough r = rough_stage(eng, prm, cliques, in_s, active, hooks);
  std::vector<uint8_t> gbad(static_cast<size_t>(cliques.groups) * r.k, 0);
  std::vector<uint8_t> s_in(eng.n(), 0);
  for (NodeId v : r.trees.participants) s_in[v] = in_s[v];
  auto pos = leader_shuffle(eng, r.trees, s_in, r.labels.label, max_width(r.labels), r.count, gbad);
  for (int j = 0; j < cliques.groups; ++j) {
    if (!active[j]) continue;
    bad[j] = r.bad[j];
    for (int i = 0; i < r.k; ++i) bad[j] = bad[j] || gbad[static_cast<size_t>(j) * r.k + i];
  }
  for (NodeId v : r.trees.participants)
    if (in_s[v] && active[cliques.group[v]] && !bad[cliques.group[v]]) res.pi[v] = pos[v] + r.prefix[v];
  for (int j = 0; j < cliques.groups; ++j)
    if (active[j] && !bad[j] && !check_bijection(eng, cliques, in_s, res.pi, j)) bad[j] = 1;
}

}  // namespace

PermuteResult permute_loglog(Engine& eng, const Params& prm, const Config& cfg, const GroupTrees& cliques,
                             const std::vector<uint8_t>& in_s, const PermuteHooks* hooks) {
  (void)cfg;
  const int64_t start = eng.round();
  PermuteResult res;
  res.pi.assign(eng.n(), -1);
  auto active = jobs_with_s(cliques, in_s);
  std::vector<uint8_t> bad(cliques.groups, 0);
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (std::none_of(active.begin(), active.end(), [](uint8_t a) { return a != 0; })) break;
    loglog_attempt(eng, prm, cliques, in_s, active, hooks, res, bad);
    for (int j = 0; j < cliques.groups; ++j) active[j] = active[j] && bad[j];
  }
  for (int j = 0; j < cliques.groups; ++j)
    if (active[j]) {
      res.failed.push_back(j);
      for (NodeId v : cliques.participants)
        if (cliques.group[v] == j) res.pi[v] = -1;
    }
  res.rounds = eng.round() - start;
  return res;
}

PermuteResult permute_const(Engine& eng, const Params& prm, const Config& cfg, const GroupTrees& cliques,
                            const std::vector<uint8_t>& in_s, const PermuteHooks* hooks) {
  const NodeId n = eng.n();
  const Graph& g = eng.graph();
  const int64_t start = eng.round();
  const int jobs = cliques.groups;
  PermuteResult res;
  res.pi.assign(n, -1);
  auto active = jobs_with_s(cliques, in_s);
  if (std::none_of(active.begin(), active.end(), [](uint8_t a) { return a != 0; })) return res;

  const double eps2 = 1.0 / 12;
  const int kp = (hooks && hooks->single_fine) ? 1 : std::max(1, static_cast<int>(std::ceil(cfg.C * prm.loglog_n - 1e-9)));
  std::vector<uint8_t> bad(jobs, 0);
  Rough r = rough_stage(eng, prm, cliques, in_s, active, hooks);
  const int k = r.k;
  std::vector<uint8_t> retry(jobs, 0);
  for (int j = 0; j < jobs; ++j) retry[j] = active[j] && r.bad[j];

  // Fine buckets inside each rough bucket.
  std::vector<int> fine(n, -1);
  std::vector<NodeId> part;
  for (NodeId v : r.trees.participants) {
    if (retry[cliques.group[v]]) continue;
    part.push_back(v);
    Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "fine-bucket");
    fine[v] = static_cast<int>(rng.below(static_cast<uint64_t>(kp)));
    if (hooks && !hooks->fine_override.empty() && hooks->fine_override[v] >= 0) fine[v] = hooks->fine_override[v] % kp;
  }
  const int ib = std::max(1, bits_for(static_cast<uint64_t>(k)));
  const int fb = std::max(1, bits_for(static_cast<uint64_t>(kp)));
  std::vector<int64_t> flags(static_cast<size_t>(n) * kp, 0);
  eng.round(
      &part,
      [&](NodeCtx& c, BitWriter& w) {
        w.put(static_cast<uint64_t>(r.bucket[c.id]), ib);
        w.put(static_cast<uint64_t>(fine[c.id]), fb);
      },
      &part,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        std::vector<int64_t> cnt(kp, 0);
        int64_t rough_cnt = 0;
        c.mem.charge(kp + 2);
        in.for_each([&](NodeId u, BitReader& rd) {
          const int i = static_cast<int>(rd.get(ib));
          const int f = static_cast<int>(rd.get(fb));
          if (cliques.group[u] != cliques.group[v] || i != r.bucket[v]) return;
          ++rough_cnt;
          ++cnt[f];
        });
        const double mean = static_cast<double>(rough_cnt) / kp;
        for (int f = 0; f < kp; ++f) {
          const double c2 = static_cast<double>(cnt[f]);
          if (c2 < (1 - eps2) * mean - 1e-9 || c2 > (1 + eps2) * mean + 1e-9)
            flags[static_cast<size_t>(v) * kp + f] = 1;
        }
      });
  auto not_kept = aggregate_or(eng, r.trees, flags, kp, true);
  std::vector<int64_t> fine_s(static_cast<size_t>(n) * kp, 0);
  for (NodeId v : part)
    if (in_s[v]) fine_s[static_cast<size_t>(v) * kp + fine[v]] = 1;
  int64_t max_rough = 1;
  for (int64_t c : r.count) max_rough = std::max(max_rough, c);
  auto fine_count = aggregate_sum(eng, r.trees, fine_s, kp, std::max(1, bits_for(static_cast<uint64_t>(max_rough) + 1)), true);

  // Preserved fine buckets permute through their own leaders.
  std::vector<int> fgroup(n, -1);
  for (NodeId v : part) {
    const size_t rg = static_cast<size_t>(r.group[v]);
    if (!not_kept[rg * kp + fine[v]]) fgroup[v] = r.group[v] * kp + fine[v];
  }
  for (int gi = 0; gi < jobs * k; ++gi)
    for (int f = 0; f < kp; ++f) {
      if (retry[gi / k] || !active[gi / k]) continue;
      if (fine_count[static_cast<size_t>(gi) * kp + f] == 0) continue;
      if (not_kept[static_cast<size_t>(gi) * kp + f]) ++res.not_preserved;
      else ++res.preserved;
    }
  GroupTrees ftrees = build_group_trees(eng, fgroup, jobs * k * kp, LeaderRule::MaxId, false);
  std::vector<uint8_t> in_r(n, 0);
  for (int fg : ftrees.unreachable)
    for (NodeId v : ftrees.participants)
      if (ftrees.group[v] == fg) fgroup[v] = -1;
  for (NodeId v : part)
    if (in_s[v] && (fgroup[v] < 0)) in_r[v] = 1;
  std::vector<uint8_t> s_pres(n, 0);
  for (NodeId v : ftrees.participants) s_pres[v] = in_s[v] && !in_r[v];
  std::vector<int64_t> fexp(static_cast<size_t>(jobs) * k * kp, 0);
  for (NodeId v : ftrees.participants)
    if (s_pres[v]) ++fexp[ftrees.group[v]];
  std::vector<uint8_t> fbad(fexp.size(), 0);
  auto rho = leader_shuffle(eng, ftrees, s_pres, r.labels.label, max_width(r.labels), fexp, fbad);
  for (size_t fg = 0; fg < fbad.size(); ++fg)
    if (fbad[fg]) bad[fg / (static_cast<size_t>(k) * kp)] = 1;

  // Leftover fine buckets: random keys spread by many-to-all, order by (key, ID).
  std::vector<int64_t> r_flag(n, 0);
  for (NodeId v : part) r_flag[v] = in_r[v];
  auto r_size = aggregate_sum(eng, cliques, r_flag, 1, std::max(1, bits_for(static_cast<uint64_t>(n) + 1)), true);
  const int64_t capacity = many_to_all_capacity(cfg, prm);
  std::vector<uint8_t> fallback(jobs, 0);
  for (int j = 0; j < jobs; ++j) {
    if (!active[j] || retry[j]) continue;
    res.leftover_nodes += r_size[j];
    if (r_size[j] > capacity) {
      fallback[j] = 1;
      eng.record_fault({Fault::Kind::Bucketing, "", cliques.leader[j], 0, r_size[j],
                        "leftover fine buckets exceed the many-to-all capacity"});
    }
  }
  const int idb = eng.log_n();
  const int key_bits = std::max(1, std::min({prm.clog(), 48, payload_budget(eng) - 2 * idb - ib - fb}));
  std::vector<std::vector<uint64_t>> pieces(n);
  std::vector<uint64_t> rkey(n, 0);
  std::vector<int> mgroup(n, -1);
  for (NodeId v : part) {
    const int j = cliques.group[v];
    if (fallback[j]) continue;
    mgroup[v] = j;
    if (!in_r[v]) continue;
    Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "leftover-key");
    rkey[v] = rng.next() & (key_bits >= 64 ? UINT64_MAX : (uint64_t{1} << key_bits) - 1);
    // (ID, t, t', key) packed into one piece.
    uint64_t p = static_cast<uint64_t>(v);
    p |= static_cast<uint64_t>(r.bucket[v]) << idb;
    p |= static_cast<uint64_t>(fine[v]) << (idb + ib);
    pieces[v].push_back(p);
    pieces[v].push_back(rkey[v]);
  }
  const int piece_bits = std::max(idb + ib + fb, key_bits);
  auto m2a = many_to_all(eng, cfg, prm, mgroup, jobs, pieces, piece_bits);
  for (int j = 0; j < jobs; ++j)
    if (active[j] && !retry[j] && !fallback[j] && !m2a.delivered[j]) bad[j] = 1;
  std::map<std::pair<int, int>, std::vector<std::pair<uint64_t, NodeId>>> order;  // (rough group, fine) -> keys
  for (NodeId v : part)
    if (in_r[v] && !fallback[cliques.group[v]]) order[{r.group[v], fine[v]}].emplace_back(rkey[v], v);
  for (auto& [key, list] : order) std::sort(list.begin(), list.end());

  for (NodeId v : part) {
    const int j = cliques.group[v];
    if (!in_s[v] || fallback[j] || bad[j]) continue;
    const size_t rg = static_cast<size_t>(r.group[v]);
    int64_t base = r.prefix[v];
    for (int f = 0; f < fine[v]; ++f) base += fine_count[rg * kp + f];
    int64_t within = -1;
    if (in_r[v]) {
      const auto& list = order[{r.group[v], fine[v]}];
      within = std::lower_bound(list.begin(), list.end(), std::make_pair(rkey[v], v)) - list.begin();
    } else {
      within = rho[v];
    }
    res.pi[v] = within < 0 ? -1 : base + within;
  }
  for (int j = 0; j < jobs; ++j)
    if (active[j] && !retry[j] && !fallback[j] && !bad[j] && !check_bijection(eng, cliques, in_s, res.pi, j))
      bad[j] = 1;

  // Fall back to shuffles in the rough buckets.
  std::vector<uint8_t> fb_jobs(jobs, 0);
  for (int j = 0; j < jobs; ++j)
    if (active[j] && !retry[j] && fallback[j]) fb_jobs[j] = 1;
  if (std::any_of(fb_jobs.begin(), fb_jobs.end(), [](uint8_t b) { return b != 0; })) {
    std::vector<uint8_t> gbad(static_cast<size_t>(jobs) * k, 0);
    std::vector<uint8_t> s_in(n, 0);
    std::vector<int> rg(n, -1);
    for (NodeId v : r.trees.participants)
      if (fb_jobs[cliques.group[v]]) {
        s_in[v] = in_s[v];
        rg[v] = r.group[v];
      }
    GroupTrees sub = r.trees;
    sub.group = rg;
    sub.participants.clear();
    for (NodeId v : r.trees.participants)
      if (rg[v] >= 0) sub.participants.push_back(v);
    auto pos = leader_shuffle(eng, sub, s_in, r.labels.label, max_width(r.labels), r.count, gbad);
    for (int j = 0; j < jobs; ++j) {
      if (!fb_jobs[j]) continue;
      res.fell_back.push_back(j);
      for (int i = 0; i < k; ++i) bad[j] = bad[j] || gbad[static_cast<size_t>(j) * k + i];
    }
    for (NodeId v : sub.participants)
      if (s_in[v] && !bad[cliques.group[v]]) res.pi[v] = pos[v] + r.prefix[v];
    for (int j = 0; j < jobs; ++j)
      if (fb_jobs[j] && !bad[j] && !check_bijection(eng, cliques, in_s, res.pi, j)) bad[j] = 1;
  }

  // Jobs whose rough stage or fine stage failed get one more try through the rough buckets.
  std::vector<uint8_t> again(jobs, 0);
  for (int j = 0; j < jobs; ++j) again[j] = active[j] && (retry[j] || bad[j]);
  if (std::any_of(again.begin(), again.end(), [](uint8_t b) { return b != 0; })) {
    std::vector<uint8_t> bad2(jobs, 0);
    for (NodeId v : cliques.participants)
      if (again[cliques.group[v]]) res.pi[v] = -1;
    loglog_attempt(eng, prm, cliques, in_s, again, hooks, res, bad2);
    for (int j = 0; j < jobs; ++j)
      if (again[j] && bad2[j]) {
        res.failed.push_back(j);
        for (NodeId v : cliques.participants)
          if (cliques.group[v] == j) res.pi[v] = -1;
      }
  }
  (void)g;
  res.rounds = eng.round() - start;
  return res;
}

bool ac_preserved(const Graph& g, const std::vector<NodeId>& members, const std::vector<NodeId>& rough,
                  const std::vector<NodeId>& fine, int kprime, double eps2) {
  std::vector<NodeId> rs = rough, fs = fine;
  std::sort(rs.begin(), rs.end());
  std::sort(fs.begin(), fs.end());
  for (NodeId v : members) {
    int64_t in_rough = 0, in_fine = 0;
    for (NodeId u : g.neighbors(v)) {
      in_rough += std::binary_search(rs.begin(), rs.end(), u);
      in_fine += std::binary_search(fs.begin(), fs.end(), u);
    }
    const double mean = static_cast<double>(in_rough) / kprime;
    if (in_fine < (1 - eps2) * mean - 1e-9 || in_fine > (1 + eps2) * mean + 1e-9) return false;
  }
  return true;
}

bool ac_like(const Graph& g, const std::vector<NodeId>& set, double eps) {
  std::vector<NodeId> s = set;
  std::sort(s.begin(), s.end());
  for (NodeId v : s) {
    int64_t inside = 0;
    for (NodeId u : g.neighbors(v)) inside += std::binary_search(s.begin(), s.end(), u);
    if (static_cast<double>(inside) < (1 - eps) * static_cast<double>(s.size() - 1) - 1e-9) return false;
  }
  return true;
}

std::vector<SctReport> synchronized_color_trial(PipelineState& st) {
  Engine& eng = st.eng;
  const NodeId n = eng.n();
  const int delta = st.delta();
  const int cliques = static_cast<int>(st.dec.cliques.size());
  std::vector<SctReport> reports;
  if (cliques == 0) return reports;

  std::vector<uint8_t> in_s(n, 0);
  std::vector<int64_t> s_size(cliques, 0);
  std::vector<int> group(n, -1);
  for (const auto& k : st.dec.cliques) {
    if (!st.live(k.id)) continue;
    for (NodeId v : k.members) {
      group[v] = k.id;
      if (eng.color(v) == kNoColor && st.role[v] == Role::Inlier && !st.in_putaside[v] && !st.needs_fallback[v]) {
        in_s[v] = 1;
        ++s_size[k.id];
      }
    }
  }
  auto pal = learn_palette(eng, st.prm, group, cliques);
  for (int k : pal.failed) {
    st.demote(k, Fault::Kind::Bucketing, "clique palette could not be learned");
    for (NodeId v : st.dec.cliques[k].members) in_s[v] = 0;
  }

  std::vector<int64_t> palette(cliques, 0), above(cliques, 0);
  for (auto& k : st.dec.cliques) {
    if (!st.live(k.id)) continue;
    SctReport r;
    r.clique = k.id;
    r.s_size = s_size[k.id];
    const auto& used = pal.used[k.members[0]];
    for (Color c = 1; c <= delta + 1; ++c)
      if (!bitmap_has(used, c)) {
        ++palette[k.id];
        if (c > k.x) ++above[k.id];
      }
    r.palette = palette[k.id];
    const double e = static_cast<double>(k.e_bar.numerator()) / k.e_bar.denominator();
    r.bound = st.cfg.sct_factor * std::max(st.cfg.sct_ext * e, st.prm.c_log_n);
    if (palette[k.id] - k.x < s_size[k.id] || above[k.id] < s_size[k.id]) {
      r.precondition = false;
      st.demote(k.id, Fault::Kind::Precondition,
                "clique palette above the prefix has " + std::to_string(above[k.id]) + " colors for " +
                    std::to_string(s_size[k.id]) + " nodes");
      for (NodeId v : k.members) in_s[v] = 0;
    }
    reports.push_back(r);
  }

  const bool use_const = use_const_permute(st.cfg, st.prm);
  auto perm = use_const ? permute_const(eng, st.prm, st.cfg, st.clique_trees, in_s)
                        : permute_loglog(eng, st.prm, st.cfg, st.clique_trees, in_s);
  for (int k : perm.failed) {
    if (!st.live(k)) continue;
    st.demote(k, Fault::Kind::Bucketing, "no permutation of the uncolored members");
    for (NodeId v : st.dec.cliques[k].members) in_s[v] = 0;
    for (auto& r : reports)
      if (r.clique == k) r.permuted = false;
  }

  std::vector<Color> cand(n, kNoColor);
  std::vector<NodeId> active;
  if (eng.streaming()) {
    std::vector<int> job(n, -1), bucket(n, -1);
    std::vector<int64_t> query(n, 0);
    std::vector<int> x_of_job(cliques, 0);
    for (const auto& k : st.dec.cliques) {
      x_of_job[k.id] = k.x;
      if (!st.live(k.id)) continue;
      for (NodeId v : k.members) {
        job[v] = k.id;
        bucket[v] = pal.bucket[v];
        if (in_s[v] && perm.pi[v] >= 0) query[v] = perm.pi[v] + 1;
      }
    }
    cand = nth_color_of_palette(eng, job, bucket, pal.k, pal.range_used, x_of_job, query, st.prm.c_log_n);
  } else {
    for (NodeId v = 0; v < n; ++v) {
      if (!in_s[v] || perm.pi[v] < 0) continue;
      const int x = st.x_of[v];
      int64_t want = perm.pi[v];
      for (Color c = x + 1; c <= delta + 1; ++c) {
        if (bitmap_has(pal.used[v], c)) continue;
        if (want-- == 0) {
          cand[v] = c;
          break;
        }
      }
    }
  }
  for (NodeId v = 0; v < n; ++v)
    if (in_s[v] && cand[v] != kNoColor) active.push_back(v);
  try_color(eng, active, cand, false);
  for (auto& r : reports) {
    if (!st.live(r.clique)) continue;
    for (NodeId v : st.dec.cliques[r.clique].members) r.leftover += in_s[v] && eng.color(v) == kNoColor;
  }
  return reports;
}

OpenCleanupReport open_cleanup(PipelineState& st) {
  Engine& eng = st.eng;
  const Graph& g = eng.graph();
  const int delta = st.delta();
  OpenCleanupReport rep;
  std::vector<uint8_t> member(eng.n(), 0);
  std::vector<NodeId> pool;
  for (const auto& k : st.dec.cliques) {
    if (!st.live(k.id) || k.cls != CliqueClass::Open) continue;
    for (NodeId v : k.members)
      if (st.role[v] == Role::Inlier && !st.in_putaside[v] && !st.needs_fallback[v]) {
        member[v] = 1;
        pool.push_back(v);
      }
  }
  if (pool.empty()) return rep;
  std::sort(pool.begin(), pool.end());
  auto degree_sum = [&] {
    int64_t s = 0;
    for (NodeId v : pool) {
      if (eng.color(v) != kNoColor) continue;
      for (NodeId u : g.neighbors(v)) s += member[u] && eng.color(u) == kNoColor;
    }
    return s;
  };
  const int64_t before = eng.colored_count();
  rep.uncolored_degree.push_back(degree_sum());
  const double p = std::min(1.0, st.cfg.open_alpha / 3);
  for (int r = 0; r < st.cfg.r_open; ++r) {
    std::vector<NodeId> active;
    std::vector<Color> cand(eng.n(), kNoColor);
    for (NodeId v : pool) {
      if (eng.color(v) != kNoColor) continue;
      Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "open-cleanup");
      if (!rng.bernoulli(p)) continue;
      int free = 0;
      for (Color c = st.x_of[v] + 1; c <= delta + 1; ++c) free += !eng.known_used(v, c);
      if (free == 0) continue;
      int pick = static_cast<int>(rng.below(static_cast<uint64_t>(free)));
      for (Color c = st.x_of[v] + 1; c <= delta + 1; ++c)
        if (!eng.known_used(v, c) && pick-- == 0) {
          cand[v] = c;
          break;
        }
      active.push_back(v);
    }
    try_color(eng, active, cand, true);
    ++rep.rounds;
    rep.uncolored_degree.push_back(degree_sum());
  }
  rep.colored = eng.colored_count() - before;
  return rep;
}

}  // namespace bcolor
