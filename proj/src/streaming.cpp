#include "bcolor/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace bcolor {

namespace {

int64_t groups_per_step(double z) {
  const double s = std::floor(std::sqrt(z));
  return s >= 4e18 ? INT64_MAX / 4 : std::max<int64_t>(2, static_cast<int64_t>(s));
}

}  // namespace

int prefix_levels_needed(int64_t k, double z0) {
  int64_t g = std::max<int64_t>(1, static_cast<int64_t>(std::floor(z0)));
  int levels = 1;
  double z = z0 * z0;
  while (g < k) {
    g *= groups_per_step(z);
    z = std::pow(z, 1.5);
    ++levels;
  }
  return levels;
}

int prefix_level_bound(int64_t k, double z0) {
  const double z1 = std::max(2.0, z0 * z0);
  const double inner = std::log(std::max(1.0, static_cast<double>(k) * z0)) / std::log(z1);
  const double outer = inner > 1 ? std::ceil(std::log(inner) / std::log(1.5) - 1e-12) : 0;
  return static_cast<int>(outer) + 2;
}

PrefixResult prefix_sums(Engine& eng, const std::vector<int>& job, const std::vector<int>& index,
                         const std::vector<int>& k_of_job, const std::vector<std::vector<int64_t>>& y, double z0,
                         int value_bits) {
  const NodeId n = eng.n();
  const int jobs = static_cast<int>(k_of_job.size());
  PrefixResult res;
  res.prefix.assign(n, -1);
  res.total.assign(n, -1);
  const int64_t start = eng.round();
  std::vector<NodeId> part;
  for (NodeId v = 0; v < n; ++v)
    if (job[v] >= 0 && index[v] >= 0) part.push_back(v);
  int64_t kmax = 1;
  for (int k : k_of_job) kmax = std::max<int64_t>(kmax, k);
  res.ledger.level_bound = prefix_level_bound(kmax, z0);
  if (part.empty()) return res;

  std::vector<uint8_t> job_failed(jobs, 0);
  const int64_t g0 = std::max<int64_t>(1, static_cast<int64_t>(std::floor(z0)));
  const int ib = std::max(1, bits_for(static_cast<uint64_t>(kmax)));
  std::vector<int64_t>& prefix = res.prefix;
  std::vector<int64_t>& total = res.total;

  auto node_counts = [&](int64_t groups_per_block) {
    std::map<std::pair<int, int64_t>, int64_t> sizes;
    for (NodeId v : part) ++sizes[{job[v], index[v] / groups_per_block}];
    return sizes;
  };
  auto record_level = [&](int level, double z, int64_t gpb) {
    PrefixLevel pl;
    pl.level = level;
    pl.z = z;
    pl.groups_per_block = gpb;
    auto sizes = node_counts(gpb);
    pl.blocks = static_cast<int64_t>(sizes.size());
    pl.min_block_size = INT64_MAX;
    for (const auto& [key, size] : sizes) {
      const int64_t k = k_of_job[key.first];
      const bool full = (key.second + 1) * gpb <= k;
      if (!full && sizes.size() > 1) continue;
      pl.min_block_size = std::min(pl.min_block_size, size);
      if (full && static_cast<double>(size) < z) res.ledger.size_invariant = false;
    }
    if (pl.min_block_size == INT64_MAX) pl.min_block_size = 0;
    res.ledger.levels.push_back(pl);
    return res.ledger.levels.size() - 1;
  };

  // Spanning groups themselves.
  record_level(0, z0, 1);

  // First merge: runs of g0 groups, every member hears every value of its run.
  eng.round(
      &part,
      [&](NodeCtx& c, BitWriter& w) {
        w.put(static_cast<uint64_t>(index[c.id]), ib);
        w.put(static_cast<uint64_t>(y[job[c.id]][index[c.id]]), value_bits);
      },
      &part,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        const int64_t block = index[v] / g0;
        thread_local std::vector<uint8_t> seen;
        seen.assign(static_cast<size_t>(g0), 0);
        c.mem.charge(g0 / 64 + 3);
        int64_t p = 0, t = 0;
        seen[index[v] % g0] = 1;
        t += y[job[v]][index[v]];
        in.for_each([&](NodeId u, BitReader& r) {
          const auto j = static_cast<int64_t>(r.get(ib));
          const auto val = static_cast<int64_t>(r.get(value_bits));
          if (job[u] != job[v] || j / g0 != block || seen[j % g0]) return;
          seen[j % g0] = 1;
          t += val;
          if (j < index[v]) p += val;
        });
        prefix[v] = p;
        total[v] = t;
      });
  record_level(1, z0 * z0, g0);

  int64_t gpb = g0;
  double z = z0 * z0;
  int level = 1;
  while (gpb < kmax) {
    ++level;
    const int64_t m = groups_per_step(z);
    auto blocks_of = [&](int j) { return (k_of_job[j] + gpb - 1) / gpb; };
    int64_t max_blocks = 1;
    for (int j = 0; j < jobs; ++j) max_blocks = std::max(max_blocks, blocks_of(j));
    const int bb = std::max(1, bits_for(static_cast<uint64_t>(max_blocks)));
    std::vector<int64_t> rep(n, -1), heard(n, -1);
    GroupTrees chiefs;
    std::map<std::tuple<int, int64_t, int64_t>, int> rid;
    int resamples = 0;
    for (int attempt = 0; attempt < 2; ++attempt) {
      rid.clear();
      std::vector<int> rgroup(n, -1);
      for (NodeId v : part) {
        if (job_failed[job[v]]) continue;
        const int64_t b = index[v] / gpb;
        const int64_t super = b / m;
        const int64_t m_eff = std::min(m, blocks_of(job[v]) - super * m);
        Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, "prefix-representative");
        rep[v] = static_cast<int64_t>(rng.below(static_cast<uint64_t>(m_eff)));
        auto key = std::make_tuple(job[v], b, rep[v]);
        auto [it, fresh] = rid.try_emplace(key, static_cast<int>(rid.size()));
        rgroup[v] = it->second;
      }
      // Every member repeats its block total; a representative keeps only its assigned sibling.
      std::fill(heard.begin(), heard.end(), -1);
      eng.round(
          &part,
          [&](NodeCtx& c, BitWriter& w) {
            w.put(static_cast<uint64_t>(index[c.id] / gpb), bb);
            w.put(static_cast<uint64_t>(total[c.id]), value_bits);
          },
          &part,
          [&](NodeCtx& c, Inbox& in) {
            const NodeId v = c.id;
            if (rep[v] < 0) return;
            const int64_t b = index[v] / gpb;
            const int64_t target = (b / m) * m + rep[v];
            c.mem.charge(2);
            if (target == b) {
              heard[v] = total[v];
              return;
            }
            in.for_each([&](NodeId u, BitReader& r) {
              const auto ub = static_cast<int64_t>(r.get(bb));
              const auto val = static_cast<int64_t>(r.get(value_bits));
              if (job[u] == job[v] && ub == target) heard[v] = val;
            });
          });
      chiefs = build_group_trees(eng, rgroup, static_cast<int>(rid.size()), LeaderRule::MinId, false);
      // Every sibling slot of every block needs a reachable class.
      std::vector<uint8_t> bad_job(jobs, 0);
      for (int g : chiefs.unreachable)
        for (const auto& [key, id] : rid)
          if (id == g) bad_job[std::get<0>(key)] = 1;
      for (int j = 0; j < jobs; ++j) {
        if (job_failed[j]) continue;
        for (int64_t b = 0; b < blocks_of(j); ++b) {
          const int64_t super = b / m;
          const int64_t m_eff = std::min(m, blocks_of(j) - super * m);
          for (int64_t r = 0; r < m_eff; ++r)
            if (!rid.count({j, b, r})) bad_job[j] = 1;
        }
      }
      const bool any_bad = std::any_of(bad_job.begin(), bad_job.end(), [](uint8_t b) { return b != 0; });
      if (!any_bad) break;
      if (attempt == 0) {
        ++resamples;
        continue;
      }
      for (int j = 0; j < jobs; ++j)
        if (bad_job[j]) {
          job_failed[j] = 1;
          eng.record_fault({Fault::Kind::Prefix, "", -1, 0, j, "representative class empty or not within two hops"});
        }
    }

    std::map<std::pair<int, int64_t>, int> bid;
    std::vector<int> bgroup(n, -1);
    for (NodeId v : part) {
      if (job_failed[job[v]]) continue;
      auto [it, fresh] = bid.try_emplace({job[v], index[v] / gpb}, static_cast<int>(bid.size()));
      bgroup[v] = it->second;
    }
    GroupTrees blocks = build_group_trees(eng, bgroup, static_cast<int>(bid.size()), LeaderRule::MinId, false);
    std::vector<int64_t> vals(static_cast<size_t>(n) * 2, 0);
    for (NodeId v : part) {
      if (bgroup[v] < 0 || chiefs.group[v] < 0 || chiefs.leader[chiefs.group[v]] != v) continue;
      if (heard[v] < 0) {
        eng.record_fault({Fault::Kind::Delivery, "", v, 0, job[v], "representative missed its sibling total"});
        continue;
      }
      const int64_t b = index[v] / gpb;
      const int64_t sibling = (b / m) * m + rep[v];
      vals[static_cast<size_t>(v) * 2] = sibling < b ? heard[v] : 0;
      vals[static_cast<size_t>(v) * 2 + 1] = heard[v];
    }
    auto sums = aggregate_sum(eng, blocks, vals, 2, value_bits, true);
    for (NodeId v : part) {
      if (bgroup[v] < 0) continue;
      prefix[v] += sums[static_cast<size_t>(bgroup[v]) * 2];
      total[v] = sums[static_cast<size_t>(bgroup[v]) * 2 + 1];
    }
    gpb = gpb > INT64_MAX / m ? INT64_MAX / 2 : gpb * m;
    z = std::pow(z, 1.5);
    const size_t li = record_level(level, z, gpb);
    res.ledger.levels[li].resamples = resamples;
  }

  // Exactness against the direct computation.
  std::vector<std::vector<int64_t>> before(jobs);
  for (int j = 0; j < jobs; ++j) {
    before[j].assign(k_of_job[j] + 1, 0);
    for (int i = 0; i < k_of_job[j]; ++i) before[j][i + 1] = before[j][i] + y[j][i];
  }
  for (NodeId v : part) {
    if (job_failed[job[v]]) continue;
    if (prefix[v] != before[job[v]][index[v]] || total[v] != before[job[v]][k_of_job[job[v]]]) {
      job_failed[job[v]] = 1;
      eng.record_fault({Fault::Kind::Prefix, "", v, 0, prefix[v], "prefix sum differs from direct sum"});
    }
  }
  for (int j = 0; j < jobs; ++j)
    if (job_failed[j]) res.failed_jobs.push_back(j);
  if (static_cast<int>(res.ledger.levels.size()) - 1 > res.ledger.level_bound)
    eng.record_fault({Fault::Kind::Prefix, "", -1, 0, static_cast<int64_t>(res.ledger.levels.size()) - 1,
                      "more merge levels than the schedule allows"});
  res.rounds = eng.round() - start;
  return res;
}

std::vector<Color> nth_color_of_palette(Engine& eng, const std::vector<int>& job, const std::vector<int>& bucket,
                                        int k, const std::vector<uint64_t>& range_used,
                                        const std::vector<int>& x_of_job, const std::vector<int64_t>& query,
                                        double z0) {
  const NodeId n = eng.n();
  const int delta = eng.graph().max_degree();
  const int jobs = static_cast<int>(x_of_job.size());
  auto lo_of = [&](int i) { return static_cast<Color>(static_cast<int64_t>(i) * (delta + 1) / k + 1); };
  auto hi_of = [&](int i) { return static_cast<Color>(static_cast<int64_t>(i + 1) * (delta + 1) / k); };
  auto free_in = [&](NodeId v) {
    const int i = bucket[v];
    const int x = x_of_job[job[v]];
    int64_t f = 0;
    for (Color c = lo_of(i); c <= hi_of(i); ++c)
      if (c > x && !((range_used[v] >> (c - lo_of(i))) & 1ULL)) ++f;
    return f;
  };

  // Free counts per range, taken from the smallest member of each bucket.
  std::vector<std::vector<int64_t>> y(jobs, std::vector<int64_t>(k, 0));
  std::vector<std::vector<NodeId>> source(jobs, std::vector<NodeId>(k, -1));
  for (NodeId v = 0; v < n; ++v) {
    if (job[v] < 0 || bucket[v] < 0) continue;
    auto& s = source[job[v]][bucket[v]];
    if (s < 0) {
      s = v;
      y[job[v]][bucket[v]] = free_in(v);
    } else if (free_in(v) != y[job[v]][bucket[v]]) {
      eng.record_fault({Fault::Kind::Contract, "", v, 0, bucket[v], "bucket members disagree on their palette range"});
    }
  }
  const int cb = eng.color_bits();
  if (hi_of(0) - lo_of(0) + 1 > 64) throw std::logic_error("palette range wider than one word");
  auto pre = prefix_sums(eng, job, bucket, std::vector<int>(jobs, k), y, z0, cb);

  std::vector<NodeId> senders, listeners;
  for (NodeId v = 0; v < n; ++v) {
    if (job[v] < 0) continue;
    if (bucket[v] >= 0) senders.push_back(v);
    if (query[v] > 0) listeners.push_back(v);
  }
  const int ib = std::max(1, bits_for(static_cast<uint64_t>(k)));
  std::vector<Color> out(n, kNoColor);
  std::vector<uint8_t> bad(n, 0);
  eng.round(
      &senders,
      [&](NodeCtx& c, BitWriter& w) {
        const NodeId v = c.id;
        w.put(static_cast<uint64_t>(bucket[v]), ib);
        w.put(static_cast<uint64_t>(std::max<int64_t>(0, pre.prefix[v])), cb);
        w.put(range_used[v], hi_of(bucket[v]) - lo_of(bucket[v]) + 1);
      },
      &listeners,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        const int x = x_of_job[job[v]];
        const int64_t q = query[v];
        c.mem.charge(3);
        in.for_each([&](NodeId u, BitReader& r) {
          const int i = static_cast<int>(r.get(ib));
          const auto before = static_cast<int64_t>(r.get(cb));
          const uint64_t used = r.get(hi_of(i) - lo_of(i) + 1);
          if (job[u] != job[v] || out[v] != kNoColor || q <= before) return;
          int64_t seen = before;
          for (Color col = lo_of(i); col <= hi_of(i); ++col) {
            if (col <= x || ((used >> (col - lo_of(i))) & 1ULL)) continue;
            if (++seen == q) {
              out[v] = col;
              return;
            }
          }
        });
        if (out[v] == kNoColor) bad[v] = 1;
      });
  for (NodeId v : listeners)
    if (bad[v])
      eng.record_fault({Fault::Kind::Contract, "", v, 0, query[v], "palette index beyond the free colors of the clique"});
  return out;
}

MemoryAudit memory_audit(const Engine& eng) {
  MemoryAudit a;
  a.budget = eng.memory_budget_words();
  std::vector<std::pair<std::string, int64_t>> all;
  for (const auto& s : eng.stages()) {
    all.emplace_back(s.stage, s.peak_words);
    a.peak = std::max(a.peak, s.peak_words);
  }
  for (const auto& f : eng.faults())
    if (f.kind == Fault::Kind::Memory) ++a.memory_faults;
  a.ok = a.peak <= a.budget && a.memory_faults == 0;
  std::stable_sort(all.begin(), all.end(), [](const auto& l, const auto& r) { return l.second > r.second; });
  if (all.size() > 10) all.resize(10);
  a.top = std::move(all);
  return a;
}

nlohmann::json memory_audit_json(const MemoryAudit& a) {
  nlohmann::json j;
  j["budget_words"] = a.budget;
  j["peak_words"] = a.peak;
  j["ok"] = a.ok;
  j["memory_faults"] = a.memory_faults;
  j["top_stages"] = nlohmann::json::array();
  for (const auto& [stage, words] : a.top) j["top_stages"].push_back({{"stage", stage}, {"peak_words", words}});
  return j;
}

}  // namespace bcolor
