#include "bcolor/comm.hpp"

#include <algorithm>
#include <stdexcept>

namespace bcolor {

int payload_budget(const Engine& eng) {
  return static_cast<int>(eng.bandwidth_bits()) - 1 - eng.color_bits();
}

bool GroupTrees::ok(int g) const {
  return std::find(unreachable.begin(), unreachable.end(), g) == unreachable.end();
}

GroupTrees build_group_trees(Engine& eng, std::vector<int> group, int groups, LeaderRule rule, bool leader_known) {
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  GroupTrees t;
  t.groups = groups;
  t.group = std::move(group);
  t.depth.assign(n, -1);
  t.parent.assign(n, -1);
  t.leader.assign(groups, -1);
  t.size.assign(groups, 0);
  auto better = [rule](NodeId a, NodeId b) {
    if (a < 0) return b;
    if (b < 0) return a;
    return rule == LeaderRule::MinId ? std::min(a, b) : std::max(a, b);
  };
  for (NodeId v = 0; v < n; ++v) {
    if (t.group[v] < 0) continue;
    t.participants.push_back(v);
    ++t.size[t.group[v]];
    t.leader[t.group[v]] = better(t.leader[t.group[v]], v);
  }

  std::vector<NodeId> best(n, -1);
  if (leader_known) {
    for (NodeId v : t.participants) best[v] = t.leader[t.group[v]];
  } else {
    const int idb = eng.log_n();
    for (NodeId v : t.participants) best[v] = v;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<NodeId> next = best;
      eng.round(
          &t.participants, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(best[c.id]), idb); },
          &t.participants,
          [&](NodeCtx& c, Inbox& in) {
            NodeId b = best[c.id];
            const int mine = t.group[c.id];
            in.for_each([&](NodeId u, BitReader& r) {
              const auto cand = static_cast<NodeId>(r.get(idb));
              if (t.group[u] == mine) b = better(b, cand);
            });
            next[c.id] = b;
          });
      best.swap(next);
    }
  }

  std::vector<uint8_t> bad(groups, 0);
  for (NodeId v : t.participants) {
    const int gv = t.group[v];
    if (best[v] != t.leader[gv]) {
      bad[gv] = 1;
      continue;
    }
    if (v == t.leader[gv]) t.depth[v] = 0;
    else if (g.has_edge(v, t.leader[gv])) t.depth[v] = 1;
  }
  std::vector<NodeId> depth1;
  for (NodeId v : t.participants)
    if (t.depth[v] == 1) depth1.push_back(v);
  eng.round(
      &depth1, [&](NodeCtx&, BitWriter& w) { w.put_bit(true); }, &t.participants,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        if (t.depth[v] >= 0 || bad[t.group[v]]) return;
        NodeId p = -1;
        in.for_each([&](NodeId u, BitReader&) {
          if (t.group[u] == t.group[v] && (p < 0 || u < p)) p = u;
        });
        if (p >= 0) {
          t.parent[v] = p;
          t.depth[v] = 2;
        }
      });
  for (NodeId v : t.participants) {
    if (t.depth[v] == 1) t.parent[v] = t.leader[t.group[v]];
    if (t.depth[v] < 0) bad[t.group[v]] = 1;
  }
  for (int gi = 0; gi < groups; ++gi)
    if (bad[gi] && t.size[gi] > 0) t.unreachable.push_back(gi);
  return t;
}

namespace {

template <class Op>
std::vector<int64_t> aggregate(Engine& eng, const GroupTrees& t, const std::vector<int64_t>& values, int width,
                               int value_bits, bool down, Op op) {
  const NodeId n = eng.n();
  std::vector<int64_t> totals(static_cast<size_t>(t.groups) * width, 0);
  if (width == 0 || t.participants.empty()) return totals;
  const int idb = eng.log_n();
  const int per = std::max(1, (payload_budget(eng) - idb) / std::max(1, value_bits));
  const uint64_t cap = value_bits >= 63 ? INT64_MAX : (uint64_t{1} << value_bits) - 1;
  auto check = [&](int64_t x) {
    if (x < 0 || static_cast<uint64_t>(x) > cap) throw std::logic_error("aggregate value does not fit its field");
  };

  std::vector<NodeId> leaders, depth1, depth2;
  for (NodeId v : t.participants) {
    if (t.depth[v] == 0) leaders.push_back(v);
    else if (t.depth[v] == 1) depth1.push_back(v);
    else if (t.depth[v] == 2) depth2.push_back(v);
  }

  for (int c0 = 0; c0 < width; c0 += per) {
    const int cw = std::min(per, width - c0);
    std::vector<int64_t> partial(static_cast<size_t>(n) * cw, 0);
    for (NodeId v : t.participants)
      for (int j = 0; j < cw; ++j) partial[static_cast<size_t>(v) * cw + j] = values[static_cast<size_t>(v) * width + c0 + j];

    // Depth-2 nodes report to their parents.
    eng.round(
        &depth2,
        [&](NodeCtx& c, BitWriter& w) {
          w.put(static_cast<uint64_t>(t.parent[c.id]), idb);
          for (int j = 0; j < cw; ++j) {
            const int64_t x = partial[static_cast<size_t>(c.id) * cw + j];
            check(x);
            w.put(static_cast<uint64_t>(x), value_bits);
          }
        },
        &depth1,
        [&](NodeCtx& c, Inbox& in) {
          c.mem.charge(cw);
          in.for_each([&](NodeId u, BitReader& r) {
            if (t.group[u] != t.group[c.id]) return;
            if (static_cast<NodeId>(r.get(idb)) != c.id) return;
            for (int j = 0; j < cw; ++j) {
              auto& slot = partial[static_cast<size_t>(c.id) * cw + j];
              slot = op(slot, static_cast<int64_t>(r.get(value_bits)));
            }
          });
        });
    // Depth-1 nodes report to the leader.
    eng.round(
        &depth1,
        [&](NodeCtx& c, BitWriter& w) {
          for (int j = 0; j < cw; ++j) {
            const int64_t x = partial[static_cast<size_t>(c.id) * cw + j];
            check(x);
            w.put(static_cast<uint64_t>(x), value_bits);
          }
        },
        &leaders,
        [&](NodeCtx& c, Inbox& in) {
          c.mem.charge(cw);
          in.for_each([&](NodeId u, BitReader& r) {
            if (t.group[u] != t.group[c.id]) return;
            for (int j = 0; j < cw; ++j) {
              auto& slot = partial[static_cast<size_t>(c.id) * cw + j];
              slot = op(slot, static_cast<int64_t>(r.get(value_bits)));
            }
          });
        });
    for (NodeId l : leaders)
      for (int j = 0; j < cw; ++j)
        totals[static_cast<size_t>(t.group[l]) * width + c0 + j] = partial[static_cast<size_t>(l) * cw + j];
    if (!down) continue;

    std::vector<int64_t> known(static_cast<size_t>(n) * cw, -1);
    for (NodeId l : leaders)
      for (int j = 0; j < cw; ++j) known[static_cast<size_t>(l) * cw + j] = partial[static_cast<size_t>(l) * cw + j];
    auto push = [&](NodeCtx& c, BitWriter& w) {
      for (int j = 0; j < cw; ++j) {
        const int64_t x = known[static_cast<size_t>(c.id) * cw + j];
        check(x);
        w.put(static_cast<uint64_t>(x), value_bits);
      }
    };
    auto pull = [&](NodeCtx& c, Inbox& in) {
      c.mem.charge(cw);
      in.for_each([&](NodeId u, BitReader& r) {
        if (t.group[u] != t.group[c.id] || t.depth[u] >= t.depth[c.id]) return;
        for (int j = 0; j < cw; ++j) known[static_cast<size_t>(c.id) * cw + j] = static_cast<int64_t>(r.get(value_bits));
      });
    };
    eng.round(&leaders, push, &depth1, pull);
    eng.round(&depth1, push, &depth2, pull);
    for (NodeId v : t.participants) {
      if (t.depth[v] < 0) continue;
      for (int j = 0; j < cw; ++j)
        if (known[static_cast<size_t>(v) * cw + j] != totals[static_cast<size_t>(t.group[v]) * width + c0 + j])
          eng.record_fault({Fault::Kind::Delivery, "", v, 0, t.group[v], "aggregate total not received"});
    }
  }
  return totals;
}

}  // namespace

std::vector<int64_t> aggregate_sum(Engine& eng, const GroupTrees& trees, const std::vector<int64_t>& values, int width,
                                   int value_bits, bool down) {
  return aggregate(eng, trees, values, width, value_bits, down, [](int64_t a, int64_t b) { return a + b; });
}

std::vector<int64_t> aggregate_or(Engine& eng, const GroupTrees& trees, const std::vector<int64_t>& flags, int width,
                                  bool down) {
  return aggregate(eng, trees, flags, width, 1, down, [](int64_t a, int64_t b) { return a | b; });
}

std::vector<std::vector<uint64_t>> gather_to_leader(Engine& eng, const GroupTrees& t, const std::vector<uint8_t>& holds,
                                                    const std::vector<uint64_t>& item, int item_bits) {
  const NodeId n = eng.n();
  const int idb = eng.log_n();
  std::vector<std::vector<uint64_t>> out(t.groups);
  std::vector<std::vector<uint64_t>> children(n);
  std::vector<NodeId> holders, leaders, depth1;
  for (NodeId v : t.participants) {
    if (holds[v] && t.depth[v] >= 0) holders.push_back(v);
    if (t.depth[v] == 0) leaders.push_back(v);
    if (t.depth[v] == 1) depth1.push_back(v);
  }
  for (NodeId l : leaders)
    if (holds[l]) out[t.group[l]].push_back(item[l]);

  eng.round(
      &holders,
      [&](NodeCtx& c, BitWriter& w) {
        const bool deep = t.depth[c.id] == 2;
        w.put_bit(deep);
        if (deep) w.put(static_cast<uint64_t>(t.parent[c.id]), idb);
        w.put(item[c.id], item_bits);
      },
      &t.participants,
      [&](NodeCtx& c, Inbox& in) {
        const NodeId v = c.id;
        if (t.depth[v] != 0 && t.depth[v] != 1) return;
        in.for_each([&](NodeId u, BitReader& r) {
          if (t.group[u] != t.group[v]) return;
          const bool deep = r.get_bit();
          const NodeId p = deep ? static_cast<NodeId>(r.get(idb)) : -1;
          const uint64_t it = r.get(item_bits);
          if (t.depth[v] == 0 && !deep) out[t.group[v]].push_back(it);
          if (t.depth[v] == 1 && deep && p == v) children[v].push_back(it);
        });
        c.mem.charge(static_cast<int64_t>(children[v].size()) + 1);
      });

  const int per = std::max(1, (payload_budget(eng) - bits_for(static_cast<uint64_t>(n) + 1)) / std::max(1, item_bits));
  std::vector<size_t> sent(n, 0);
  for (;;) {
    std::vector<NodeId> active;
    for (NodeId v : depth1)
      if (sent[v] < children[v].size()) active.push_back(v);
    if (active.empty()) break;
    eng.round(
        &active,
        [&](NodeCtx& c, BitWriter& w) {
          const auto& ch = children[c.id];
          const size_t cnt = std::min<size_t>(per, ch.size() - sent[c.id]);
          w.put(cnt, bits_for(static_cast<uint64_t>(per) + 1));
          for (size_t j = 0; j < cnt; ++j) w.put(ch[sent[c.id] + j], item_bits);
        },
        &leaders,
        [&](NodeCtx& c, Inbox& in) {
          in.for_each([&](NodeId u, BitReader& r) {
            if (t.group[u] != t.group[c.id]) return;
            const auto cnt = r.get(bits_for(static_cast<uint64_t>(per) + 1));
            for (uint64_t j = 0; j < cnt; ++j) out[t.group[c.id]].push_back(r.get(item_bits));
          });
          c.mem.charge(static_cast<int64_t>(out[t.group[c.id]].size()));
        });
    for (NodeId v : active) sent[v] += std::min<size_t>(per, children[v].size() - sent[v]);
  }
  for (auto& o : out) std::sort(o.begin(), o.end());
  return out;
}

Dissemination disseminate_from_leader(Engine& eng, const GroupTrees& t, const std::vector<std::vector<uint64_t>>& lists,
                                      int item_bits, const std::vector<int64_t>& key, bool keep_lists) {
  const NodeId n = eng.n();
  Dissemination d;
  d.position.assign(n, -1);
  if (keep_lists) d.heard.resize(n);
  size_t longest = 0;
  for (const auto& l : lists) longest = std::max(longest, l.size());
  if (longest == 0) return d;
  const int count_bits = bits_for(longest + 1);
  int per = 0;
  int chunk_bits = 0;
  size_t chunks = longest;
  for (;;) {
    chunk_bits = bits_for(chunks);
    per = (payload_budget(eng) - chunk_bits - count_bits) / std::max(1, item_bits);
    if (per < 1) throw std::logic_error("dissemination item does not fit in one broadcast");
    const size_t need = (longest + per - 1) / per;
    if (bits_for(need) == chunk_bits || need >= chunks) {
      chunks = need;
      break;
    }
    chunks = need;
  }
  chunk_bits = bits_for(chunks);

  std::vector<int64_t> relay(n, -1);  // chunk index a depth-1 node relays next round
  std::vector<int64_t> got(n, 0);
  std::vector<NodeId> leaders, depth1;
  for (NodeId v : t.participants) {
    if (t.depth[v] == 0) leaders.push_back(v);
    if (t.depth[v] == 1) depth1.push_back(v);
  }
  auto chunk_of = [&](int gi, size_t ci, size_t& b, size_t& e) {
    b = std::min(lists[gi].size(), ci * per);
    e = std::min(lists[gi].size(), (ci + 1) * per);
  };
  for (size_t r = 0; r <= chunks; ++r) {
    std::vector<NodeId> senders;
    for (NodeId l : leaders) {
      size_t b, e;
      chunk_of(t.group[l], r, b, e);
      if (r < chunks && b < e) senders.push_back(l);
    }
    for (NodeId v : depth1)
      if (relay[v] >= 0) senders.push_back(v);
    std::sort(senders.begin(), senders.end());
    std::vector<int64_t> next_relay(n, -1);
    eng.round(
        &senders,
        [&](NodeCtx& c, BitWriter& w) {
          const int gi = t.group[c.id];
          const size_t ci = t.depth[c.id] == 0 ? r : static_cast<size_t>(relay[c.id]);
          size_t b, e;
          chunk_of(gi, ci, b, e);
          w.put(ci, chunk_bits);
          w.put(e - b, count_bits);
          for (size_t j = b; j < e; ++j) w.put(lists[gi][j], item_bits);
        },
        &t.participants,
        [&](NodeCtx& c, Inbox& in) {
          const NodeId v = c.id;
          if (t.depth[v] <= 0) return;
          int64_t seen_chunk = -1;
          in.for_each([&](NodeId u, BitReader& r) {
            if (t.group[u] != t.group[v] || t.depth[u] >= t.depth[v]) return;
            const auto ci = static_cast<int64_t>(r.get(chunk_bits));
            if (ci < got[v]) return;  // already have it
            if (ci != got[v]) return;  // chunks arrive in order from each source
            const auto cnt = r.get(count_bits);
            for (uint64_t j = 0; j < cnt; ++j) {
              const uint64_t it = r.get(item_bits);
              if (keep_lists) d.heard[v].push_back(it);
              if (key[v] >= 0 && it == static_cast<uint64_t>(key[v]))
                d.position[v] = static_cast<int64_t>(ci) * per + static_cast<int64_t>(j);
            }
            seen_chunk = ci;
            ++got[v];
          });
          if (keep_lists) c.mem.charge(static_cast<int64_t>(d.heard[v].size()));
          if (t.depth[v] == 1 && seen_chunk >= 0) next_relay[v] = seen_chunk;
        });
    relay.swap(next_relay);
  }
  for (NodeId l : leaders) {
    const auto& lst = lists[t.group[l]];
    if (keep_lists) d.heard[l] = lst;
    for (size_t j = 0; j < lst.size(); ++j)
      if (key[l] >= 0 && lst[j] == static_cast<uint64_t>(key[l])) d.position[l] = static_cast<int64_t>(j);
  }
  for (NodeId v : t.participants) {
    if (t.depth[v] <= 0) continue;
    const size_t expect = (lists[t.group[v]].size() + per - 1) / per;
    if (static_cast<size_t>(got[v]) != expect)
      eng.record_fault({Fault::Kind::Delivery, "", v, 0, got[v], "leader list incomplete"});
  }
  return d;
}

}  // namespace bcolor
