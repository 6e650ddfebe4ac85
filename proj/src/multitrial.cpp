#include "bcolor/multitrial.hpp"

#include <algorithm>

namespace bcolor {

int ColorList::size(int delta) const {
  switch (kind) {
    case Kind::Prefix: return std::clamp(x, 0, delta + 1);
    case Kind::Full: return delta + 1;
    case Kind::Suffix: return delta + 1 - std::clamp(x, 0, delta + 1);
  }
  return 0;
}

bool ColorList::contains(Color c, int delta) const {
  if (c < 1 || c > delta + 1) return false;
  switch (kind) {
    case Kind::Prefix: return c <= x;
    case Kind::Full: return true;
    case Kind::Suffix: return c > x;
  }
  return false;
}

Color ColorList::at(int i, int delta) const {
  (void)delta;
  return kind == Kind::Suffix ? x + 1 + i : 1 + i;
}

void ColorList::encode(BitWriter& w, int color_bits) const {
  w.put(static_cast<uint64_t>(kind), 2);
  if (kind != Kind::Full) w.put(static_cast<uint64_t>(x), color_bits);
}

ColorList ColorList::decode(BitReader& r, int color_bits) {
  ColorList l;
  l.kind = static_cast<Kind>(r.get(2));
  if (l.kind != Kind::Full) l.x = static_cast<int>(r.get(color_bits));
  return l;
}

std::vector<Color> expand_seed(uint64_t seed, const ColorList& list, int t, int delta) {
  const int size = list.size(delta);
  if (size <= 0) throw FaultError({Fault::Kind::Contract, "", -1, 0, 0, "seed expansion over an empty list"});
  const auto bound = static_cast<uint64_t>(size);
  const uint64_t limit = bound * (UINT64_MAX / bound);
  std::vector<Color> out;
  out.reserve(std::max(t, 0));
  uint64_t counter = 0;
  const uint64_t key = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (int i = 0; i < t; ++i) {
    uint64_t r;
    do r = mix64(key + 0x9e3779b97f4a7c15ULL * ++counter);
    while (r >= limit);
    out.push_back(list.at(static_cast<int>(r % bound), delta));
  }
  return out;
}

int free_in_list(const Engine& eng, NodeId v, const ColorList& list) {
  const int delta = eng.graph().max_degree();
  const int size = list.size(delta);
  int free = 0;
  for (int i = 0; i < size; ++i)
    if (!eng.known_used(v, list.at(i, delta))) ++free;
  return free;
}

MultitrialResult multitrial(Engine& eng, std::vector<NodeId> active, const std::vector<ColorList>& lists,
                            const MultitrialOptions& opt) {
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  const int delta = g.max_degree();
  const int cb = eng.color_bits();
  const int t_max = std::max(1, opt.t_max);
  const int t_bits = bits_for(static_cast<uint64_t>(t_max) + 1);
  const uint64_t seed_mask = opt.seed_bits >= 64 ? UINT64_MAX : (uint64_t{1} << opt.seed_bits) - 1;
  const int64_t blocked_words = (static_cast<int64_t>(delta) + 1 + eng.log_n() - 1) / eng.log_n();

  MultitrialResult res;
  res.colored_iteration.assign(n, 0);
  std::erase_if(active, [&](NodeId v) { return eng.color(v) != kNoColor; });
  std::sort(active.begin(), active.end());

  std::vector<uint8_t> is_active(n, 0), multi(n, 0), mismatch(n, 0);
  std::vector<uint64_t> seed(n, 0);
  std::vector<int> tcount(n, 0);
  std::vector<Color> single(n, kNoColor);
  std::vector<std::vector<Color>> expansion(n);
  std::vector<NodeId> checker(n, -1);

  auto uncolored_degree = [&](NodeId v) {
    int d = 0;
    for (NodeId u : g.neighbors(v)) d += is_active[u];
    return d;
  };
  for (NodeId v : active) is_active[v] = 1;
  for (NodeId v : active) {
    const int d = uncolored_degree(v);
    const int free = free_in_list(eng, v, lists[v]);
    if (free < 2 * d || free < d + opt.ell) ++res.entry_violations;
  }

  int iteration = 0;
  while (!active.empty() && iteration < opt.budget_rounds) {
    ++iteration;
    const int t = std::min<int64_t>(t_max, int64_t{1} << std::min(iteration - 1, 40));
    std::fill(is_active.begin(), is_active.end(), 0);
    for (NodeId v : active) is_active[v] = 1;
    std::vector<NodeId> senders;
    for (NodeId v : active) {
      Rng rng = derive_rng(eng.options().seed, v, eng.round() + 1, opt.tag);
      const int d = uncolored_degree(v);
      const int free = free_in_list(eng, v, lists[v]);
      if (free == 0) continue;
      senders.push_back(v);
      // no active neighbor: one free color always sticks
      multi[v] = d > 0 && free >= 2 * d && free >= d + opt.ell;
      expansion[v].clear();
      if (multi[v]) {
        seed[v] = rng.next() & seed_mask;
        tcount[v] = t;
        expansion[v] = expand_seed(seed[v], lists[v], t, delta);
      } else {
        int pick = static_cast<int>(rng.below(static_cast<uint64_t>(free)));
        const int size = lists[v].size(delta);
        for (int i = 0; i < size; ++i) {
          const Color c = lists[v].at(i, delta);
          if (eng.known_used(v, c)) continue;
          if (pick-- == 0) {
            single[v] = c;
            break;
          }
        }
        expansion[v].assign(1, single[v]);
      }
      auto nb = g.neighbors(v);
      checker[v] = (opt.check_reconstruction && !nb.empty()) ? nb[rng.below(nb.size())] : -1;
    }
    if (senders.empty()) break;
    std::fill(is_active.begin(), is_active.end(), 0);
    for (NodeId v : senders) is_active[v] = 1;

    eng.round(
        &senders,
        [&](NodeCtx& c, BitWriter& w) {
          const NodeId v = c.id;
          w.put_bit(multi[v]);
          if (multi[v]) {
            w.put(seed[v], opt.seed_bits);
            w.put(static_cast<uint64_t>(tcount[v]), t_bits);
            lists[v].encode(w, cb);
          } else {
            w.put(static_cast<uint64_t>(single[v]), cb);
          }
        },
        &senders,
        [&](NodeCtx& c, Inbox& in) {
          const NodeId v = c.id;
          thread_local std::vector<uint64_t> stamp;
          thread_local uint64_t epoch = 0;
          if (stamp.size() < static_cast<size_t>(delta) + 2) stamp.assign(delta + 2, 0);
          ++epoch;
          c.mem.charge(blocked_words + static_cast<int64_t>(expansion[v].size()));
          in.for_each([&](NodeId u, BitReader& r) {
            if (u < v)
              for (Color col : expansion[u]) stamp[col] = epoch;
            if (checker[u] == v) {
              const bool m = r.get_bit();
              std::vector<Color> rebuilt;
              if (m) {
                const uint64_t s = r.get(opt.seed_bits);
                const int tt = static_cast<int>(r.get(t_bits));
                const ColorList l = ColorList::decode(r, cb);
                rebuilt = expand_seed(s, l, tt, delta);
              } else {
                rebuilt.assign(1, static_cast<Color>(r.get(cb)));
              }
              if (rebuilt != expansion[u]) mismatch[u] = 1;
            }
          });
          for (Color col : expansion[v]) {
            if (stamp[col] == epoch || eng.known_used(v, col) || !lists[v].contains(col, delta)) continue;
            eng.set_color(v, col);
            break;
          }
        });
    for (NodeId v : senders)
      if (mismatch[v]) {
        eng.record_fault({Fault::Kind::Contract, "", v, eng.round(), 0, "neighbor could not rebuild the tried colors"});
        mismatch[v] = 0;
      }
    std::vector<NodeId> next;
    for (NodeId v : active) {
      if (eng.color(v) != kNoColor) {
        res.colored_iteration[v] = iteration;
        ++res.colored;
      } else if (free_in_list(eng, v, lists[v]) > 0 || is_active[v]) {
        next.push_back(v);
      } else {
        res.leftover.push_back(v);
      }
    }
    active.swap(next);
  }
  res.iterations = iteration;
  res.leftover.insert(res.leftover.end(), active.begin(), active.end());
  std::sort(res.leftover.begin(), res.leftover.end());
  return res;
}

}  // namespace bcolor
