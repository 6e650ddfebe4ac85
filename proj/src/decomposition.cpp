#include "bcolor/decomposition.hpp"

#include "bcolor/comm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

namespace bcolor {

const char* clique_class_name(CliqueClass c) {
  switch (c) {
    case CliqueClass::Full: return "full";
    case CliqueClass::Open: return "open";
    case CliqueClass::Closed: return "closed";
  }
  return "full";
}

namespace {

constexpr NodeId kBitsetLimit = 16384;
constexpr double kSlack = 1e-9;

}  // namespace

AdjacencyBits::AdjacencyBits(const Graph& g) {
  if (g.n() > kBitsetLimit) return;
  words_ = (static_cast<size_t>(g.n()) + 63) / 64;
  rows_.assign(words_ * g.n(), 0);
  for (NodeId v = 0; v < g.n(); ++v)
    for (NodeId u : g.neighbors(v)) rows_[v * words_ + (u >> 6)] |= 1ULL << (u & 63);
}

int AdjacencyBits::common(NodeId u, NodeId v) const {
  const uint64_t* a = rows_.data() + u * words_;
  const uint64_t* b = rows_.data() + v * words_;
  int c = 0;
  for (size_t i = 0; i < words_; ++i) c += std::popcount(a[i] & b[i]);
  return c;
}

int AdjacencyBits::common_with_set(NodeId v, const uint64_t* set) const {
  const uint64_t* a = rows_.data() + v * words_;
  int c = 0;
  for (size_t i = 0; i < words_; ++i) c += std::popcount(a[i] & set[i]);
  return c;
}

int64_t AdjacencyBits::induced_edges(NodeId v, const Graph& g) const {
  if (!available()) return neighborhood_edges(g, v);
  int64_t twice = 0;
  for (NodeId u : g.neighbors(v)) twice += common(u, v);
  return twice / 2;
}

namespace {

int common_neighbors(const Graph& g, const AdjacencyBits& bits, NodeId u, NodeId v) {
  if (bits.available()) return bits.common(u, v);
  auto a = g.neighbors(u), b = g.neighbors(v);
  int c = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else {
      ++c;
      ++i;
      ++j;
    }
  }
  return c;
}

struct UnionFind {
  std::vector<NodeId> parent;
  explicit UnionFind(NodeId n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  NodeId find(NodeId v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
  void unite(NodeId a, NodeId b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Counts |N(w) ∩ K| for every w touching K. Returns the touched nodes.
std::vector<NodeId> count_into(const Graph& g, const std::vector<NodeId>& members, std::vector<int>& cnt) {
  std::vector<NodeId> touched;
  for (NodeId v : members)
    for (NodeId w : g.neighbors(v)) {
      if (cnt[w]++ == 0) touched.push_back(w);
    }
  return touched;
}

// Peels and extends one candidate until it is stable. Returns false if it must be dropped.
bool refine(const Graph& g, std::vector<NodeId>& members, int id, std::vector<int>& owner, std::vector<int>& cnt,
            double eps) {
  const double delta = g.max_degree();
  const double inner = (1 - eps) * delta - kSlack;
  const double outer = (1 - eps / 2) * delta + kSlack;
  for (int iter = 0; iter < 50; ++iter) {
    auto touched = count_into(g, members, cnt);
    bool changed = false;
    std::vector<NodeId> next;
    for (NodeId v : members) {
      if (cnt[v] >= inner) next.push_back(v);
      else {
        owner[v] = -1;
        changed = true;
      }
    }
    for (NodeId w : touched) {
      if (owner[w] == -1 && cnt[w] > outer) {
        owner[w] = id;
        next.push_back(w);
        changed = true;
      }
    }
    for (NodeId w : touched) cnt[w] = 0;
    std::sort(next.begin(), next.end());
    members.swap(next);
    if (!changed) break;
  }
  if (members.empty()) return false;
  if (static_cast<double>(members.size()) > (1 + eps) * delta + kSlack) return false;
  auto touched = count_into(g, members, cnt);
  bool ok = true;
  for (NodeId v : members)
    if (cnt[v] < inner) ok = false;
  for (NodeId w : touched)
    if (owner[w] != id && cnt[w] > outer) ok = false;
  for (NodeId w : touched) cnt[w] = 0;
  return ok;
}

Decomposition assemble(const Graph& g, std::vector<std::vector<NodeId>> candidates, double eps) {
  const NodeId n = g.n();
  std::vector<int> owner(n, -1), cnt(n, 0);
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (size_t i = 0; i < candidates.size(); ++i)
    for (NodeId v : candidates[i]) owner[v] = static_cast<int>(i);
  std::vector<std::vector<NodeId>> accepted;
  for (size_t i = 0; i < candidates.size(); ++i) {
    auto& members = candidates[i];
    if (!refine(g, members, static_cast<int>(i), owner, cnt, eps)) {
      for (NodeId v : members) owner[v] = -1;
      members.clear();
    }
  }
  for (auto& c : candidates)
    if (!c.empty()) accepted.push_back(c);
  std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

  Decomposition dec;
  dec.clique_of.assign(n, -1);
  for (size_t i = 0; i < accepted.size(); ++i) {
    AlmostClique k;
    k.id = static_cast<int>(i);
    k.members = accepted[i];
    k.leader = k.members.front();
    for (NodeId v : k.members) dec.clique_of[v] = k.id;
    dec.cliques.push_back(std::move(k));
  }
  for (NodeId v = 0; v < n; ++v)
    if (dec.clique_of[v] < 0) dec.sparse.push_back(v);
  fill_stats(g, dec);
  return dec;
}

}  // namespace

Decomposition acd_oracle(const Graph& g, double eps) {
  const NodeId n = g.n();
  const double delta = g.max_degree();
  if (delta == 0) return assemble(g, {}, eps);
  AdjacencyBits bits(g);
  UnionFind uf(n);
  const double heavy = (1 - eps) * delta - kSlack;
  const double overlap = (1 - 2 * eps) * delta - kSlack;
  for (NodeId u = 0; u < n; ++u) {
    if (g.degree(u) < heavy) continue;
    for (NodeId v : g.neighbors(u)) {
      if (v <= u || g.degree(v) < heavy) continue;
      // Closed neighborhoods of adjacent nodes also share u and v themselves.
      if (common_neighbors(g, bits, u, v) + 2 >= overlap) uf.unite(u, v);
    }
  }
  std::map<NodeId, std::vector<NodeId>> comps;
  for (NodeId v = 0; v < n; ++v)
    if (g.degree(v) >= heavy) comps[uf.find(v)].push_back(v);
  std::vector<std::vector<NodeId>> candidates;
  for (auto& [root, members] : comps)
    if (members.size() >= 2) candidates.push_back(std::move(members));
  return assemble(g, std::move(candidates), eps);
}

Decomposition acd_distributed(Engine& eng, double eps, double sample_factor) {
  const Graph& g = eng.graph();
  const NodeId n = g.n();
  const double delta = g.max_degree();
  if (delta == 0) return assemble(g, {}, eps);
  const int idb = eng.log_n();
  const int degb = bits_for(static_cast<uint64_t>(g.max_degree()) + 1);
  const double heavy_at = (1 - eps) * delta - kSlack;
  const double overlap = (1 - 2 * eps) * delta - kSlack;

  // Degrees, so that receivers can scale sampled overlaps.
  std::vector<std::vector<std::pair<NodeId, int>>> nbr_deg(n);
  eng.round(
      nullptr, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(g.degree(c.id)), degb); }, nullptr,
      [&](NodeCtx& c, Inbox& in) {
        in.for_each([&](NodeId u, BitReader& r) { nbr_deg[c.id].emplace_back(u, static_cast<int>(r.get(degb))); });
        std::sort(nbr_deg[c.id].begin(), nbr_deg[c.id].end());
        c.mem.charge(static_cast<int64_t>(nbr_deg[c.id].size()));
      });

  const int samples = static_cast<int>(std::ceil(sample_factor / (eps * eps)));
  auto rate = [&](int d) { return std::min(1.0, static_cast<double>(samples) / (d + 1)); };
  std::vector<std::vector<NodeId>> picked(n);
  for (NodeId v = 0; v < n; ++v) {
    Rng r = derive_rng(eng.options().seed, v, 0, "acd-sample");
    const double q = rate(g.degree(v));
    if (r.bernoulli(q)) picked[v].push_back(v);
    for (NodeId u : g.neighbors(v))
      if (r.bernoulli(q)) picked[v].push_back(u);
  }
  const int per = std::max(1, (payload_budget(eng) - 8) / idb);
  const int rounds = (samples + samples / 2 + per - 1) / per + 1;
  std::vector<std::vector<int>> hits(n);
  for (NodeId v = 0; v < n; ++v) hits[v].assign(g.degree(v), 0);
  // With dense rows the receivers count |picked(u) ∩ N[v]| by word intersection instead of
  // decoding every ID; the messages are still broadcast for the round and bit accounting.
  const AdjacencyBits rows(g);
  std::vector<uint64_t> picked_bits;
  const size_t pw = (static_cast<size_t>(n) + 63) / 64;
  if (rows.available()) {
    picked_bits.assign(pw * n, 0);
    for (NodeId v = 0; v < n; ++v)
      for (NodeId w : picked[v]) picked_bits[v * pw + (w >> 6)] |= 1ULL << (w & 63);
  }
  for (int r = 0; r < rounds; ++r) {
    eng.round(
        nullptr,
        [&](NodeCtx& c, BitWriter& w) {
          const auto& p = picked[c.id];
          const size_t b = std::min(p.size(), static_cast<size_t>(r) * per);
          const size_t e = std::min(p.size(), b + per);
          w.put(e - b, 8);
          for (size_t i = b; i < e; ++i) w.put(static_cast<uint64_t>(p[i]), idb);
        },
        nullptr,
        [&](NodeCtx& c, Inbox& in) {
          auto nb = g.neighbors(c.id);
          if (rows.available()) {
            if (r + 1 == rounds) {
              const NodeId v = c.id;
              for (size_t slot = 0; slot < nb.size(); ++slot) {
                const NodeId u = nb[slot];
                hits[v][slot] = rows.common_with_set(v, picked_bits.data() + u * pw) +
                                static_cast<int>((picked_bits[u * pw + (v >> 6)] >> (v & 63)) & 1ULL);
              }
            }
            c.mem.charge(static_cast<int64_t>(nb.size()));
            return;
          }
          in.for_each([&](NodeId u, BitReader& rd) {
            const auto cnt = rd.get(8);
            const size_t slot = std::lower_bound(nb.begin(), nb.end(), u) - nb.begin();
            for (uint64_t i = 0; i < cnt; ++i) {
              const auto w = static_cast<NodeId>(rd.get(idb));
              if (w == c.id || std::binary_search(nb.begin(), nb.end(), w)) ++hits[c.id][slot];
            }
          });
          c.mem.charge(static_cast<int64_t>(nb.size()));
        });
  }

  std::vector<std::vector<NodeId>> buddies(n);
  for (NodeId v = 0; v < n; ++v) {
    if (g.degree(v) < heavy_at) continue;
    auto nb = g.neighbors(v);
    for (size_t i = 0; i < nb.size(); ++i) {
      const int du = nbr_deg[v][i].second;
      if (du < heavy_at) continue;
      const double est = hits[v][i] / rate(du) + 1;  // v itself is in N[u] but not sampled against N[v]
      if (est >= overlap) buddies[v].push_back(nb[i]);
    }
  }

  // Plurality labels over buddies; ties to the smaller label.
  std::vector<NodeId> label(n, -1);
  for (NodeId v = 0; v < n; ++v)
    if (g.degree(v) >= heavy_at) label[v] = v;
  std::vector<NodeId> heavy_nodes;
  for (NodeId v = 0; v < n; ++v)
    if (label[v] >= 0) heavy_nodes.push_back(v);
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<NodeId> next = label;
    eng.round(
        &heavy_nodes, [&](NodeCtx& c, BitWriter& w) { w.put(static_cast<uint64_t>(label[c.id]), idb); }, &heavy_nodes,
        [&](NodeCtx& c, Inbox& in) {
          std::map<NodeId, int> votes;
          votes[label[c.id]] += 1;
          const auto& bs = buddies[c.id];
          in.for_each([&](NodeId u, BitReader& r) {
            const auto l = static_cast<NodeId>(r.get(idb));
            if (std::binary_search(bs.begin(), bs.end(), u)) votes[l] += 1;
          });
          c.mem.charge(2 * static_cast<int64_t>(votes.size()));
          NodeId best = label[c.id];
          int best_votes = 0;
          for (auto [l, cnt] : votes)
            if (cnt > best_votes) {
              best = l;
              best_votes = cnt;
            }
          next[c.id] = best;
        });
    label.swap(next);
  }
  for (NodeId v : heavy_nodes)
    if (buddies[v].empty()) label[v] = -1;

  // Membership check: leave unless enough neighbors share the label.
  std::vector<NodeId> next = label;
  eng.round(
      &heavy_nodes,
      [&](NodeCtx& c, BitWriter& w) {
        w.put_bit(label[c.id] >= 0);
        if (label[c.id] >= 0) w.put(static_cast<uint64_t>(label[c.id]), idb);
      },
      &heavy_nodes,
      [&](NodeCtx& c, Inbox& in) {
        if (label[c.id] < 0) return;
        int same = 0;
        in.for_each([&](NodeId, BitReader& r) {
          if (r.get_bit() && static_cast<NodeId>(r.get(idb)) == label[c.id]) ++same;
        });
        if (same < heavy_at) next[c.id] = -1;
      });
  label.swap(next);

  std::map<NodeId, std::vector<NodeId>> classes;
  for (NodeId v = 0; v < n; ++v)
    if (label[v] >= 0) classes[label[v]].push_back(v);
  std::vector<std::vector<NodeId>> candidates;
  for (auto& [l, members] : classes)
    if (members.size() >= 2) candidates.push_back(std::move(members));
  return assemble(g, std::move(candidates), eps);
}

CliqueStats clique_stats(const Graph& g, const std::vector<NodeId>& members) {
  CliqueStats s;
  if (members.empty()) return s;
  std::vector<uint8_t> in(g.n(), 0);
  for (NodeId v : members) in[v] = 1;
  int64_t sum_e = 0, sum_a = 0;
  const int size = static_cast<int>(members.size());
  for (NodeId v : members) {
    int inside = 0;
    for (NodeId u : g.neighbors(v)) inside += in[u];
    s.ext.push_back(g.degree(v) - inside);
    s.anti.push_back(size - 1 - inside);
    sum_e += s.ext.back();
    sum_a += s.anti.back();
  }
  s.e_bar = Rational(sum_e, size);
  s.a_bar = Rational(sum_a, size);
  return s;
}

void fill_stats(const Graph& g, Decomposition& dec) {
  const NodeId n = g.n();
  dec.ext.assign(n, 0);
  dec.anti.assign(n, 0);
  for (auto& k : dec.cliques) {
    auto s = clique_stats(g, k.members);
    k.e_bar = s.e_bar;
    k.a_bar = s.a_bar;
    for (size_t i = 0; i < k.members.size(); ++i) {
      dec.ext[k.members[i]] = s.ext[i];
      dec.anti[k.members[i]] = s.anti[i];
    }
  }
}

namespace {

double to_double(const Rational& r) { return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator()); }

int64_t floor_times(double factor, const Rational& r) {
  const long double v = static_cast<long double>(factor) * r.numerator() / r.denominator();
  return static_cast<int64_t>(std::floor(v + 1e-12L));
}

}  // namespace

Reservation classify_and_reserve(const Rational& e_bar, const Rational& a_bar, int ell, int delta, const Config& cfg) {
  Reservation r;
  if (a_bar + e_bar < Rational(ell)) {
    r.cls = CliqueClass::Full;
    r.x = static_cast<int>(std::floor(cfg.full_reserve * ell + 1e-12));
  } else if (a_bar * 2 < e_bar) {
    r.cls = CliqueClass::Open;
    r.x = static_cast<int>(floor_times(cfg.open_reserve, e_bar));
  } else {
    r.cls = CliqueClass::Closed;
    r.x = static_cast<int>(floor_times(cfg.closed_reserve, a_bar));
  }
  if (r.x >= delta + 1)
    throw ParameterError(r.cls == CliqueClass::Full ? "full_reserve"
                         : r.cls == CliqueClass::Open ? "open_reserve"
                                                      : "closed_reserve",
                         "reserved prefix " + std::to_string(r.x) + " leaves no color in [Delta+1] = [" +
                             std::to_string(delta + 1) + "]");
  return r;
}

std::vector<NodeId> find_outliers(const AlmostClique& k, const Decomposition& dec, double outlier_factor) {
  std::vector<NodeId> out;
  const double e_cut = outlier_factor * to_double(k.e_bar);
  const double a_cut = outlier_factor * to_double(k.a_bar);
  for (NodeId v : k.members) {
    const bool by_ext = k.e_bar > 0 && dec.ext[v] >= e_cut - kSlack;
    const bool by_anti = k.a_bar > 0 && dec.anti[v] >= a_cut - kSlack;
    if (by_ext || by_anti) out.push_back(v);
  }
  return out;
}

AcdReport validate_acd(const Graph& g, const Decomposition& dec, double eps, double c_sp) {
  AcdReport rep;
  const NodeId n = g.n();
  const double delta = g.max_degree();
  auto flag = [&](const char* clause, NodeId v, int k, std::string detail) {
    rep.violations.push_back({clause, v, k, std::move(detail)});
  };

  std::vector<int> seen(n, 0);
  for (NodeId v : dec.sparse) ++seen[v];
  for (const auto& k : dec.cliques)
    for (NodeId v : k.members) ++seen[v];
  for (NodeId v = 0; v < n; ++v)
    if (seen[v] != 1) flag("partition", v, -1, "node appears " + std::to_string(seen[v]) + " times");
  if (static_cast<NodeId>(dec.clique_of.size()) != n) flag("partition", -1, -1, "clique_of has the wrong length");

  std::vector<int> cnt(n, 0);
  for (const auto& k : dec.cliques) {
    if (static_cast<double>(k.members.size()) > (1 + eps) * delta + kSlack)
      flag("size", -1, k.id, std::to_string(k.members.size()) + " members");
    auto touched = count_into(g, k.members, cnt);
    for (NodeId v : k.members)
      if (cnt[v] < (1 - eps) * delta - kSlack)
        flag("inner", v, k.id, std::to_string(cnt[v]) + " neighbors inside");
    for (NodeId w : touched)
      if (dec.clique_of[w] != k.id && cnt[w] > (1 - eps / 2) * delta + kSlack)
        flag("outer", w, k.id, std::to_string(cnt[w]) + " neighbors inside");
    for (NodeId w : touched) cnt[w] = 0;
  }

  if (delta == 0) return rep;
  AdjacencyBits bits(g);
  const int64_t pairs = static_cast<int64_t>(delta) * (static_cast<int64_t>(delta) - 1) / 2;
  // sparsity(v) = (pairs - m(N(v))) / Delta, compared without division.
  for (NodeId v : dec.sparse) {
    const double missing = static_cast<double>(pairs - bits.induced_edges(v, g));
    if (missing < c_sp * eps * eps * delta * delta - kSlack)
      flag("sparse", v, -1, "sparsity " + std::to_string(missing / delta));
  }
  for (const auto& k : dec.cliques)
    for (NodeId v : k.members) {
      // zero external degree passes trivially
      if (dec.ext[v] == 0) {
        rep.ext_sparse_ok.push_back(1);
        continue;
      }
      const double missing = static_cast<double>(pairs - bits.induced_edges(v, g));
      const bool ok = missing >= eps / 2 * dec.ext[v] * delta - kSlack;
      rep.ext_sparse_ok.push_back(ok ? 1 : 0);
      if (!ok) flag("ext-sparsity", v, k.id, "sparsity " + std::to_string(missing / delta));
    }
  return rep;
}

nlohmann::json decomposition_json(const Decomposition& dec) {
  nlohmann::json j;
  j["sparse"] = dec.sparse;
  j["cliques"] = nlohmann::json::array();
  for (const auto& k : dec.cliques) {
    nlohmann::json c{{"id", k.id},
                     {"leader", k.leader},
                     {"size", k.members.size()},
                     {"members", k.members},
                     {"e_bar", to_double(k.e_bar)},
                     {"a_bar", to_double(k.a_bar)},
                     {"class", clique_class_name(k.cls)},
                     {"x", k.x},
                     {"outliers", k.outliers},
                     {"putaside", k.putaside},
                     {"matching", k.matching.size()},
                     {"demoted", k.demoted}};
    if (k.demoted) c["demote_reason"] = k.demote_reason;
    j["cliques"].push_back(std::move(c));
  }
  return j;
}

}  // namespace bcolor
