#pragma once

#include "bcolor/comm.hpp"
#include "bcolor/config.hpp"
#include "bcolor/state.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bcolor {

// Buckets used for palette ranges and rough permutation buckets: ceil((Delta+1) / floor(C log n)),
// so that every range bitmap fits in floor(C log n) bits.
int bucket_count(const Params& prm);

// Colors of range i (0-based) out of k: [floor(i(Delta+1)/k) + 1, floor((i+1)(Delta+1)/k)].
std::pair<Color, Color> color_range(int i, int k, int delta);

// Every pair u, w of `members` has at least `threshold` common neighbors inside `bucket`.
bool two_hop_connects(const Graph& g, const std::vector<NodeId>& members, const std::vector<NodeId>& bucket,
                      int threshold);

// Bitmap over colors 0..Delta+1 of the colors held by members of a clique.
std::vector<uint64_t> clique_colors(const Engine& eng, const std::vector<NodeId>& members);
inline bool bitmap_has(const std::vector<uint64_t>& b, Color c) { return (b[c >> 6] >> (c & 63)) & 1ULL; }

struct PaletteResult {
  int k = 1;
  std::vector<int> bucket;                  // per node, range it reports, -1 outside
  std::vector<std::vector<uint64_t>> used;  // per node, col(K) as learned
  std::vector<uint64_t> range_used;         // per node, learned bitmap of its own range
  std::vector<int> resampled;               // groups that needed a second bucketing
  std::vector<int> failed;                  // groups whose learned palette is still wrong
};

// All groups learn their clique palette in one round per attempt: each member of bucket i sends
// the colors of range i held by itself and its group neighbors; members OR what they hear.
PaletteResult learn_palette(Engine& eng, const Params& prm, const std::vector<int>& group, int groups);

struct RelabelHooks {
  std::vector<std::pair<NodeId, NodeId>> equal_streams;  // second copies the first's labels
};

struct RelabelResult {
  int x = 0;                     // labels drawn per node
  std::vector<uint64_t> label;   // per node of S, the adopted label
  std::vector<int> index;        // per group, adopted index or -1
  std::vector<int> width;        // per group, label width in bits
  std::vector<int> failed;       // groups where every index collided or members disagreed
  int64_t rounds = 0;
};

// Inside each group T (group[v] >= 0), members of S draw x labels from [|S|^2 ceil(log n)];
// T members report index collisions among their S neighbors, echo the union once, and S adopts
// the smallest clean index.
RelabelResult relabel(Engine& eng, const Params& prm, const std::vector<int>& group, int groups,
                      const std::vector<uint8_t>& in_s, const std::vector<int64_t>& s_count,
                      const RelabelHooks* hooks = nullptr);

struct PermuteHooks {
  std::vector<int> fine_override;  // per node fine bucket, -1 keeps the random one
  bool single_fine = false;        // k' = 1
  RelabelHooks relabel;
};

struct PermuteResult {
  std::vector<int64_t> pi;       // per node of S, 0-based position, -1 otherwise
  std::vector<int> failed;       // clique groups without a permutation
  std::vector<int> fell_back;    // const variant fell back to the rough buckets
  int64_t leftover_nodes = 0;    // nodes ordered by random keys (const variant)
  int64_t preserved = 0, not_preserved = 0;
  int64_t rounds = 0;
};

// Both variants permute S inside every group of `cliques` concurrently.
PermuteResult permute_loglog(Engine& eng, const Params& prm, const Config& cfg, const GroupTrees& cliques,
                             const std::vector<uint8_t>& in_s, const PermuteHooks* hooks = nullptr);
PermuteResult permute_const(Engine& eng, const Params& prm, const Config& cfg, const GroupTrees& cliques,
                            const std::vector<uint8_t>& in_s, const PermuteHooks* hooks = nullptr);
bool use_const_permute(const Config& cfg, const Params& prm);

// For all v in `members`: |N(v) ∩ fine| lies within (1 ± eps2) |N(v) ∩ rough| / kprime.
bool ac_preserved(const Graph& g, const std::vector<NodeId>& members, const std::vector<NodeId>& rough,
                  const std::vector<NodeId>& fine, int kprime, double eps2);
// Every node of `set` sees at least (1 - eps) of the others.
bool ac_like(const Graph& g, const std::vector<NodeId>& set, double eps);

struct SctReport {
  int clique = -1;
  int64_t s_size = 0;
  int64_t palette = 0;          // |Psi(K)|
  int64_t leftover = 0;
  double bound = 0;             // sct_factor * max(sct_ext * e_bar, C log n)
  bool precondition = true;
  bool permuted = true;
};

// learn_palette, permute and one synchronized trial for every live clique.
std::vector<SctReport> synchronized_color_trial(PipelineState& st);

struct OpenCleanupReport {
  int rounds = 0;
  std::vector<int64_t> uncolored_degree;  // sum of uncolored degrees inside open cliques, per round
  int64_t colored = 0;
};

// r_open rounds where uncolored members of open cliques try, with probability alpha / 3, a
// uniform color of their palette above the reserved prefix.
OpenCleanupReport open_cleanup(PipelineState& st);

}  // namespace bcolor
