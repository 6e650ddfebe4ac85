#pragma once

#include "bcolor/config.hpp"
#include "bcolor/engine.hpp"
#include "bcolor/state.hpp"

#include <cstdint>
#include <vector>

namespace bcolor {

struct ManyToAllResult {
  int64_t rounds = 0;
  int batches = 0;
  int relay_width = 0;          // relayed entries per broadcast after fitting the budget
  int64_t missing = 0;          // (member, entry) pairs still missing at the end
  std::vector<uint8_t> delivered;  // per group
};

// Every member of a group ends up holding every piece sent by the group's senders. pieces[v] is
// empty for non-senders. Send rounds carry (seq, piece); relay rounds carry random held entries
// as (origin, seq, piece). Senders are batched so a batch holds at most capacity entries.
ManyToAllResult many_to_all(Engine& eng, const Config& cfg, const Params& prm, const std::vector<int>& group,
                            int groups, const std::vector<std::vector<uint64_t>>& pieces, int piece_bits);

// Entries one many_to_all batch may carry: m2a_capacity * Delta / log n.
int64_t many_to_all_capacity(const Config& cfg, const Params& prm);

struct CompressTryInput {
  std::vector<int> group;                // per node, -1 outside
  int groups = 0;
  std::vector<uint8_t> in_s;
  std::vector<int> short_id;             // per node of S, injective inside its group
  std::vector<std::vector<Color>> list;  // per node of S, ascending, known to the whole group
  std::vector<int64_t> z;                // per group
  int k = 1;                             // colors sampled per node and instance
  int instances = 1;
};

struct CompressTryResult {
  std::vector<int64_t> leftover;   // per group, in the adopted instance
  std::vector<int> chosen;         // per group, adopted instance
  std::vector<uint8_t> success;    // per group, adopted instance left at most z
  std::vector<uint8_t> delivered;  // per group
  int64_t message_bits = 0;        // largest CompressedTryMsg
  int64_t precondition_failures = 0;
  int64_t colored = 0;
  int64_t rounds = 0;
};

// Each node of S samples k colors of L(v) ∩ Psi(v) per instance, the samples reach the whole
// group through many_to_all, and every member replays the sequential pass in short-ID order. The
// first instance with at most z leftovers is adopted, else the one with the fewest.
CompressTryResult compress_try(Engine& eng, const Config& cfg, const Params& prm, const CompressTryInput& in);

// Replays one instance: in short-ID order each node takes its first sample not taken before.
// samples[i] are the colors of the i-th node in short-ID order. Returns the adopted color per
// position, kNoColor for leftovers.
std::vector<Color> sequential_pass(const std::vector<std::vector<Color>>& samples);

struct ReduceReport {
  int clique = -1;
  bool high_anti = false;       // a_bar >= C log n branch
  int64_t before = 0;
  int64_t after_phase1 = 0;
  int64_t after = 0;
  int64_t bound = 0;            // 2 ceil(C log n / log log n)
  bool within_bound = true;
};

// Shrinks the uncolored part of every put-aside set to O(log n / log log n).
std::vector<ReduceReport> reduce_putaside(PipelineState& st);

struct FinishReport {
  int clique = -1;
  int64_t size = 0;
  int64_t colored = 0;
  int64_t short_lists = 0;      // nodes whose list had fewer than |P|+1 usable colors
};

// Colors the remaining put-aside nodes by a replayed greedy pass over broadcast lists.
std::vector<FinishReport> finish_putaside(PipelineState& st);

}  // namespace bcolor
