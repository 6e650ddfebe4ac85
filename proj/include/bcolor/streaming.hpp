#pragma once

#include "bcolor/comm.hpp"
#include "bcolor/engine.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bcolor {

// One merge level of the prefix-sum schedule.
struct PrefixLevel {
  int level = 0;
  double z = 0;                 // lower bound on block size the level should guarantee
  int64_t groups_per_block = 0; // spanning groups merged into one block after this level
  int64_t blocks = 0;
  int64_t min_block_size = 0;   // smallest nonempty block, in nodes
  int resamples = 0;
};

struct GroupLedger {
  std::vector<PrefixLevel> levels;
  bool size_invariant = true;   // every block at level i has >= z_i nodes
  int level_bound = 0;          // ceil(log_{3/2} log_{z_1}(k z_0)) + 2
};

struct PrefixResult {
  std::vector<int64_t> prefix;  // per node: sum of y_j over j < own index, -1 outside
  std::vector<int64_t> total;   // per node: sum over its whole job
  GroupLedger ledger;
  int64_t rounds = 0;
  std::vector<int> failed_jobs;
};

// Streaming prefix sums over spanning groups. job[v] names v's clique (or -1), index[v] its group
// in [0, k_of_job[job]); y[job][i] is known to the members of group i. Level 0 merges runs of z0
// groups in one round; every further level merges floor(sqrt(z_i)) blocks through randomly
// assigned representatives whose chiefs alone report to the block leader.
PrefixResult prefix_sums(Engine& eng, const std::vector<int>& job, const std::vector<int>& index,
                         const std::vector<int>& k_of_job, const std::vector<std::vector<int64_t>>& y, double z0,
                         int value_bits);

// Levels the schedule needs for k groups with the given z0.
int prefix_levels_needed(int64_t k, double z0);
int prefix_level_bound(int64_t k, double z0);

// Each querying node v (query[v] >= 1) learns the query[v]-th color of its clique palette above
// x_of_job[job[v]], without holding the palette. bucket[v] is v's palette range; range_used[v]
// is the bitmap of colors of that range used in the clique, as v learned it. Returns per node
// the color, or kNoColor when the index is out of range (contract fault).
std::vector<Color> nth_color_of_palette(Engine& eng, const std::vector<int>& job, const std::vector<int>& bucket,
                                        int k, const std::vector<uint64_t>& range_used,
                                        const std::vector<int>& x_of_job, const std::vector<int64_t>& query,
                                        double z0);

struct MemoryAudit {
  int64_t budget = 0;
  int64_t peak = 0;
  bool ok = true;
  std::vector<std::pair<std::string, int64_t>> top;  // stage, peak words; at most 10, largest first
  int64_t memory_faults = 0;
};

MemoryAudit memory_audit(const Engine& eng);
nlohmann::json memory_audit_json(const MemoryAudit& a);

}  // namespace bcolor
