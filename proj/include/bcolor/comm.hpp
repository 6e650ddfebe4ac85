#pragma once

#include "bcolor/engine.hpp"

#include <cstdint>
#include <vector>

namespace bcolor {

enum class LeaderRule { MinId, MaxId };

// Depth-2 trees rooted at one leader per group. group[v] == -1 means v takes no part.
struct GroupTrees {
  int groups = 0;
  std::vector<int> group;
  std::vector<NodeId> leader;        // per group
  std::vector<int8_t> depth;         // per node: 0 leader, 1, 2, -1 outside or unreachable
  std::vector<NodeId> parent;        // per node, -1 for leaders and outsiders
  std::vector<NodeId> participants;  // sorted members of all groups
  std::vector<int> unreachable;      // groups with a member farther than two hops
  std::vector<int> size;             // per group

  bool ok(int g) const;
};

// Leaders are elected by two rounds of min/max flooding unless leader_known, in which case
// every member already knows its leader (clique IDs). One more round announces depth-1 nodes.
GroupTrees build_group_trees(Engine& eng, std::vector<int> group, int groups, LeaderRule rule, bool leader_known);

// Sums `width` values per participant over each tree. Values live in a flat array indexed
// v * width + j and must fit in value_bits. Returns group * width totals; when down is set
// every member learns them (checked), otherwise only the leader.
std::vector<int64_t> aggregate_sum(Engine& eng, const GroupTrees& trees, const std::vector<int64_t>& values, int width,
                                   int value_bits, bool down);

// Same shape, OR over bit flags.
std::vector<int64_t> aggregate_or(Engine& eng, const GroupTrees& trees, const std::vector<int64_t>& flags, int width,
                                  bool down);

// Collects one item per holder at its group leader. Depth-1 holders are heard directly,
// depth-2 holders are forwarded by their parents. Returns items per group, sorted.
std::vector<std::vector<uint64_t>> gather_to_leader(Engine& eng, const GroupTrees& trees,
                                                    const std::vector<uint8_t>& holds, const std::vector<uint64_t>& item,
                                                    int item_bits);

// Leader of each group pushes an ordered list of values to all members: chunked broadcast
// from the leader, relayed one round later by depth-1 nodes. heard[v] gets the list as v saw it.
struct Dissemination {
  std::vector<std::vector<uint64_t>> heard;  // per node, only filled when keep_lists
  std::vector<int64_t> position;             // per node, index of `key[v]` in its group's list or -1
};
Dissemination disseminate_from_leader(Engine& eng, const GroupTrees& trees, const std::vector<std::vector<uint64_t>>& lists,
                                      int item_bits, const std::vector<int64_t>& key, bool keep_lists);

// Bits left for payload in one broadcast once the presence flag and a possible color
// announcement are paid for.
int payload_budget(const Engine& eng);

}  // namespace bcolor
