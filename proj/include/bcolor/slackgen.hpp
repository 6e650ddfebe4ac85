#pragma once

#include "bcolor/multitrial.hpp"
#include "bcolor/state.hpp"

#include <utility>
#include <vector>

namespace bcolor {

// One round. Node v in `active` tries candidate[v]; it keeps the color unless a smaller-ID
// neighbor tried the same color or a neighbor already holds it. With `strict`, a candidate
// outside v's palette is a contract fault and is not tried.
int64_t try_color(Engine& eng, const std::vector<NodeId>& active, const std::vector<Color>& candidate,
                  bool strict = true);

// Every uncolored node tries, with probability p_s, a uniform color above its reserved prefix.
int64_t slack_generation(PipelineState& st);

struct MatchingReport {
  int clique = -1;
  int64_t size = 0;
  int64_t target = 0;
  int iterations = 0;
  int64_t colored = 0;
  bool shortfall = false;
};

// Colorful matching in closed cliques and in cliques with a_bar >= C log n.
std::vector<MatchingReport> colorful_matching(PipelineState& st);

// Checks distinct colors, same-colored endpoints, non-adjacency and disjointness.
bool matching_valid(const Graph& g, const std::vector<Color>& colors, const AlmostClique& k);

// Members of K for which |Psi(K)| >= |K^| + 1 + e_v - a_v + |M| fails (K^ = uncolored members).
std::vector<NodeId> clique_palette_violations(const PipelineState& st, int k);

// Anti-edges among the given nodes.
std::vector<std::pair<NodeId, NodeId>> anti_edges(const Graph& g, const std::vector<NodeId>& nodes);

// Sum over anti-edges of the colors of D free at both endpoints.
int64_t avail(const Engine& eng, const std::vector<Color>& D, const std::vector<std::pair<NodeId, NodeId>>& F);

struct PutasideReport {
  int waves = 0;
  int64_t rounds = 0;
  std::vector<int> failed;          // cliques that could not build a put-aside set
  int64_t cross_edges = 0;          // edges between put-aside sets of different cliques
};

PutasideReport build_putaside(PipelineState& st);

// Sparse nodes with full lists, outliers with lists above their prefix; inliers wait.
MultitrialResult color_sparse_and_outliers(PipelineState& st);

}  // namespace bcolor
