#pragma once

#include "bcolor/config.hpp"
#include "bcolor/engine.hpp"
#include "bcolor/graph.hpp"
#include "bcolor/multitrial.hpp"
#include "bcolor/sct.hpp"
#include "bcolor/state.hpp"
#include "bcolor/streaming.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace bcolor {

struct RunConfig {
  std::string graph;        // generator spec ("planted:n=4096,k=2,s=1800") or edge-list path
  uint64_t graph_seed = 0;  // 0 reuses the master seed
  Config cfg;
  std::string out;

  // Fields: graph, graph_seed, preset, out, plus any Config field as an override.
  static RunConfig from_json(const nlohmann::json& j);
};
void to_json(nlohmann::json& j, const RunConfig& rc);

// Edge-list file when `spec` names an existing file, generator spec otherwise.
Graph load_graph(const std::string& spec, uint64_t seed);

struct VerifyResult {
  bool proper = true;
  bool total = true;
  bool in_range = true;
  int64_t conflict_count = 0;
  std::vector<std::pair<NodeId, NodeId>> conflicts;  // first 32
  int64_t uncolored = 0;
  int64_t out_of_range = 0;
  bool ok() const { return proper && total && in_range; }
};

// Checks every edge and every color against [Delta+1]; uses nothing but the graph and the colors.
VerifyResult verify_coloring(const Graph& g, const std::vector<Color>& colors);

// Sequential greedy over the uncolored nodes in ID order, smallest free color. Returns the count.
int64_t fallback_greedy(const Graph& g, std::vector<Color>& colors);
int64_t fallback_greedy(Engine& eng);

struct CliqueDiag {
  int id = 0;
  int64_t size = 0;
  std::string cls;
  int x = 0;
  Rational e_bar{0}, a_bar{0};
  int64_t outliers = 0;
  int64_t putaside = 0;
  int64_t matching = 0;
  bool demoted = false;
  std::string demote_reason;
};

struct Validators {
  VerifyResult coloring;
  bool acd_accepted = true;           // the decomposition the run used passed validation
  int64_t acd_violations = 0;
  int64_t palette_violations = 0;     // clique-palette inequality after matching
  int64_t palette_checked = 0;
  bool prefix_timeline_ok = true;
  int64_t prefix_timeline_violations = 0;
  int64_t putaside_cross_edges = 0;
  int64_t bandwidth_faults = 0;
  int64_t memory_faults = 0;
};

struct RunReport {
  std::string graph;
  NodeId n = 0;
  int64_t m = 0;
  int delta = 0;
  nlohmann::json config;
  std::vector<StageMetrics> stages;
  int64_t total_rounds = 0;
  std::vector<Fault> faults;
  std::vector<CliqueDiag> cliques;
  std::vector<SctReport> sct;
  nlohmann::json details;
  bool fallback_fired = false;
  int64_t fallback_count = 0;
  std::string aborted;                // what stopped the pipeline early, empty otherwise
  Validators validators;
  MemoryAudit memory;
  std::vector<Color> coloring;
};

// Members report (ext, anti) up their clique tree and every member learns the totals; a clique
// whose tree misses a member is demoted.
void clique_statistics(PipelineState& st);
// Class, reserved prefix and outliers for every live clique.
void classify(PipelineState& st);
// Inliers try from [x(v)], sparse nodes still uncolored from [Delta+1]; leftovers need fallback.
MultitrialResult inlier_multitrial(PipelineState& st);

// The complete coloring pipeline on one graph. Always returns a proper total coloring; stage
// faults are recorded, and a strict-mode fault aborts the remaining stages before fallback.
RunReport run_pipeline(const Graph& g, const Config& cfg, const std::string& graph_name = "");
RunReport run_pipeline(const RunConfig& rc);

// Report without the coloring; identical inputs give identical bytes whatever the worker count.
nlohmann::json report_json(const RunReport& r);
std::string stage_table(const RunReport& r);
std::string emit_coloring(const std::vector<Color>& colors);
std::vector<Color> parse_coloring(const std::string& text, NodeId n);

struct ChiSquare {
  double statistic = 0;
  double critical = 0;
  int dof = 0;
  bool pass = false;
};
// Bin counts against a uniform expectation at significance alpha.
ChiSquare chi_square_uniform(const std::vector<int64_t>& counts, double alpha);

// Lexicographic rank of a permutation of 0..s-1.
int64_t permutation_rank(const std::vector<int64_t>& perm);

struct PermutationTrial {
  bool bijective = false;
  std::vector<int64_t> pi;  // positions of S in ID order
  bool fell_back = false;
};
// One permutation of s nodes of a 32-clique with C = 2.
PermutationTrial permutation_trial(PermuteVariant variant, int s, uint64_t seed);

struct CompressTrial {
  int64_t leftover = 0;
  int64_t z = 0;
  int64_t message_bits = 0;
  int64_t bandwidth = 0;
  int64_t bandwidth_faults = 0;
  bool proper = true;
};
// compress_try on an n-clique with |S| = s and one shared list of |S| + z colors; `total` pads
// the graph with isolated nodes so that log n follows the padded size.
CompressTrial compress_trial(int n, int s, uint64_t seed, int total = 0);

struct PrefixTrial {
  bool exact = false;
  int levels = 0;          // merge levels above level 0
  int level_bound = 0;
  int levels_needed = 0;   // what the z schedule predicts
  bool size_invariant = true;
  bool failed = false;
};
// Prefix sums over `groups` groups of `size` nodes of a complete graph with random values.
PrefixTrial prefix_trial(int groups, int size, double z0, uint64_t seed);

struct StatSpec {
  std::string property;   // uniform-sampler, constant-sampler, permute-uniformity, compress-try,
                          // prefix-sums, sct-leftover
  int64_t trials = 1000;
  double threshold = 0.95;
  double alpha = 0.001;
  uint64_t seed = 1;
  int threads = 1;
  nlohmann::json params;
  static StatSpec from_json(const nlohmann::json& j);
};

struct StatResult {
  std::string property;
  int64_t trials = 0;
  int64_t successes = 0;
  double rate = 0;
  bool pass = false;
  nlohmann::json detail;
};

// Runs independent trials over derived seeds, concurrently, and returns counts and a verdict.
StatResult stat_driver(const StatSpec& spec);
nlohmann::json stat_json(const StatResult& r);

// Runs fn(i) for i in [0, count) on up to `threads` workers; results must be stored by index.
void parallel_trials(int64_t count, int threads, const std::function<void(int64_t)>& fn);

}  // namespace bcolor
