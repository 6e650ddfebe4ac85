#pragma once

#include "bcolor/config.hpp"
#include "bcolor/engine.hpp"
#include "bcolor/graph.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace bcolor {

enum class CliqueClass { Full, Open, Closed };
const char* clique_class_name(CliqueClass c);

struct MatchedPair {
  NodeId u = -1, v = -1;
  Color color = kNoColor;
};

struct AlmostClique {
  int id = 0;
  NodeId leader = -1;            // smallest member ID
  std::vector<NodeId> members;   // sorted
  Rational e_bar{0}, a_bar{0};
  CliqueClass cls = CliqueClass::Full;
  int x = 0;
  std::vector<NodeId> outliers;  // sorted
  std::vector<NodeId> putaside;  // sorted, full cliques only
  std::vector<MatchedPair> matching;
  bool demoted = false;
  std::string demote_reason;
};

struct Decomposition {
  std::vector<NodeId> sparse;
  std::vector<AlmostClique> cliques;
  std::vector<int> clique_of;  // per node, -1 for sparse nodes
  std::vector<int> ext;        // per node |N(v) \ K|, 0 for sparse nodes
  std::vector<int> anti;       // per node |K \ N[v]|
};

// Centralized decomposition. Buddies are adjacent nodes of degree >= (1-eps)Delta whose closed
// neighborhoods share >= (1-2eps)Delta nodes; buddy components are refined until they meet the
// inner/outer/size conditions or are dropped.
Decomposition acd_oracle(const Graph& g, double eps);

// Distributed variant run in the engine: neighbor-ID sampling, overlap estimation, plurality
// labels, one membership check round. Invalid candidates are dropped centrally afterwards.
Decomposition acd_distributed(Engine& eng, double eps, double sample_factor);

struct CliqueStats {
  Rational e_bar{0}, a_bar{0};
  std::vector<int> ext, anti;  // aligned with the member list
};
CliqueStats clique_stats(const Graph& g, const std::vector<NodeId>& members);

// Fills e_bar, a_bar and the per-node ext/anti arrays for every clique, directly.
void fill_stats(const Graph& g, Decomposition& dec);

struct Reservation {
  CliqueClass cls = CliqueClass::Full;
  int x = 0;
};
// Throws ParameterError when the reserved prefix would swallow the whole color space.
Reservation classify_and_reserve(const Rational& e_bar, const Rational& a_bar, int ell, int delta, const Config& cfg);

// Members whose external degree or anti-degree is at least outlier_factor times a positive average.
std::vector<NodeId> find_outliers(const AlmostClique& k, const Decomposition& dec, double outlier_factor);

struct AcdViolation {
  std::string clause;  // partition, size, inner, outer, sparse, ext-sparsity
  NodeId node = -1;
  int clique = -1;
  std::string detail;
};

struct AcdReport {
  std::vector<AcdViolation> violations;
  std::vector<uint8_t> ext_sparse_ok;  // per clique member, 1 when sparsity >= (eps/2) e_v
  bool ok() const { return violations.empty(); }
};

AcdReport validate_acd(const Graph& g, const Decomposition& dec, double eps, double c_sp);

// Dense per-node adjacency rows, used when n is small enough to afford n^2 bits.
class AdjacencyBits {
 public:
  explicit AdjacencyBits(const Graph& g);
  bool available() const { return !rows_.empty(); }
  int common(NodeId u, NodeId v) const;              // |N(u) ∩ N(v)|
  int common_with_set(NodeId v, const uint64_t* set) const;  // |N(v) ∩ set|, set has n bits
  int64_t induced_edges(NodeId v, const Graph& g) const;  // m(N(v))

 private:
  size_t words_ = 0;
  std::vector<uint64_t> rows_;
};

nlohmann::json decomposition_json(const Decomposition& dec);

}  // namespace bcolor
