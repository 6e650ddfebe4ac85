#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bcolor {

using NodeId = int32_t;
using Rational = boost::rational<int64_t>;

class ParameterError : public std::invalid_argument {
 public:
  ParameterError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class Graph {
 public:
  Graph() = default;
  // Edges may contain duplicates in either orientation; self-loops are rejected.
  Graph(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& edges);

  NodeId n() const { return n_; }
  int max_degree() const { return max_degree_; }
  int64_t edge_count() const { return static_cast<int64_t>(targets_.size()) / 2; }
  int degree(NodeId v) const { return static_cast<int>(offsets_[v + 1] - offsets_[v]); }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  bool has_edge(NodeId u, NodeId v) const;
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  bool operator==(const Graph& o) const {
    return n_ == o.n_ && offsets_ == o.offsets_ && targets_ == o.targets_;
  }

 private:
  NodeId n_ = 0;
  int max_degree_ = 0;
  std::vector<int64_t> offsets_{0};
  std::vector<NodeId> targets_;
};

struct GraphModel {
  enum class Kind { Gnp, PlantedCliques, DisjointCliques, MixedSparseDense };
  Kind kind = Kind::Gnp;
  NodeId n = 0;
  double p = 0.0;
  int k = 0;
  int s = 0;             // 0 picks the default clique size
  double rewire = 0.02;  // fraction of intra-clique edges moved outside the clique

  void validate() const;
  std::string describe() const;
  // "gnp:n=100,p=0.1", "planted:n=4096,k=2,s=1800,r=0.005", "disjoint:k=2,s=3", "mixed:..."
  static GraphModel parse(const std::string& text);
};

struct GeneratedGraph {
  Graph graph;
  std::vector<int> planted;  // planted clique index per node, -1 outside
};

GeneratedGraph generate_with_truth(const GraphModel& model, uint64_t seed);
Graph generate(const GraphModel& model, uint64_t seed);

// Edges induced by N(v), by sorted-list intersection.
int64_t neighborhood_edges(const Graph& g, NodeId v);
// (C(D,2) - m(N(v))) / D, zero when D = 0.
Rational sparsity(const Graph& g, NodeId v);

struct ParsedGraph {
  Graph graph;
  int duplicate_edges = 0;
};

ParsedGraph parse_edge_list(const std::string& text);
std::string emit_edge_list(const Graph& g);

}  // namespace bcolor
