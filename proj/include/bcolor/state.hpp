#pragma once

#include "bcolor/comm.hpp"
#include "bcolor/config.hpp"
#include "bcolor/decomposition.hpp"
#include "bcolor/engine.hpp"

#include <string>
#include <vector>

namespace bcolor {

enum class Role : uint8_t { Sparse, Outlier, Inlier };

// Everything the stages share during one pipeline run.
struct PipelineState {
  PipelineState(Engine& e, Config c, Decomposition d);

  Engine& eng;
  Config cfg;
  Params prm;
  Decomposition dec;
  GroupTrees clique_trees;        // one depth-2 tree per almost-clique
  std::vector<int> x_of;          // reserved prefix per node, 0 outside live cliques
  std::vector<Role> role;
  std::vector<uint8_t> in_putaside;
  std::vector<uint8_t> needs_fallback;

  int delta() const { return prm.delta; }
  bool live(int k) const { return !dec.cliques[k].demoted; }
  // Hands a clique over to the sparse path: no reserved prefix, full lists, put-aside released.
  void demote(int k, Fault::Kind why, const std::string& detail);
  // Put-aside size for full cliques.
  int putaside_size() const;
};

}  // namespace bcolor
