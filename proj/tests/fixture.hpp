#pragma once

#include "bcolor/decomposition.hpp"
#include "bcolor/engine.hpp"
#include "bcolor/harness.hpp"
#include "bcolor/state.hpp"

#include <utility>
#include <vector>

namespace bcolor::testing {

inline EngineOptions engine_options(const Config& c) {
  EngineOptions o;
  o.c_bw = c.c_bw;
  o.c_mem = c.c_mem;
  o.mode = c.mode;
  o.strict = c.strict_bandwidth;
  o.threads = c.threads;
  o.seed = c.seed;
  return o;
}

// Graph, engine and pipeline state, prepared up to classification like the pipeline does.
struct Fixture {
  Graph g;
  Engine eng;
  PipelineState st;

  Fixture(Graph graph, const Config& cfg, bool classify_cliques = true)
      : g(std::move(graph)), eng(g, engine_options(cfg)), st(eng, cfg, acd_oracle(g, cfg.eps)) {
    eng.set_groups(st.dec.clique_of);
    if (classify_cliques && !st.dec.cliques.empty()) {
      clique_statistics(st);
      classify(st);
    }
  }
};

// Complete graph on `size` nodes minus the listed edges.
inline Graph clique_minus(NodeId size, const std::vector<std::pair<NodeId, NodeId>>& missing) {
  std::vector<std::pair<NodeId, NodeId>> e;
  std::vector<std::vector<uint8_t>> drop(size, std::vector<uint8_t>(size, 0));
  for (auto [a, b] : missing) drop[a][b] = drop[b][a] = 1;
  for (NodeId a = 0; a < size; ++a)
    for (NodeId b = a + 1; b < size; ++b)
      if (!drop[a][b]) e.emplace_back(a, b);
  return Graph(size, e);
}

inline std::vector<NodeId> all_nodes(NodeId n) {
  std::vector<NodeId> v(n);
  for (NodeId i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace bcolor::testing
