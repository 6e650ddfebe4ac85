#include "bcolor/state.hpp"

#include <cmath>

namespace bcolor {

PipelineState::PipelineState(Engine& e, Config c, Decomposition d)
    : eng(e), cfg(std::move(c)), prm(cfg, e.n(), e.graph().max_degree()), dec(std::move(d)) {
  const NodeId n = eng.n();
  x_of.assign(n, 0);
  role.assign(n, Role::Sparse);
  in_putaside.assign(n, 0);
  needs_fallback.assign(n, 0);
  for (const auto& k : dec.cliques)
    for (NodeId v : k.members) role[v] = Role::Inlier;
}

void PipelineState::demote(int k, Fault::Kind why, const std::string& detail) {
  auto& c = dec.cliques[k];
  if (c.demoted) return;
  c.demoted = true;
  c.demote_reason = detail;
  for (NodeId v : c.members) {
    x_of[v] = 0;
    role[v] = Role::Sparse;
    in_putaside[v] = 0;
  }
  c.putaside.clear();
  eng.record_fault({why, "", c.leader, 0, k, "clique demoted: " + detail});
}

int PipelineState::putaside_size() const {
  return static_cast<int>(std::ceil(cfg.putaside_factor * prm.ell - 1e-9));
}

}  // namespace bcolor
