#pragma once

#include "bcolor/engine.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace bcolor {

enum class PermuteVariant { LogLog, Const, Auto };
enum class AcdMode { Oracle, Distributed };

// Every algorithm constant lives here. Two presets: "desk" and "paper-constants".
struct Config {
  std::string preset = "desk";
  double C = 4;
  double ell_exponent = 1.1;
  double eps = 0.02;
  double beta = 8;
  double p_s = 1.0 / 20;
  double gamma = 0.1;
  double c_sp = 1.0;  // sparse nodes must be c_sp * eps^2 * Delta sparse

  // Multipliers in the reserved-prefix and put-aside accounting.
  double full_reserve = 2;      // x(K) = full_reserve * ell for full cliques
  double putaside_factor = 3;   // |P_K| = putaside_factor * ell
  double closed_reserve = 7;    // x(K) = closed_reserve * a_bar for closed cliques
  double open_reserve = 0.25;   // x(K) = open_reserve * e_bar for open cliques
  double outlier_factor = 30;
  double sct_factor = 8;        // leftover bound sct_factor * max(sct_ext * e_bar, C log n)
  double sct_ext = 6;
  double carve_factor = 2;      // phase-one carve-out carve_factor * C log n
  double open_alpha = 1.0;      // open cleanup tries with probability open_alpha / 3
  int r_open = 6;

  int c_bw = 8;
  int c_mem = 4;
  double c_seed = 2;            // multitrial seed length in units of ceil(log2 n)
  int m2a_rounds = 4;
  int m2a_relays = 3;
  double m2a_capacity = 3;      // Many-to-All accepts up to m2a_capacity * Delta / log n senders
  double finish_palette = 1;    // finish_putaside truncates the palette to finish_palette * log^3 n colors
  double acd_samples = 1;       // distributed decomposition samples acd_samples / eps^2 neighbor IDs
  int matching_budget = 4;      // matching runs matching_budget * beta iterations
  int sparse_budget_extra = 10;
  int multitrial_extra = 4;
  double putaside_oversample = 1.5;

  AcdMode acd_mode = AcdMode::Oracle;
  PermuteVariant permute = PermuteVariant::Auto;
  Mode mode = Mode::BCongest;
  bool strict_bandwidth = false;
  uint64_t seed = 1;
  int threads = 1;

  static Config desk();
  static Config paper();
  static Config from_preset(const std::string& name);
};

void to_json(nlohmann::json& j, const Config& c);
// Applies the fields present in j on top of c (preset first, overrides after).
void apply_overrides(Config& c, const nlohmann::json& j);

// Quantities derived from (config, n, Delta).
struct Params {
  NodeId n = 0;
  int delta = 0;
  double log_n = 1;        // log2 n, at least 1
  double loglog_n = 1;     // log2 log2 n, at least 1
  int ceil_log_n = 1;
  double c_log_n = 0;      // C log n
  int ell = 0;             // ceil(C * log^1.1 n)
  int log_star = 1;

  Params() = default;
  Params(const Config& cfg, NodeId n, int delta);
  int clog() const { return static_cast<int>(std::ceil(c_log_n)); }
};

int log_star(double x);

}  // namespace bcolor
