#include "bcolor/config.hpp"

#include <algorithm>
#include <stdexcept>

namespace bcolor {

Config Config::desk() { return Config{}; }

Config Config::paper() {
  Config c;
  c.preset = "paper-constants";
  c.eps = 1e-5;
  c.beta = 401;
  c.p_s = 1.0 / 200;
  c.full_reserve = 200;
  c.putaside_factor = 201;
  c.closed_reserve = 400;
  c.open_reserve = c.gamma * c.eps / 8;
  c.open_alpha = c.gamma * c.eps / 640;
  c.carve_factor = 31;
  return c;
}

Config Config::from_preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper" || name == "paper-constants") return paper();
  throw ParameterError("preset", "unknown preset '" + name + "'");
}

namespace {

const char* permute_name(PermuteVariant p) {
  switch (p) {
    case PermuteVariant::LogLog: return "loglog";
    case PermuteVariant::Const: return "const";
    case PermuteVariant::Auto: return "auto";
  }
  return "auto";
}

PermuteVariant parse_permute(const std::string& s) {
  if (s == "loglog") return PermuteVariant::LogLog;
  if (s == "const") return PermuteVariant::Const;
  if (s == "auto") return PermuteVariant::Auto;
  throw ParameterError("permute", "expected loglog, const or auto");
}

Mode parse_mode(const std::string& s) {
  if (s == "bcongest") return Mode::BCongest;
  if (s == "bcstream") return Mode::BCStream;
  throw ParameterError("mode", "expected bcongest or bcstream");
}

}  // namespace

void to_json(nlohmann::json& j, const Config& c) {
  j = nlohmann::json{{"preset", c.preset},
                     {"C", c.C},
                     {"ell_exponent", c.ell_exponent},
                     {"eps", c.eps},
                     {"beta", c.beta},
                     {"p_s", c.p_s},
                     {"gamma", c.gamma},
                     {"c_sp", c.c_sp},
                     {"full_reserve", c.full_reserve},
                     {"putaside_factor", c.putaside_factor},
                     {"closed_reserve", c.closed_reserve},
                     {"open_reserve", c.open_reserve},
                     {"outlier_factor", c.outlier_factor},
                     {"sct_factor", c.sct_factor},
                     {"sct_ext", c.sct_ext},
                     {"carve_factor", c.carve_factor},
                     {"open_alpha", c.open_alpha},
                     {"r_open", c.r_open},
                     {"c_bw", c.c_bw},
                     {"c_mem", c.c_mem},
                     {"c_seed", c.c_seed},
                     {"m2a_rounds", c.m2a_rounds},
                     {"m2a_relays", c.m2a_relays},
                     {"m2a_capacity", c.m2a_capacity},
                     {"finish_palette", c.finish_palette},
                     {"acd_samples", c.acd_samples},
                     {"matching_budget", c.matching_budget},
                     {"sparse_budget_extra", c.sparse_budget_extra},
                     {"multitrial_extra", c.multitrial_extra},
                     {"putaside_oversample", c.putaside_oversample},
                     {"acd_mode", c.acd_mode == AcdMode::Oracle ? "oracle" : "distributed"},
                     {"permute", permute_name(c.permute)},
                     {"mode", c.mode == Mode::BCongest ? "bcongest" : "bcstream"},
                     {"strict_bandwidth", c.strict_bandwidth},
                     {"seed", c.seed},
                     {"threads", c.threads}};
}

void apply_overrides(Config& c, const nlohmann::json& j) {
  auto num = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ParameterError(key, "expected a number");
    field = j[key].get<std::remove_reference_t<decltype(field)>>();
  };
  num("C", c.C);
  num("ell_exponent", c.ell_exponent);
  num("eps", c.eps);
  num("beta", c.beta);
  num("p_s", c.p_s);
  num("gamma", c.gamma);
  num("c_sp", c.c_sp);
  num("full_reserve", c.full_reserve);
  num("putaside_factor", c.putaside_factor);
  num("closed_reserve", c.closed_reserve);
  num("open_reserve", c.open_reserve);
  num("outlier_factor", c.outlier_factor);
  num("sct_factor", c.sct_factor);
  num("sct_ext", c.sct_ext);
  num("carve_factor", c.carve_factor);
  num("open_alpha", c.open_alpha);
  num("r_open", c.r_open);
  num("c_bw", c.c_bw);
  num("c_mem", c.c_mem);
  num("c_seed", c.c_seed);
  num("m2a_rounds", c.m2a_rounds);
  num("m2a_relays", c.m2a_relays);
  num("m2a_capacity", c.m2a_capacity);
  num("finish_palette", c.finish_palette);
  num("acd_samples", c.acd_samples);
  num("matching_budget", c.matching_budget);
  num("sparse_budget_extra", c.sparse_budget_extra);
  num("multitrial_extra", c.multitrial_extra);
  num("putaside_oversample", c.putaside_oversample);
  num("seed", c.seed);
  num("threads", c.threads);
  if (j.contains("acd_mode")) {
    auto s = j["acd_mode"].get<std::string>();
    if (s == "oracle") c.acd_mode = AcdMode::Oracle;
    else if (s == "distributed") c.acd_mode = AcdMode::Distributed;
    else throw ParameterError("acd_mode", "expected oracle or distributed");
  }
  if (j.contains("permute")) c.permute = parse_permute(j["permute"].get<std::string>());
  if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
  if (j.contains("strict_bandwidth")) c.strict_bandwidth = j["strict_bandwidth"].get<bool>();
  if (!(c.eps > 0 && c.eps <= 0.05)) throw ParameterError("eps", "must lie in (0, 1/20]");
  if (!(c.p_s >= 0 && c.p_s <= 1)) throw ParameterError("p_s", "probability must lie in [0, 1]");
  if (c.C <= 0) throw ParameterError("C", "must be positive");
  if (c.beta <= 0) throw ParameterError("beta", "must be positive");
  if (c.c_bw < 1) throw ParameterError("c_bw", "must be at least 1");
  if (c.c_mem < 1) throw ParameterError("c_mem", "must be at least 1");
  if (c.threads < 1) throw ParameterError("threads", "must be at least 1");
}

int log_star(double x) {
  int k = 0;
  while (x > 1) {
    x = std::log2(x);
    ++k;
  }
  return std::max(k, 1);
}

Params::Params(const Config& cfg, NodeId n_, int delta_) : n(n_), delta(delta_) {
  log_n = std::max(1.0, std::log2(std::max<double>(n, 2)));
  loglog_n = std::max(1.0, std::log2(log_n));
  ceil_log_n = ceil_log2(static_cast<uint64_t>(std::max<NodeId>(n, 2)));
  c_log_n = cfg.C * log_n;
  ell = static_cast<int>(std::ceil(cfg.C * std::pow(log_n, cfg.ell_exponent)));
  log_star = bcolor::log_star(std::max<double>(n, 2));
}

}  // namespace bcolor
