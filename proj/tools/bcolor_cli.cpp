// Command-line front end: run, validate, stats, bench.
#include "bcolor/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace bcolor;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunFlags {
  std::string config_file;
  std::string graph;
  std::string model;
  std::string preset;
  uint64_t seed = 0;
  std::string mode;
  std::string permute;
  std::string out;
  bool strict = false;
  int threads = 0;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config_file, "JSON file with RunConfig fields");
  app->add_option("--graph", f.graph, "edge-list file");
  app->add_option("--model", f.model, "generator spec, e.g. planted:n=4096,k=2,s=1800,r=0.005");
  app->add_option("--preset", f.preset, "desk or paper-constants");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--mode", f.mode, "bcongest or bcstream");
  app->add_option("--permute", f.permute, "loglog, const or auto");
  app->add_option("--out", f.out, "prefix for <out>.jsonl and <out>.coloring");
  app->add_option("--threads", f.threads, "worker threads");
  app->add_flag("--strict-bandwidth", f.strict, "abort on the first budget fault");
}

RunConfig build_config(const RunFlags& f) {
  json j = f.config_file.empty() ? json::object() : json::parse(read_file(f.config_file));
  if (!f.preset.empty()) j["preset"] = f.preset;
  if (!f.graph.empty()) j["graph"] = f.graph;
  if (!f.model.empty()) j["graph"] = f.model;
  if (f.seed) j["seed"] = f.seed;
  if (!f.mode.empty()) j["mode"] = f.mode;
  if (!f.permute.empty()) j["permute"] = f.permute;
  if (!f.out.empty()) j["out"] = f.out;
  if (f.threads) j["threads"] = f.threads;
  if (f.strict) j["strict_bandwidth"] = true;
  return RunConfig::from_json(j);
}

int cmd_run(const RunFlags& f) {
  RunConfig rc = build_config(f);
  RunReport rep = run_pipeline(rc);
  const std::string line = report_json(rep).dump();
  if (rc.out.empty()) {
    std::cout << line << "\n";
  } else {
    std::ofstream(rc.out + ".jsonl") << line << "\n";
    std::ofstream(rc.out + ".coloring") << emit_coloring(rep.coloring);
  }
  std::cerr << stage_table(rep);
  return rep.validators.coloring.ok() ? 0 : 1;
}

int cmd_validate(const std::string& graph, const std::string& coloring, uint64_t seed) {
  const Graph g = load_graph(graph, seed);
  const auto colors = parse_coloring(read_file(coloring), g.n());
  const auto v = verify_coloring(g, colors);
  json conflicts = json::array();
  for (auto [a, b] : v.conflicts) conflicts.push_back({a, b});
  std::cout << json{{"proper", v.proper},       {"total", v.total},
                    {"in_range", v.in_range},   {"conflict_count", v.conflict_count},
                    {"conflicts", conflicts},   {"uncolored", v.uncolored},
                    {"out_of_range", v.out_of_range}}
                   .dump()
            << "\n";
  return v.ok() ? 0 : 1;
}

int cmd_stats(const std::string& spec_file, int threads) {
  json j = json::parse(read_file(spec_file));
  json specs = j.is_array() ? j : json::array({j});
  bool all = true;
  for (const auto& s : specs) {
    StatSpec spec = StatSpec::from_json(s);
    if (threads) spec.threads = threads;
    auto r = stat_driver(spec);
    all = all && r.pass;
    std::cout << stat_json(r).dump() << "\n";
  }
  return all ? 0 : 1;
}

// Matrix file: {"graphs": [...], "seeds": [..] or count, "modes": [...], "permute": [...], plus
// any RunConfig field applied to every run}.
int cmd_bench(const std::string& matrix_file, int threads) {
  json m = json::parse(read_file(matrix_file));
  std::vector<uint64_t> seeds;
  if (m.contains("seeds") && m["seeds"].is_array()) seeds = m["seeds"].get<std::vector<uint64_t>>();
  else
    for (uint64_t s = 1; s <= m.value("seeds", uint64_t{1}); ++s) seeds.push_back(s);
  const auto graphs = m.at("graphs").get<std::vector<std::string>>();
  const auto modes = m.value("modes", std::vector<std::string>{"bcongest"});
  const auto permutes = m.value("permute", std::vector<std::string>{"auto"});
  json base = m;
  for (const char* k : {"graphs", "seeds", "modes", "permute"}) base.erase(k);
  bool ok = true;
  for (const auto& gspec : graphs)
    for (const auto& mode : modes)
      for (const auto& perm : permutes)
        for (uint64_t seed : seeds) {
          json j = base;
          j["graph"] = gspec;
          j["mode"] = mode;
          j["permute"] = perm;
          j["seed"] = seed;
          if (threads) j["threads"] = threads;
          auto rep = run_pipeline(RunConfig::from_json(j));
          ok = ok && rep.validators.coloring.ok();
          std::cout << report_json(rep).dump() << "\n";
        }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed (Delta+1)-coloring simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one pipeline and print its report");
  add_run_flags(run, run_flags);

  std::string vgraph, vcoloring;
  uint64_t vseed = 1;
  auto* validate = app.add_subcommand("validate", "check a coloring file against a graph");
  validate->add_option("--graph", vgraph, "edge-list file or generator spec")->required();
  validate->add_option("--coloring", vcoloring, "'node color' lines")->required();
  validate->add_option("--seed", vseed, "generator seed when --graph is a spec");

  std::string spec_file;
  int stat_threads = 0;
  auto* stats = app.add_subcommand("stats", "run statistical test specs");
  stats->add_option("spec", spec_file, "JSON spec or array of specs")->required();
  stats->add_option("--threads", stat_threads, "concurrent trials");

  std::string matrix_file;
  int bench_threads = 0;
  auto* bench = app.add_subcommand("bench", "run a matrix of configurations");
  bench->add_option("matrix", matrix_file, "JSON matrix file")->required();
  bench->add_option("--threads", bench_threads, "worker threads per run");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_flags);
    if (*validate) return cmd_validate(vgraph, vcoloring, vseed);
    if (*stats) return cmd_stats(spec_file, stat_threads);
    if (*bench) return cmd_bench(matrix_file, bench_threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
