// Acceptance run: prints one PASS/FAIL line per criterion, exits nonzero if any fails.
#include "bcolor/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace bcolor;

namespace {

// Pinned tolerances.
constexpr int kMinMatrixRuns = 200;
constexpr int kMinCliqueRuns = 500;
constexpr double kSctRate = 0.95;
constexpr int64_t kPermuteTrials = 200000;
constexpr double kChiAlpha = 0.001;
constexpr int64_t kCompressTrials = 1000;
constexpr double kCompressRate = 0.99;
constexpr int64_t kPrefixTrials = 100;
constexpr double kRoundRate = 0.95;
constexpr int64_t kRoundBudget = 300;

const char* kDesk = "planted:n=4096,k=2,s=1800,r=0.005";

struct Cell {
  std::string model;
  int seeds;
  AcdMode acd = AcdMode::Oracle;
};

struct Outcome {
  std::string model;
  uint64_t seed = 0;
  NodeId n = 0;
  int delta = 0;
  bool coloring_ok = false;
  int64_t bandwidth_faults = 0;
  int64_t max_bits = 0;
  int64_t bandwidth = 0;
  bool strict_abort = false;
  bool acd_accepted = false;
  int64_t acd_violations = 0;
  int64_t palette_violations = 0;
  int64_t palette_checked = 0;
  int64_t sct_runs = 0;
  int64_t sct_within = 0;
  bool fallback = false;
  int64_t rounds = 0;
  std::string table;
};

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome run_cell(const Cell& c, uint64_t seed) {
  Config cfg;
  cfg.seed = seed;
  cfg.strict_bandwidth = true;
  cfg.acd_mode = c.acd;
  const Graph g = generate(GraphModel::parse(c.model), seed);
  const RunReport r = run_pipeline(g, cfg, c.model);
  Outcome o;
  o.model = c.model;
  o.seed = seed;
  o.n = g.n();
  o.delta = g.max_degree();
  // recheck from scratch rather than trusting the report
  o.coloring_ok = r.coloring.size() == static_cast<size_t>(g.n()) && verify_coloring(g, r.coloring).ok();
  o.bandwidth = static_cast<int64_t>(cfg.c_bw) * ceil_log2(g.n());
  for (const auto& s : r.stages) o.max_bits = std::max(o.max_bits, s.max_bits);
  for (const auto& f : r.faults) o.bandwidth_faults += f.kind == Fault::Kind::Bandwidth;
  o.strict_abort = !r.aborted.empty();
  o.acd_accepted = r.validators.acd_accepted;
  o.acd_violations = r.validators.acd_violations;
  o.palette_violations = r.validators.palette_violations;
  o.palette_checked = r.validators.palette_checked;
  for (const auto& s : r.sct) {
    ++o.sct_runs;
    o.sct_within += static_cast<double>(s.leftover) <= s.bound;
  }
  o.fallback = r.fallback_fired;
  o.rounds = r.total_rounds;
  if (c.model == kDesk && seed == 1) o.table = stage_table(r);
  return o;
}

int failures = 0;

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s %2d %-24s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const int threads = workers();

  // Correctness matrix, strict bandwidth, desk preset.
  const std::vector<Cell> cells = {
      {"gnp:n=256,p=0.3", 15},
      {"disjoint:k=2,s=128", 15},
      {"planted:n=256,k=2,s=100,r=0.002", 15},
      {"mixed:n=256,k=1,s=120,r=0.002,p=0.1", 15},
      {"gnp:n=1024,p=0.1", 15},
      {"disjoint:k=8,s=128", 15},
      {"planted:n=1024,k=4,s=250,r=0.002", 15},
      {"mixed:n=1024,k=2,s=300,r=0.002,p=0.05", 15},
      {"gnp:n=256,p=0.3", 5, AcdMode::Distributed},
      {"disjoint:k=2,s=128", 5, AcdMode::Distributed},
      {"planted:n=1024,k=4,s=250,r=0.002", 5, AcdMode::Distributed},
      {"gnp:n=4096,p=0.02", 10},
      {"mixed:n=4096,k=2,s=1500,r=0.005,p=0.05", 10},
      {"planted:n=4096,k=8,s=450,r=0.002", 60},
      {kDesk, 40},
  };
  std::vector<std::pair<const Cell*, uint64_t>> jobs;
  for (const auto& c : cells)
    for (int s = 1; s <= c.seeds; ++s) jobs.emplace_back(&c, static_cast<uint64_t>(s));
  std::vector<Outcome> out(jobs.size());
  parallel_trials(static_cast<int64_t>(jobs.size()), threads,
                  [&](int64_t i) { out[i] = run_cell(*jobs[i].first, jobs[i].second); });
  std::vector<int> sizes;
  for (const auto& o : out) sizes.push_back(o.n);
  const bool sizes_covered = std::count(sizes.begin(), sizes.end(), 256) > 0 &&
                             std::count(sizes.begin(), sizes.end(), 1024) > 0 &&
                             std::count(sizes.begin(), sizes.end(), 4096) > 0;

  {
    int64_t bad = 0;
    for (const auto& o : out) bad += !o.coloring_ok;
    const auto runs = static_cast<int64_t>(out.size());
    verdict(1, "correctness", runs >= kMinMatrixRuns && sizes_covered && bad == 0,
            "runs=" + std::to_string(runs) + " violations=" + std::to_string(bad));
  }
  {
    int64_t faults = 0, aborts = 0, over = 0;
    for (const auto& o : out) {
      faults += o.bandwidth_faults;
      aborts += o.strict_abort;
      over += o.max_bits > o.bandwidth;
    }
    verdict(2, "bandwidth", faults == 0 && aborts == 0 && over == 0,
            "faults=" + std::to_string(faults) + " strict_aborts=" + std::to_string(aborts) +
                " over_budget_runs=" + std::to_string(over));
  }
  {
    int64_t accepted = 0, violations = 0;
    for (const auto& o : out)
      if (o.acd_accepted) {
        ++accepted;
        violations += o.acd_violations;
      }
    verdict(3, "decomposition", accepted > 0 && violations == 0,
            "accepted=" + std::to_string(accepted) + "/" + std::to_string(out.size()) +
                " violations=" + std::to_string(violations));
  }
  {
    int64_t violations = 0, checked = 0;
    for (const auto& o : out) {
      violations += o.palette_violations;
      checked += o.palette_checked;
    }
    verdict(4, "clique-palette", checked > 0 && violations == 0,
            "checked=" + std::to_string(checked) + " violations=" + std::to_string(violations));
  }
  {
    int64_t runs = 0, within = 0;
    for (const auto& o : out) {
      runs += o.sct_runs;
      within += o.sct_within;
    }
    const double rate = runs ? static_cast<double>(within) / runs : 0;
    verdict(5, "sct-leftover", runs >= kMinCliqueRuns && rate >= kSctRate,
            "clique_runs=" + std::to_string(runs) + " within_bound=" + fmt(rate));
  }
  {
    bool pass = true;
    std::string detail;
    for (const char* variant : {"loglog", "const"})
      for (int s : {3, 4, 5}) {
        StatSpec spec;
        spec.property = "permute-uniformity";
        spec.trials = kPermuteTrials;
        spec.alpha = kChiAlpha;
        spec.threads = threads;
        spec.seed = 100 + s;
        spec.params = {{"s", s}, {"variant", variant}};
        const auto r = stat_driver(spec);
        pass = pass && r.pass && r.successes == r.trials;
        const auto& chi = r.detail["chi_square"];
        detail += std::string(variant) + "/" + std::to_string(s) + ":chi2=" + fmt(chi["statistic"].get<double>()) +
                  "<" + fmt(chi["critical"].get<double>()) + ",bij=" + std::to_string(r.successes) + " ";
      }
    // bijectivity at larger sizes, both variants
    int64_t bad = 0;
    for (int s : {1, 2, 8, 16, 32})
      for (uint64_t seed = 1; seed <= 50; ++seed) {
        bad += !permutation_trial(PermuteVariant::LogLog, s, seed).bijective;
        bad += !permutation_trial(PermuteVariant::Const, s, seed).bijective;
      }
    pass = pass && bad == 0;
    verdict(6, "permute-uniformity", pass, detail + "non_bijective=" + std::to_string(bad));
  }
  {
    StatSpec spec;
    spec.property = "compress-try";
    spec.trials = kCompressTrials;
    spec.threshold = kCompressRate;
    spec.threads = threads;
    // |S| = C log n, lists of |S| + z colors, log n of a 4096-node graph
    spec.params = {{"n", 100}, {"s", 48}, {"total", 4096}};
    const auto r = stat_driver(spec);
    verdict(7, "compress-try", r.pass,
            "rate=" + fmt(r.rate) + " z=" + std::to_string(r.detail["z"].get<int64_t>()) +
                " worst=" + std::to_string(r.detail["worst_leftover"].get<int64_t>()) +
                " faults=" + std::to_string(r.detail["bandwidth_faults"].get<int64_t>()));
  }
  {
    bool pass = true;
    std::string detail;
    // desk bucket count with z0 = C log n, then a three-level schedule
    const std::vector<std::tuple<int, int, double>> shapes = {{38, 48, 48.0}, {100, 8, 8.0}};
    for (auto [groups, size, z0] : shapes) {
      StatSpec spec;
      spec.property = "prefix-sums";
      spec.trials = kPrefixTrials;
      spec.threshold = 1.0;
      spec.threads = threads;
      spec.params = {{"groups", groups}, {"size", size}, {"z0", z0}};
      const auto r = stat_driver(spec);
      pass = pass && r.pass && r.successes == kPrefixTrials;
      detail += std::to_string(groups) + "x" + std::to_string(size) + ":exact=" + std::to_string(r.successes) +
                ",levels=" + std::to_string(r.detail["levels"].get<int>()) + "/" +
                std::to_string(r.detail["levels_needed"].get<int>()) + " ";
    }
    verdict(8, "prefix-sums", pass, detail);
  }
  {
    int64_t faults = 0, bad = 0, peak = 0, budget = 0;
    const int seeds = 3;
    std::vector<RunReport> reps(seeds);
    parallel_trials(seeds, threads, [&](int64_t i) {
      Config cfg;
      cfg.seed = static_cast<uint64_t>(i) + 1;
      cfg.mode = Mode::BCStream;
      reps[i] = run_pipeline(generate(GraphModel::parse(kDesk), cfg.seed), cfg, kDesk);
    });
    for (const auto& r : reps) {
      faults += r.memory.memory_faults;
      bad += !r.validators.coloring.ok() || r.n != 4096;
      peak = std::max(peak, r.memory.peak);
      budget = r.memory.budget;
    }
    verdict(9, "streaming-memory", faults == 0 && bad == 0,
            "runs=" + std::to_string(seeds) + " memory_faults=" + std::to_string(faults) +
                " peak_words=" + std::to_string(peak) + " budget=" + std::to_string(budget));
  }
  {
    int64_t runs = 0, good = 0, worst = 0;
    bool regime = true;
    std::string table;
    for (const auto& o : out) {
      if (o.model != kDesk) continue;
      ++runs;
      const int lg = ceil_log2(o.n);
      regime = regime && o.n == 4096 && o.delta >= lg * lg * lg;
      good += !o.fallback && o.rounds <= kRoundBudget;
      worst = std::max(worst, o.rounds);
      if (!o.table.empty()) table = o.table;
    }
    const double rate = runs ? static_cast<double>(good) / runs : 0;
    verdict(10, "round-budget", regime && runs > 0 && rate >= kRoundRate,
            "seeds=" + std::to_string(runs) + " fallback_free_within_" + std::to_string(kRoundBudget) + "=" +
                fmt(rate) + " max_rounds=" + std::to_string(worst));
    std::cout << table;
  }
  {
    bool same = true;
    const std::vector<std::pair<std::string, Mode>> cases = {
        {kDesk, Mode::BCongest}, {"mixed:n=2048,k=1,s=1000,r=0.005,p=0.02", Mode::BCongest},
        {"gnp:n=1024,p=0.1", Mode::BCStream}};
    for (const auto& [model, mode] : cases) {
      Config a;
      a.seed = 11;
      a.mode = mode;
      Config b = a;
      b.threads = 4;
      const Graph g = generate(GraphModel::parse(model), a.seed);
      same = same && report_json(run_pipeline(g, a, model)).dump() == report_json(run_pipeline(g, b, model)).dump();
    }
    verdict(11, "determinism", same, "cases=" + std::to_string(cases.size()) + " workers=1vs4");
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("acceptance: %d failed, %.0f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
