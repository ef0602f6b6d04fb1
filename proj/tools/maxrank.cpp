// Unified command-line entry point: multiple-testing corrections on score
// CSVs, Monte Carlo FWER experiment grids, and the multivariate conformal
// coverage demo. Every file-producing run also emits a .manifest.json
// recording the resolved config, master seed and output digests.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "maxrank/config.hpp"
#include "maxrank/conformal.hpp"
#include "maxrank/corrections.hpp"
#include "maxrank/io.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/rank.hpp"
#include "maxrank/simulation.hpp"
#include "maxrank/selftest.hpp"
#include "maxrank/version.hpp"

namespace {

using namespace maxrank;

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("MAXRANK_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw ValidationError("MAXRANK_SEED is not an unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

// Precedence: explicit --seed flag, then MAXRANK_SEED, then the config
// file value (already in `current`), then the default.
std::uint64_t resolve_seed(bool flag_given, std::uint64_t flag_value,
                           std::uint64_t current) {
  if (flag_given) return flag_value;
  if (auto env = env_seed()) return *env;
  return current;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

int run_correct(const std::string& scores_path, double alpha,
                const std::string& method_name, bool seed_given,
                std::uint64_t seed_flag, const std::string& out_path,
                const std::string& cmdline) {
  Timer timer;
  const std::uint64_t seed = resolve_seed(seed_given, seed_flag, 0);
  const Method method = method_from_string(method_name);
  const ScoreMatrix s = read_score_csv(std::filesystem::path(scores_path));

  CorrectionResult res;
  switch (method) {
    case Method::max_rank: {
      RankDiagnostics diag;
      const RankMatrix r = column_ranks(s, seed, &diag);
      res = max_rank_correct(r, s, alpha);
      if (diag.any_degenerate()) {
        std::cerr << "note: degenerate (all-equal) column(s); ranks fall "
                     "back to row order\n";
      }
      break;
    }
    case Method::bonferroni:
      res = bonferroni_correct(s, alpha);
      break;
    case Method::independence_exact:
      res = independence_exact_correct(s, alpha);
      break;
    case Method::uncorrected:
      res = uncorrected(s, alpha);
      break;
  }

  nlohmann::json j;
  j["method"] = to_string(res.method);
  j["global_rank"] = res.global_rank;
  j["clamped"] = res.clamped;
  j["per_test"] = nlohmann::json::array();
  for (std::size_t k = 0; k < res.per_test_quantiles.size(); ++k) {
    j["per_test"].push_back({{"quantile", res.per_test_quantiles[k]},
                             {"alpha", res.per_test_alpha[k]}});
  }

  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write output: " + out_path);
    out << j.dump(2) << "\n";
  }
  RunManifest manifest;
  manifest.command = cmdline;
  manifest.config = {{"scores", scores_path},
                     {"alpha", alpha},
                     {"method", to_string(method)},
                     {"seed", seed}};
  manifest.master_seed = seed;
  manifest.duration_seconds = timer.seconds();
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path);
  return 0;
}

int run_simulate(const std::string& grid_path, const std::string& out_path,
                 bool seed_given, std::uint64_t seed_flag,
                 bool alpha_given, double alpha_flag, int trials_flag,
                 int fresh_flag, int threads, const std::string& cmdline) {
  Timer timer;
  ExperimentGrid grid = load_grid_config(grid_path);
  if (alpha_given) grid.alpha = alpha_flag;
  if (trials_flag > 0) grid.trials = trials_flag;
  if (fresh_flag > 0) grid.fresh_draws = fresh_flag;
  grid.seed = resolve_seed(seed_given, seed_flag, grid.seed);
  grid.validate();

  std::mutex log_mutex;
  std::size_t done = 0;
  const std::size_t total =
      grid.rho_list.size() * grid.m_list.size() * grid.n_list.size() *
      grid.methods.size();
  const auto rows = run_grid(grid, threads, [&](const GridRow& row) {
    std::lock_guard<std::mutex> lock(log_mutex);
    ++done;
    std::cerr << "[" << done << "/" << total << "] " << to_string(row.method)
              << " rho=" << format_double(row.rho) << " m=" << row.m
              << " n=" << row.n;
    if (row.error.empty()) {
      std::cerr << " alpha_hat=" << format_double(row.alpha_hat)
                << (row.clamped ? " clamped" : "");
    } else {
      std::cerr << " error: " << row.error;
    }
    std::cerr << "\n";
  });

  {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write output: " + out_path);
    write_grid_csv(rows, out);
  }

  RunManifest manifest;
  manifest.command = cmdline;
  manifest.config = grid_to_json(grid);
  manifest.master_seed = grid.seed;
  manifest.duration_seconds = timer.seconds();
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path);
  return 0;
}

int run_conformal_demo(const std::string& task_path, double alpha,
                       const std::string& corrections_csv, int trials,
                       bool seed_given, std::uint64_t seed_flag, int threads,
                       const std::string& out_path,
                       const std::string& cmdline) {
  Timer timer;
  const SyntheticTask task = load_task_config(task_path);
  const std::uint64_t seed = resolve_seed(seed_given, seed_flag, 0);

  std::vector<Method> corrections;
  for (const auto& name : config_detail::split_list(corrections_csv)) {
    corrections.push_back(method_from_string(name));
  }
  const auto rows =
      coverage_experiment(task, alpha, corrections, trials, seed, threads);

  {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write output: " + out_path);
    write_coverage_csv(rows, out);
  }

  RunManifest manifest;
  manifest.command = cmdline;
  manifest.config = {{"task", task_to_json(task)},
                     {"alpha", alpha},
                     {"corrections", corrections_csv},
                     {"trials", trials},
                     {"seed", seed}};
  manifest.master_seed = seed;
  manifest.duration_seconds = timer.seconds();
  manifest.outputs = {out_path};
  write_manifest(manifest, out_path);
  return 0;
}

int run_selftest_cmd(bool seed_given, std::uint64_t seed_flag) {
  const std::uint64_t seed = resolve_seed(seed_given, seed_flag, 0x5eedULL);
  const auto results = run_selftest(seed);
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS  " : "FAIL  ") << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    if (!r.pass) ++failed;
  }
  std::cout << results.size() - failed << "/" << results.size()
            << " checks passed\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"max-rank multiple-testing correction toolkit"};
  app.set_version_flag("--version", maxrank::kVersion);
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for grids/experiments (0 = auto)");

  // correct
  auto* correct = app.add_subcommand(
      "correct", "apply a correction to a score matrix CSV");
  correct->fallthrough();
  std::string scores_path;
  double c_alpha = 0.05;
  std::string c_method = "max-rank";
  std::uint64_t c_seed = 0;
  std::string c_out;
  correct->add_option("scores", scores_path, "score matrix CSV")->required();
  correct->add_option("--alpha", c_alpha, "target significance level");
  correct
      ->add_option("--method", c_method,
                   "max-rank|bonferroni|independence|uncorrected")
      ->check(CLI::IsMember(
          {"max-rank", "bonferroni", "independence", "uncorrected"}));
  auto* c_seed_opt = correct->add_option("--seed", c_seed, "jitter seed");
  correct->add_option("--out", c_out,
                      "write JSON here instead of stdout (emits a manifest)");

  // simulate
  auto* simulate =
      app.add_subcommand("simulate", "run a Monte Carlo FWER experiment grid");
  simulate->fallthrough();
  std::string grid_path, s_out;
  std::uint64_t s_seed = 0;
  double s_alpha = 0.05;
  int s_trials = 0, s_fresh = 0;
  simulate->add_option("--grid", grid_path, "grid config (JSON or key=value)")
      ->required();
  simulate->add_option("--out", s_out, "output CSV path")->required();
  auto* s_seed_opt =
      simulate->add_option("--seed", s_seed, "master seed (overrides config)");
  auto* s_alpha_opt =
      simulate->add_option("--alpha", s_alpha, "overrides config alpha");
  simulate->add_option("--trials", s_trials, "overrides config trials");
  simulate->add_option("--fresh-draws", s_fresh,
                       "overrides config fresh_draws");

  // conformal-demo
  auto* demo = app.add_subcommand(
      "conformal-demo", "multivariate conformal coverage experiment");
  demo->fallthrough();
  std::string task_path, d_corrections = "max-rank,bonferroni", d_out;
  double d_alpha = 0.1;
  int d_trials = 100;
  std::uint64_t d_seed = 0;
  demo->add_option("--task", task_path, "task config (JSON or key=value)")
      ->required();
  demo->add_option("--alpha", d_alpha, "target miscoverage level");
  demo->add_option("--corrections", d_corrections,
                   "comma list of corrections");
  demo->add_option("--trials", d_trials, "Monte Carlo trials");
  auto* d_seed_opt = demo->add_option("--seed", d_seed, "master seed");
  demo->add_option("--out", d_out, "output CSV path")->required();

  // selftest
  auto* selftest = app.add_subcommand(
      "selftest", "run the brute-force oracles and invariant suite");
  selftest->fallthrough();
  std::uint64_t t_seed = 0;
  auto* t_seed_opt = selftest->add_option("--seed", t_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string cmdline = command_line(argc, argv);
  try {
    if (*correct) {
      return run_correct(scores_path, c_alpha, c_method,
                         c_seed_opt->count() > 0, c_seed, c_out, cmdline);
    }
    if (*simulate) {
      return run_simulate(grid_path, s_out, s_seed_opt->count() > 0, s_seed,
                          s_alpha_opt->count() > 0, s_alpha, s_trials, s_fresh,
                          threads, cmdline);
    }
    if (*demo) {
      return run_conformal_demo(task_path, d_alpha, d_corrections, d_trials,
                                d_seed_opt->count() > 0, d_seed, threads,
                                d_out, cmdline);
    }
    if (*selftest) {
      return run_selftest_cmd(t_seed_opt->count() > 0, t_seed);
    }
  } catch (const maxrank::ValidationError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}
