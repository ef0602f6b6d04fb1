#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "maxrank/corrections.hpp"
#include "maxrank/io.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/rank.hpp"

namespace fs = std::filesystem;
using namespace maxrank;

namespace {

const char* cli_path() { return MAXRANK_CLI_PATH; }

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "maxrank_test_cli";
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("correct subcommand reproduces the library result") {
  const fs::path dir = work_dir();
  const fs::path csv = dir / "scores.csv";
  {
    std::ofstream out(csv);
    out << "test_1,test_2\n";
    out << "10,21\n12,19\n14,27\n16,25\n";
  }
  const fs::path json_out = dir / "correct.json";
  const int code =
      run(std::string(cli_path()) + " correct " + q(csv) +
          " --alpha 0.25 --method max-rank --seed 3 > " + q(json_out));
  REQUIRE(code == 0);

  const auto j = nlohmann::json::parse(read_file(json_out));
  CHECK(j.at("method") == "max-rank");
  CHECK(j.at("global_rank") == 4);
  CHECK(j.at("clamped") == false);
  REQUIRE(j.at("per_test").size() == 2);
  CHECK(j.at("per_test")[0].at("quantile").get<double>() == 16.0);
  CHECK(j.at("per_test")[1].at("quantile").get<double>() == 27.0);
}

TEST_CASE("correct with --out writes the file plus a manifest") {
  const fs::path dir = work_dir();
  const fs::path csv = dir / "scores2.csv";
  {
    std::ofstream out(csv);
    out << "test_1\n1\n2\n3\n4\n5\n6\n7\n8\n9\n";
  }
  const fs::path out = dir / "res.json";
  const int code = run(std::string(cli_path()) + " correct " + q(csv) +
                       " --alpha 0.5 --method uncorrected --out " + q(out) +
                       " 2>/dev/null");
  REQUIRE(code == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(manifest_path_for(out)));
  const auto manifest = nlohmann::json::parse(read_file(manifest_path_for(out)));
  CHECK(manifest.at("outputs")[0].at("digest_fnv1a64").get<std::string>() ==
        hex64(file_digest(out)));
}

TEST_CASE("validation failures exit with code 1") {
  const fs::path dir = work_dir();
  const fs::path csv = dir / "scores3.csv";
  {
    std::ofstream out(csv);
    out << "test_1\n1\n2\n3\n";
  }
  CHECK(run(std::string(cli_path()) + " correct " + q(csv) +
            " --alpha 1.5 2>/dev/null") == 1);
  CHECK(run(std::string(cli_path()) + " frobnicate 2>/dev/null") == 1);
  CHECK(run(std::string(cli_path()) + " correct " + q(dir / "missing.csv") +
            " 2>/dev/null") == 1);
  CHECK(run(std::string(cli_path()) + " simulate --grid nope.cfg 2>/dev/null") ==
        1);  // missing required --out
}

TEST_CASE("simulate produces a CSV, a manifest, and reproduces bytes") {
  const fs::path dir = work_dir();
  const fs::path cfg = dir / "grid.cfg";
  {
    std::ofstream out(cfg);
    out << "rho_list = 0.0, 1.0\n"
        << "m_list = 2\n"
        << "n_list = 200\n"
        << "alpha = 0.1\n"
        << "trials = 4\n"
        << "fresh_draws = 50\n"
        << "seed = 11\n"
        << "methods = max-rank, bonferroni\n";
  }
  const fs::path out_a = dir / "a.csv";
  const fs::path out_b = dir / "b.csv";
  REQUIRE(run(std::string(cli_path()) + " simulate --grid " + q(cfg) +
              " --out " + q(out_a) + " 2>/dev/null") == 0);
  REQUIRE(run(std::string(cli_path()) + " simulate --grid " + q(cfg) +
              " --out " + q(out_b) + " --threads 3 2>/dev/null") == 0);
  CHECK(read_file(out_a) == read_file(out_b));

  const auto manifest =
      nlohmann::json::parse(read_file(manifest_path_for(out_a)));
  CHECK(manifest.at("master_seed").get<std::uint64_t>() == 11);
  CHECK(manifest.at("outputs")[0].at("digest_fnv1a64").get<std::string>() ==
        hex64(file_digest(out_a)));

  const std::string csv = read_file(out_a);
  CHECK(csv.rfind("method,rho,m,n,alpha,alpha_hat,mc_stderr,clamped,"
                  "per_test_alpha_hat,error\n", 0) == 0);
}

TEST_CASE("seed precedence: flag beats MAXRANK_SEED beats config") {
  const fs::path dir = work_dir();
  const fs::path cfg = dir / "grid_seed.cfg";
  {
    std::ofstream out(cfg);
    out << "rho_list = 0.5\nm_list = 2\nn_list = 150\nalpha = 0.1\n"
        << "trials = 3\nfresh_draws = 40\nseed = 1\nmethods = max-rank\n";
  }
  const fs::path by_cfg = dir / "s_cfg.csv";
  const fs::path by_env = dir / "s_env.csv";
  const fs::path by_flag = dir / "s_flag.csv";
  const fs::path flag_and_env = dir / "s_both.csv";

  REQUIRE(run(std::string(cli_path()) + " simulate --grid " + q(cfg) +
              " --out " + q(by_cfg) + " 2>/dev/null") == 0);
  REQUIRE(run("MAXRANK_SEED=2 " + std::string(cli_path()) + " simulate --grid " +
              q(cfg) + " --out " + q(by_env) + " 2>/dev/null") == 0);
  REQUIRE(run(std::string(cli_path()) + " simulate --grid " + q(cfg) +
              " --seed 3 --out " + q(by_flag) + " 2>/dev/null") == 0);
  REQUIRE(run("MAXRANK_SEED=2 " + std::string(cli_path()) + " simulate --grid " +
              q(cfg) + " --seed 3 --out " + q(flag_and_env) +
              " 2>/dev/null") == 0);

  CHECK(read_file(by_cfg) != read_file(by_env));
  CHECK(read_file(by_env) != read_file(by_flag));
  CHECK(read_file(by_flag) == read_file(flag_and_env));

  const auto m_env = nlohmann::json::parse(read_file(manifest_path_for(by_env)));
  CHECK(m_env.at("master_seed").get<std::uint64_t>() == 2);
}

TEST_CASE("conformal-demo emits the documented CSV columns") {
  const fs::path dir = work_dir();
  const fs::path task = dir / "task.cfg";
  {
    std::ofstream out(task);
    out << "m = 3\nshared_weight = 0.6\nnoise_scale = 1.0\n"
        << "n_train = 40\nn_cal = 150\nn_test = 30\n";
  }
  const fs::path out = dir / "cov.csv";
  REQUIRE(run(std::string(cli_path()) + " conformal-demo --task " + q(task) +
              " --alpha 0.1 --corrections max-rank,bonferroni,uncorrected" +
              " --trials 5 --seed 21 --out " + q(out) + " 2>/dev/null") == 0);
  const std::string csv = read_file(out);
  CHECK(csv.rfind("correction,joint_coverage,per_dim_coverage,mean_volume,"
                  "clamped_any,error\n", 0) == 0);
  CHECK(csv.find("max-rank") != std::string::npos);
  CHECK(csv.find("uncorrected") != std::string::npos);
  CHECK(fs::exists(manifest_path_for(out)));
}

TEST_CASE("selftest subcommand passes") {
  CHECK(run(std::string(cli_path()) + " selftest >/dev/null 2>&1") == 0);
}
