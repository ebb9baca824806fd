// Copyright 2026 The curvlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "curvlens/io.hpp"
#include "curvlens/mlp.hpp"
#include "curvlens/spectral.hpp"
#include "support/oracles.hpp"

namespace curvlens {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "curvlens");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("curvlens_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> read_all(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text_file(e.path().string());
  return out;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p.string())); }

TEST(Cli, HelpListsCommands) {
  const Result r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* c : {"project", "trace", "hessdirs", "ensemble", "orthocheck", "bundle"})
    EXPECT_NE(r.out.find(c), std::string::npos) << c;
  const Result sub = run_cli({"project", "--help"});
  EXPECT_EQ(sub.code, 0);
  for (const char* f : {"--loss", "--mode", "--alpha", "--beta", "--res", "--seed", "--out", "--threads"})
    EXPECT_NE(sub.out.find(f), std::string::npos) << f;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"ensemble", "--loss", "symmetric:n=3", "--samples", "0"}).code, 1);
  EXPECT_EQ(run_cli({"hessdirs", "--loss", "nonsense:n=3"}).code, 1);
  EXPECT_EQ(run_cli({"hessdirs", "--loss", "symmetric:m=3"}).code, 1);
  EXPECT_EQ(run_cli({"project", "--loss", "symmetric:n=3", "--alpha", "1"}).code, 1);
  EXPECT_EQ(run_cli({"project", "--loss", "symmetric:n=3", "--mode", "pca"}).code, 1);
  EXPECT_EQ(run_cli({"trace"}).code, 1);
}

TEST(Cli, IoErrorExitCode) {
  const Result r = run_cli({"hessdirs", "--loss", "symmetric:n=3", "--out", "/proc/curvlens_nope"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("/proc/curvlens_nope"), std::string::npos);
  EXPECT_EQ(run_cli({"hessdirs", "--loss", "quadratic:diagfile=/nonexistent/d.csv"}).code, 3);
}

TEST(Cli, NumericalFailureExitCode) {
  const fs::path dir = fresh("numfail");
  const Result r = run_cli({"hessdirs", "--loss", "symmetric:n=400", "--tol", "1e-30",
                            "--max-iter", "1", "--krylov", "3", "--out", dir.string()});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, ProjectSinglePointGrid) {
  const fs::path dir = fresh("res1");
  const Result r = run_cli({"project", "--loss", "asymmetric:n=5,ntilde=8", "--res", "1", "--out",
                            dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable t = read_csv((dir / "grid.csv").string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][2], 0.0);  // L vanishes at the critical point
}

TEST(Cli, ProjectHessianModeShowsSaddle) {
  const fs::path dir = fresh("saddle");
  const Result r = run_cli({"project", "--loss", "asymmetric:n=900,ntilde=1000", "--mode", "hessian",
                            "--alpha", "-1:1", "--beta", "-1:1", "--res", "51", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto meta = read_json(dir / "grid.json");
  EXPECT_NEAR(meta["eigenvalues"]["max"].get<double>(), 1.0, 1e-8);
  EXPECT_NEAR(meta["eigenvalues"]["min"].get<double>(), -1.0, 1e-8);
  EXPECT_EQ(meta["direction_kind"], "hessian-directions");
  const CsvTable t = read_csv((dir / "grid.csv").string());
  ASSERT_EQ(t.rows.size(), 51u * 51u);
  auto at = [&](std::size_t i, std::size_t j) { return t.rows[i * 51 + j][2]; };
  EXPECT_GT(at(0, 25), at(25, 25));
  EXPECT_LT(at(25, 0), at(25, 25));
  EXPECT_NEAR(meta["principal_curvatures"]["kappa_plus"].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(meta["principal_curvatures"]["kappa_minus"].get<double>(), -1.0, 1e-6);
}

TEST(Cli, ProjectRandomModeRarelyShowsSaddle) {
  int saddles = 0;
  const fs::path dir = fresh("randmode");
  for (int seed = 1; seed <= 40; ++seed) {
    const Result r = run_cli({"project", "--loss", "asymmetric:n=900,ntilde=1000", "--res", "3",
                              "--seed", std::to_string(seed), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto k = read_json(dir / "grid.json")["principal_curvatures"];
    if (k["kappa_plus"].get<double>() * k["kappa_minus"].get<double>() < 0) ++saddles;
  }
  // Opposite signs occur in well under 1% of realizations; 3+ of 40 would be
  // a probability below 1e-3 even at 2%.
  EXPECT_LE(saddles, 2);
}

TEST(Cli, TraceCommands) {
  const fs::path dir = fresh("trace");
  Result r = run_cli({"trace", "--loss", "symmetric:n=500", "--method", "paired", "--samples", "1000",
                      "--seed", "7", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = read_json(dir / "trace.json");
  ASSERT_EQ(j["estimates"].size(), 2u);
  for (const auto& e : j["estimates"])
    EXPECT_LE(std::abs(e["estimate"].get<double>()), 3 * e["stderr"].get<double>());
  const CsvTable conv = read_csv((dir / "convergence.csv").string());
  EXPECT_EQ(conv.rows.size(), 1000u);

  r = run_cli({"trace", "--loss", "asymmetric:n=500,ntilde=800", "--method", "hutchinson",
               "--samples", "1000", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  j = read_json(dir / "trace.json");
  const auto& e = j["estimates"][0];
  EXPECT_LE(std::abs(e["estimate"].get<double>() - 600), 3 * e["stderr"].get<double>());
  EXPECT_EQ(j["config"]["method"], "hutchinson");
  EXPECT_FALSE(j["config"].contains("threads"));
}

TEST(Cli, HessdirsDiagfileAndWarning) {
  const fs::path dir = fresh("hessdirs");
  write_text_file((dir / "d.csv").string(), "5\n-3\n2\n");
  Result r = run_cli({"hessdirs", "--loss", "quadratic:diagfile=" + (dir / "d.csv").string(),
                      "--write-vectors", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(dir / "hessdirs.json");
  EXPECT_NEAR(j["max_eigenvalue"].get<double>(), 5.0, 1e-8);
  EXPECT_NEAR(j["min_eigenvalue"].get<double>(), -3.0, 1e-8);
  EXPECT_TRUE(fs::exists(dir / "eigvec_max.csv"));
  EXPECT_EQ(read_csv((dir / "eigvec_min.csv").string()).rows.size(), 3u);

  r = run_cli({"hessdirs", "--loss", "quadratic:diag=1;2;3", "--out", dir.string()});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(read_json(dir / "hessdirs.json")["opposite_sign_found"], false);
}

TEST(Cli, HessdirsOnMlpCheckpoint) {
  const fs::path dir = fresh("mlp");
  RngStream rng(3);
  const auto net = testing::random_net({2, 3, 2}, 12, rng, 1.0);  // 17 parameters
  save_checkpoint((dir / "net.json").string(), MlpCheckpoint{net.layers, net.theta, "tanh"});
  save_dataset_csv((dir / "train.csv").string(), net.data);
  const MlpMseLoss loss(net.layers, net.data);
  const DenseEigen e = sym_eigen(SymMatrix::symmetrized(testing::fd_hessian(loss, net.theta)));

  const Result r = run_cli({"hessdirs", "--loss",
                            "mlp:ckpt=" + (dir / "net.json").string() + ",data=" +
                                (dir / "train.csv").string(),
                            "--tol", "1e-6", "--out", dir.string()});
  ASSERT_TRUE(r.code == 0 || r.code == 4) << r.err;
  const auto j = read_json(dir / "hessdirs.json");
  EXPECT_LE(testing::rel_err(j["max_eigenvalue"].get<double>(), e.values(0)), 1e-4);
  if (r.code == 0)
    EXPECT_LE(testing::rel_err(j["min_eigenvalue"].get<double>(), e.values(e.values.size() - 1)), 1e-4);
}

TEST(Cli, EnsembleAndOrthocheck) {
  const fs::path dir = fresh("ens");
  Result r = run_cli({"ensemble", "--loss", "symmetric:n=500", "--samples", "20000", "--out",
                      dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"ensemble.csv", "hist_kplus.csv", "hist_kminus.csv", "ensemble.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto j = read_json(dir / "ensemble.json");
  const double p = j["misidentification"]["p_same_sign_gaussian"].get<double>();
  EXPECT_GE(p, 0.23);
  EXPECT_LE(p, 0.27);

  r = run_cli({"orthocheck", "--dim", "100", "--samples", "100000", "--eps", "0.1", "--out",
               dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable t = read_csv((dir / "tail.csv").string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_LE(std::abs(t.rows[0][1] - 0.3173105), 3 * t.rows[0][2]);
}

TEST(Cli, OutputDirectoryFromEnvironmentOverriddenByFlag) {
  const fs::path env_dir = fresh("env");
  const fs::path flag_dir = fresh("flag");
  ::setenv(cli::kOutputDirEnv, env_dir.string().c_str(), 1);
  EXPECT_EQ(run_cli({"hessdirs", "--loss", "symmetric:n=3"}).code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "hessdirs.json"));
  EXPECT_EQ(run_cli({"hessdirs", "--loss", "symmetric:n=3", "--out", flag_dir.string()}).code, 0);
  EXPECT_TRUE(fs::exists(flag_dir / "hessdirs.json"));
  ::unsetenv(cli::kOutputDirEnv);
}

TEST(Cli, MetadataCarriesReproductionInfo) {
  const fs::path dir = fresh("meta");
  ASSERT_EQ(run_cli({"project", "--loss", "symmetric:n=4", "--res", "5", "--seed", "99", "--out",
                     dir.string()})
                .code,
            0);
  const auto j = read_json(dir / "grid.json");
  EXPECT_EQ(j["command"], "project");
  EXPECT_EQ(j["seed"], 99);
  EXPECT_EQ(j["version"], version_string());
  EXPECT_EQ(j["config"]["res"], "5");
  EXPECT_EQ(j["config"]["loss"], "symmetric:n=4");
  EXPECT_FALSE(j["config"].contains("out"));
}

// Every command, rerun with identical flags, must produce identical bytes
// whatever the worker count.
TEST(Cli, DeterministicAcrossThreadCounts) {
  const fs::path base = fresh("determinism");
  write_text_file((base / "d.csv").string(), "5\n-3\n2\n");
  const std::vector<std::vector<std::string>> commands = {
      {"project", "--loss", "asymmetric:n=20,ntilde=30", "--res", "9", "--seed", "3"},
      {"project", "--loss", "asymmetric:n=20,ntilde=30", "--mode", "hessian", "--res", "9"},
      {"trace", "--loss", "asymmetric:n=30,ntilde=40", "--samples", "64", "--seed", "5"},
      {"trace", "--loss", "symmetric:n=30", "--method", "hutchinson", "--dist", "rademacher",
       "--samples", "64"},
      {"hessdirs", "--loss", "quadratic:diagfile=" + (base / "d.csv").string(), "--write-vectors"},
      {"ensemble", "--loss", "symmetric:n=30", "--samples", "300", "--seed", "8"},
      {"orthocheck", "--dim", "50", "--samples", "500", "--eps", "0.1,0.2"},
  };
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<std::map<std::string, std::string>> outputs;
    std::vector<std::string> stdouts;
    for (const char* threads : {"1", "1", "3"}) {
      const fs::path dir = base / ("c" + std::to_string(c) + "_t" + threads + "_" +
                                   std::to_string(outputs.size()));
      auto args = commands[c];
      args.insert(args.end(), {"--threads", threads, "--out", dir.string()});
      const Result r = run_cli(args);
      ASSERT_EQ(r.code, 0) << commands[c][0] << ": " << r.err;
      outputs.push_back(read_all(dir));
      std::string s = r.out;
      // The output path is echoed on stdout; normalize it away.
      for (auto pos = s.find(dir.string()); pos != std::string::npos; pos = s.find(dir.string()))
        s.replace(pos, dir.string().size(), "<out>");
      stdouts.push_back(s);
    }
    ASSERT_FALSE(outputs[0].empty());
    EXPECT_EQ(outputs[0], outputs[1]) << commands[c][0];
    EXPECT_EQ(outputs[0], outputs[2]) << commands[c][0];
    EXPECT_EQ(stdouts[0], stdouts[2]) << commands[c][0];
  }
}

#ifdef CURVLENS_CLI_BINARY
TEST(CliProcess, BinaryExitCodesAndDeterminism) {
  const fs::path base = fresh("process");
  const std::string bin = CURVLENS_CLI_BINARY;
  auto sh = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(sh("--help"), 0);
  EXPECT_EQ(sh("ensemble --loss symmetric:n=3 --samples 0"), 1);
  EXPECT_EQ(sh("hessdirs --loss quadratic:diag='1;2;3' --out " + (base / "w").string()), 4);
  const std::string cmd = "ensemble --loss asymmetric:n=20,ntilde=25 --samples 200 --seed 4 ";
  ASSERT_EQ(sh(cmd + "--threads 1 --out " + (base / "a").string()), 0);
  ASSERT_EQ(sh(cmd + "--threads 2 --out " + (base / "b").string()), 0);
  EXPECT_EQ(read_all(base / "a"), read_all(base / "b"));
}
#endif

}  // namespace
}  // namespace curvlens
