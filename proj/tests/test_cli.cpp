// SPDX-License-Identifier: Apache-2.0
#include "zext/cli/config.hpp"
#include "zext/cli/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace zext;
using namespace zext::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("slowfast_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string bin() {
  const char* b = std::getenv("SLOWFAST_BIN");
  return b ? b : "";
}

int run(const std::string& args) {
  const int rc = std::system((bin() + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// A small, fast centered config.
ExperimentConfig small(const fs::path& out) {
  ExperimentConfig c;
  c.eps = {1e-2, 1e-3, 3e-4};
  c.n = 60;
  c.seed = 42;
  c.grid.points = 4;
  c.grid.limit_steps = 2000;
  c.estimators.tau_bar_samples = 2000;
  c.estimators.sigma_samples = 500;
  c.estimators.sigma_n = 200;
  c.estimators.gk_samples = 200;
  c.estimators.gk_lags = 50;
  c.estimators.h_samples = 500;
  c.out = out.string();
  c.jobs = 1;
  return c;
}

}  // namespace

TEST(Cli, ConfigDefaultsAndRoundTrip) {
  auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.pipeline, LimitKind::Centered);
  EXPECT_EQ(c.eps.size(), 4U);
  EXPECT_TRUE(c.spec.centered);
  EXPECT_TRUE(validate(c).ok()) << validate(c).to_json().dump();
  auto again = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
  EXPECT_EQ(c.report_times().back(), 1.0);
  EXPECT_EQ(c.report_times().size(), c.grid.points);
}

TEST(Cli, ConfigErrorsCarryLineNumbers) {
  auto dir = scratch("lines");
  auto syntax = write_text(dir / "syntax.json", "{\n  \"n\": 10,\n  \"eps\": [1e-3,,]\n}\n");
  try {
    load_config(syntax.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("syntax.json:3:"), std::string::npos) << e.what();
  }
  auto bad = write_text(dir / "bad.json", "{\n  \"seed\": 1,\n  \"pipeline\": \"centered\",\n  \"n\": \"many\"\n}\n");
  try {
    load_config(bad.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:4:"), std::string::npos) << e.what();
  }
  auto pipe = write_text(dir / "pipe.json", "{\n  \"pipeline\": \"sideways\"\n}\n");
  EXPECT_THROW(load_config(pipe.string()), ConfigError);
}

TEST(Cli, ValidateReports) {
  ExperimentConfig c;
  c.model.kind = "billiard";
  c.model.table.obstacles = {{0.0, 0.0, 0.4}, {0.5, 0.5, 0.35}};
  auto overlap = validate(c);
  EXPECT_FALSE(overlap.ok());
  EXPECT_FALSE(overlap.checks[0].ok);
  EXPECT_EQ(overlap.checks[0].name, "table_disjoint");

  c.model.table.obstacles.clear();
  auto empty = validate(c);
  EXPECT_FALSE(empty.ok());
  bool horizon_failed = false;
  for (const auto& ch : empty.checks) horizon_failed |= ch.name == "finite_horizon" && !ch.ok;
  EXPECT_TRUE(horizon_failed);

  ExperimentConfig toy;
  EXPECT_TRUE(validate(toy).ok());

  ExperimentConfig integ;
  integ.pipeline = LimitKind::Integrable;
  integ.spec = default_spec(LimitKind::Integrable);
  EXPECT_TRUE(validate(integ).ok()) << validate(integ).to_json().dump();
  integ.spec.envelope_power = 1.0;
  EXPECT_FALSE(validate(integ).ok());
  integ.out = scratch("integ").string();
  EXPECT_THROW(run_pipeline(integ), ConfigError);

  ExperimentConfig dup;
  dup.eps = {1e-3, 1e-3};
  EXPECT_FALSE(validate(dup).ok());
}

TEST(Cli, EnsembleCsvRoundTrip) {
  stats::Ensemble e;
  e.times = {0.5, 1.0};
  for (int i = 0; i < 3; ++i) {
    Vec a(2);
    a << 0.1 * i, 1.0 / 3.0;
    Vec b(2);
    b << -1e-300, 12345.678;
    e.samples.push_back({a, b});
  }
  auto dir = scratch("csv");
  write_file(dir / "e.csv", ensemble_csv(e));
  auto r = read_ensemble_csv(dir / "e.csv");
  ASSERT_EQ(r.samples.size(), 3U);
  EXPECT_EQ(r.times, e.times);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(r.samples[i][k], e.samples[i][k]);
  }
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, PipelineArtifactsAndManifest) {
  auto dir = scratch("artifacts");
  auto c = small(dir);
  auto r = run_pipeline(c);
  EXPECT_EQ(r.reports.size(), c.eps.size() * c.grid.points);
  ASSERT_TRUE(r.fit.has_value());
  for (std::size_t k = 0; k < c.eps.size(); ++k) {
    EXPECT_TRUE(fs::exists(dir / dynamics_file(k)));
    EXPECT_TRUE(fs::exists(dir / sup_file(k)));
  }
  for (const char* f : {"limit.csv", "estimates.json", "reports.json", "summary.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  std::size_t listed = 0;
  for (const auto& f : manifest["files"]) {
    EXPECT_EQ(f["sha256"], sha256_hex(read_file(dir / f["path"].get<std::string>())));
    ++listed;
  }
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(dir)) on_disk += e.path().filename() != "manifest.json";
  EXPECT_EQ(listed, on_disk);
  EXPECT_EQ(manifest["master_seed"], 42);

  // compare re-reads the ensembles and reproduces the reports.
  const auto before = read_file(dir / "reports.json");
  run_compare(c);
  EXPECT_EQ(read_file(dir / "reports.json"), before);
}

TEST(Cli, DeterministicAcrossRunsAndJobs) {
  auto a = scratch("det_a");
  auto b = scratch("det_b");
  auto ca = small(a);
  auto cb = small(b);
  cb.jobs = 3;
  run_pipeline(ca);
  run_pipeline(cb);
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() == ".csv") {
      EXPECT_EQ(read_file(e.path()), read_file(b / e.path().filename())) << e.path();
    }
  }
  EXPECT_EQ(read_file(a / "reports.json"), read_file(b / "reports.json"));
}

TEST(Cli, BinaryDefaultsAndExitCodes) {
  if (bin().empty()) GTEST_SKIP() << "SLOWFAST_BIN not set";
  auto dir = scratch("bin");
  EXPECT_EQ(run("pipeline --pipeline centered --model toy --n 60 --jobs 1 --out " + dir.string()), 0);
  int dyn = 0;
  for (const auto& e : fs::directory_iterator(dir)) dyn += e.path().filename().string().rfind("dynamics_eps", 0) == 0;
  EXPECT_EQ(dyn, 4);
  EXPECT_TRUE(fs::exists(dir / "reports.json"));

  auto bad = write_text(dir / "integ.json",
                        "{\n  \"pipeline\": \"integrable\",\n  \"spec\": {\"profile\": \"const\", \"envelope_power\": 0.5}\n}\n");
  EXPECT_EQ(run("pipeline --config " + bad.string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run("validate --model toy"), 0);
  EXPECT_EQ(run("validate --config " + bad.string() + " --strict"), 1);
  EXPECT_NE(run("frobnicate"), 0);

  // SLOWFAST_OUT takes precedence over --out.
  auto env_dir = scratch("env");
  const std::string cmd = "SLOWFAST_OUT=" + env_dir.string() + " " + bin() +
                          " estimate --n 60 --jobs 1 --out " + (dir / "ignored").string() + " >/dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(env_dir / "estimates.json"));
  EXPECT_FALSE(fs::exists(dir / "ignored"));
}
