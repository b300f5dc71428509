// Copyright 2026 The NFSIP Authors. All rights reserved.
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

#include "nfsip/experiment.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace nfsip::cli {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("nfsip_experiment_test_" + std::to_string(::getpid())) /
                       name;
  fs::remove_all(dir);
  return dir;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> Lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  for (std::string cell; std::getline(s, cell, ',');) out.push_back(cell);
  return out;
}

ExperimentConfig TinyExperiment(const fs::path& out) {
  ExperimentConfig c = BuildConfig({{"algo", "nfsip"},
                                    {"grid", "3x3"},
                                    {"agents", "2"},
                                    {"tasks", "2"},
                                    {"horizon", "10"},
                                    {"episodes", "30"},
                                    {"runs", "2"},
                                    {"hidden", "8,8"},
                                    {"warmup", "16"},
                                    {"batch_size", "8"},
                                    {"avg_window", "4"},
                                    {"out", out.string()}},
                                   {});
  return c;
}

TEST(FormatMetricTest, SixSignificantDigits) {
  EXPECT_EQ(FormatMetric(1.0 / 3.0), "0.333333");
  EXPECT_EQ(FormatMetric(20.0), "20");
  EXPECT_EQ(FormatMetric(123456789.0), "1.23457e+08");
  EXPECT_EQ(FormatMetric(0.0), "0");
}

TEST(ExperimentTest, PathsAndSeeds) {
  ExperimentConfig c = TinyExperiment("out");
  c.seed = 40;
  EXPECT_EQ(RunSeed(c, 0), 40u);
  EXPECT_EQ(RunSeed(c, 3), 43u);
  EXPECT_EQ(fs::path(RunCsvPath(c, 1)), fs::path("out") / "nfsip_run1.csv");
  EXPECT_EQ(fs::path(AggregateCsvPath(c)), fs::path("out") / "nfsip_aggregate.csv");
  EXPECT_EQ(fs::path(CheckpointPath(c, 0, 10)),
            fs::path("out") / "nfsip_run0_ep10.ckpt");
}

TEST(ExperimentTest, WritesPerRunAndAggregateFiles) {
  const fs::path dir = FreshDir("files");
  const ExperimentConfig c = TinyExperiment(dir);
  const std::vector<RunMetrics> runs = RunExperiment(c);
  ASSERT_EQ(runs.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    const auto lines = Lines(RunCsvPath(c, k));
    ASSERT_EQ(lines.size(), 31u);
    EXPECT_EQ(lines[0], "run,episode,social_welfare,running_avg,seconds");
    for (int e = 1; e <= 30; ++e) {
      const auto cells = Split(lines[e]);
      ASSERT_EQ(cells.size(), 5u);
      EXPECT_EQ(cells[0], std::to_string(k));
      EXPECT_EQ(cells[1], std::to_string(e));
      EXPECT_EQ(cells[2], FormatMetric(runs[k].welfare[e - 1]));
      EXPECT_EQ(cells[4], "0");
    }
  }
  const auto agg = Lines(AggregateCsvPath(c));
  ASSERT_EQ(agg.size(), 31u);
  EXPECT_EQ(agg[0], "episode,mean_welfare,var_welfare,mean_running_avg,var_running_avg");
  for (int e = 1; e <= 30; ++e) {
    const double w0 = runs[0].welfare[e - 1];
    const double w1 = runs[1].welfare[e - 1];
    const double mean = (w0 + w1) / 2;
    const double var = ((w0 - mean) * (w0 - mean) + (w1 - mean) * (w1 - mean)) / 2;
    const auto cells = Split(agg[e]);
    EXPECT_EQ(cells[0], std::to_string(e));
    EXPECT_EQ(cells[1], FormatMetric(mean));
    EXPECT_EQ(cells[2], FormatMetric(var));
  }
}

TEST(ExperimentTest, RunningAverageMatchesWindowMean) {
  const fs::path dir = FreshDir("window");
  ExperimentConfig c = TinyExperiment(dir);
  c.runs = 1;
  const std::vector<RunMetrics> runs = RunExperiment(c);
  const RunMetrics& m = runs[0];
  for (std::size_t e = 0; e < m.welfare.size(); ++e) {
    const std::size_t first = e + 1 >= 4 ? e + 1 - 4 : 0;
    double sum = 0.0;
    for (std::size_t i = first; i <= e; ++i) sum += m.welfare[i];
    EXPECT_NEAR(m.running_avg[e], sum / static_cast<double>(e + 1 - first), 1e-9);
  }
}

TEST(ExperimentTest, SingleRunHasZeroVariance) {
  const fs::path dir = FreshDir("single");
  ExperimentConfig c = TinyExperiment(dir);
  c.runs = 1;
  RunExperiment(c);
  const auto agg = Lines(AggregateCsvPath(c));
  for (std::size_t e = 1; e < agg.size(); ++e) {
    const auto cells = Split(agg[e]);
    EXPECT_EQ(cells[2], "0");
    EXPECT_EQ(cells[4], "0");
  }
}

TEST(ExperimentTest, RerunIsByteIdentical) {
  const fs::path a = FreshDir("rerun_a");
  const fs::path b = FreshDir("rerun_b");
  ExperimentConfig ca = TinyExperiment(a);
  ExperimentConfig cb = TinyExperiment(b);
  cb.threads = 2;  // thread count must not matter
  RunExperiment(ca);
  RunExperiment(cb);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(Slurp(RunCsvPath(ca, k)), Slurp(RunCsvPath(cb, k)));
  }
  EXPECT_EQ(Slurp(AggregateCsvPath(ca)), Slurp(AggregateCsvPath(cb)));
}

TEST(ExperimentTest, UnwritableDirectoryFailsBeforeTraining) {
  const fs::path dir = FreshDir("blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  ExperimentConfig c = TinyExperiment(dir / "file" / "sub");
  EXPECT_THROW(RunExperiment(c), std::runtime_error);
  EXPECT_FALSE(fs::exists(dir / "file" / "sub"));
}

TEST(ExperimentTest, CheckpointsAndReplay) {
  const fs::path dir = FreshDir("ckpt");
  ExperimentConfig c = TinyExperiment(dir);
  c.runs = 1;
  c.checkpoint_every = 10;
  RunExperiment(c);
  for (int e : {10, 20, 30}) EXPECT_TRUE(fs::exists(CheckpointPath(c, 0, e)));
  EXPECT_FALSE(fs::exists(CheckpointPath(c, 0, 5)));

  std::ostringstream first;
  std::ostringstream second;
  const double w1 = Replay(c, CheckpointPath(c, 0, 30), 0, 77, first);
  const double w2 = Replay(c, CheckpointPath(c, 0, 30), 0, 77, second);
  EXPECT_EQ(w1, w2);
  EXPECT_EQ(first.str(), second.str());
  const std::string text = first.str();
  EXPECT_NE(text.find("welfare " + FormatMetric(w1) + "\n"), std::string::npos);
  EXPECT_THROW(Replay(c, (dir / "missing.ckpt").string(), 0, 1, first),
               std::runtime_error);
}

TEST(ExperimentTest, MatrixSuiteWritesOneRowPerRun) {
  const fs::path dir = FreshDir("matrix");
  ExperimentConfig c = BuildConfig({{"algo", "nfsp"},
                                    {"episodes", "100"},
                                    {"runs", "2"},
                                    {"out", dir.string()}},
                                   {});
  const MatrixSuiteResult r = RunMatrixSuite(c);
  ASSERT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.oracle_mass.size(), 2u);
  for (double m : r.oracle_mass) EXPECT_GE(m, 0.99);
  const auto lines = Lines(dir / "matrix_nfsp.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "run,episodes_to_threshold,min_mass");
}

}  // namespace
}  // namespace nfsip::cli
