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

// Seeded experiment runs and their metrics files.
//
// Per run k:   <out>/<algo>_run<k>.csv
//              run,episode,social_welfare,running_avg,seconds
// Aggregate:   <out>/<algo>_aggregate.csv
//              episode,mean_welfare,var_welfare,mean_running_avg,var_running_avg
// Variances are population variances across runs. Values are printed with
// 6 significant digits.

#ifndef NFSIP_EXPERIMENT_H_
#define NFSIP_EXPERIMENT_H_

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "nfsip/config.h"
#include "nfsip/envs.h"
#include "nfsip/matrix_games.h"
#include "nfsip/trainer.h"

namespace nfsip::cli {

struct RunMetrics {
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<double> welfare;      // per episode
  std::vector<double> running_avg;  // mean of the last avg_window episodes
  std::vector<double> seconds;      // elapsed; 0 unless wall_clock
  trainer::Counters counters;
};

std::uint64_t RunSeed(const ExperimentConfig& config, int run);

// Grid world for `config.domain`; a fixed layout is drawn from `run_seed`.
std::unique_ptr<envs::Environment> MakeEnvironment(const ExperimentConfig& config,
                                                   std::uint64_t run_seed);

std::string RunCsvPath(const ExperimentConfig& config, int run);
std::string AggregateCsvPath(const ExperimentConfig& config);
std::string CheckpointPath(const ExperimentConfig& config, int run, int episode);

// Creates `dir` if needed and verifies a file can be written there. Throws
// std::runtime_error otherwise.
void PrepareOutputDir(const std::string& dir);

// printf("%.6g").
std::string FormatMetric(double value);

// One seeded run. Appends to the run's CSV as episodes finish and writes
// checkpoints every `checkpoint_every` episodes.
RunMetrics RunSingle(const ExperimentConfig& config, int run);

// Validates the output directory, executes `config.runs` runs (on up to
// `config.threads` threads) and writes the aggregate file.
std::vector<RunMetrics> RunExperiment(const ExperimentConfig& config,
                                      std::ostream* progress = nullptr);

void WriteAggregate(const ExperimentConfig& config,
                    const std::vector<RunMetrics>& runs);

// Plays one episode of the configured grid world with the average policy
// stored in `checkpoint_path`, printing one trajectory line per step.
// `run` selects the layout, `seed` the action and dynamics draws. Returns
// the episode welfare.
double Replay(const ExperimentConfig& config, const std::string& checkpoint_path,
              int run, std::uint64_t seed, std::ostream& out);

struct MatrixSuiteResult {
  std::vector<double> oracle_mass;  // per player, after 1000 iterations
  std::vector<matrix_games::SelfPlayResult> runs;
};

// Neural self-play on the configured payoff matrix for every run, next to
// the fictitious-play reference. Writes <out>/matrix_<algo>.csv.
MatrixSuiteResult RunMatrixSuite(const ExperimentConfig& config,
                                 std::ostream* progress = nullptr);

}  // namespace nfsip::cli

#endif  // NFSIP_EXPERIMENT_H_
