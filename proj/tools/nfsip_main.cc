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

// nfsip: experiment entry point.
//
//   nfsip train     --config FILE [--key value ...]
//   nfsip matrix    --config FILE [--key value ...]
//   nfsip gradcheck [--draws N] [--seed S]
//   nfsip replay    --config FILE --checkpoint FILE [--run K] [--replay_seed S]

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "nfsip/config.h"
#include "nfsip/experiment.h"
#include "nfsip/gradcheck.h"

namespace {

using nfsip::cli::ConfigError;
using nfsip::cli::ExperimentConfig;
using nfsip::cli::KeyValues;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void AddConfigFlags(CLI::App* app, ConfigFlags* flags) {
  app->add_option("--config", flags->config_path, "key = value config file");
  for (const std::string& key : nfsip::cli::ConfigKeys()) {
    app->add_option("--" + key, flags->values[key]);
  }
}

ExperimentConfig LoadConfig(const CLI::App& app, const ConfigFlags& flags,
                            const std::vector<std::string>& required) {
  KeyValues file_values;
  if (!flags.config_path.empty()) {
    file_values = nfsip::cli::ReadConfigFile(flags.config_path);
  }
  KeyValues overrides;
  for (const std::string& key : nfsip::cli::ConfigKeys()) {
    if (app.count("--" + key) > 0) overrides.emplace_back(key, flags.values.at(key));
  }
  return nfsip::cli::BuildConfig(file_values, overrides, required,
                                 std::getenv("NFSIP_OUT"));
}

int RunGradcheck(int draws, std::uint64_t seed) {
  nfsip::gradcheck::GradCheckConfig config;
  config.draws = draws;
  config.seed = seed;
  bool ok = true;
  for (const auto& check : nfsip::gradcheck::RunGradientChecks(config)) {
    std::cout << check.name << " max_relative_error "
              << nfsip::cli::FormatMetric(check.max_relative_error) << " draws "
              << check.draws << (check.passed ? " ok" : " FAIL") << "\n";
    ok = ok && check.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural fictitious self-play with self-imitation", "nfsip"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run seeded training runs");
  AddConfigFlags(train, &train_flags);

  ConfigFlags matrix_flags;
  CLI::App* matrix =
      app.add_subcommand("matrix", "self-play on an identical-interest matrix game");
  AddConfigFlags(matrix, &matrix_flags);

  int draws = 20;
  std::uint64_t grad_seed = 7;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--draws", draws)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", grad_seed);

  ConfigFlags replay_flags;
  std::string checkpoint;
  int replay_run = 0;
  std::uint64_t replay_seed = 1;
  CLI::App* replay =
      app.add_subcommand("replay", "print a trajectory log from a checkpoint");
  AddConfigFlags(replay, &replay_flags);
  replay->add_option("--checkpoint", checkpoint)->required();
  replay->add_option("--run", replay_run)->check(CLI::NonNegativeNumber);
  replay->add_option("--replay_seed", replay_seed);

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) {
      const ExperimentConfig config = LoadConfig(*train, train_flags, {"algo"});
      nfsip::cli::RunExperiment(config, &std::cout);
      std::cout << "metrics written to " << config.out_dir << "\n";
    } else if (*matrix) {
      const ExperimentConfig config = LoadConfig(*matrix, matrix_flags, {"algo"});
      nfsip::cli::RunMatrixSuite(config, &std::cout);
    } else if (*gradcheck) {
      return RunGradcheck(draws, grad_seed);
    } else if (*replay) {
      const ExperimentConfig config = LoadConfig(*replay, replay_flags, {});
      nfsip::cli::Replay(config, checkpoint, replay_run, replay_seed, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
