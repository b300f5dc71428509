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

// Experiment configuration.
//
// Files are line oriented:
//   # comment
//   key = value
// Command-line flags `--key value` override file values. Unknown keys,
// malformed values and out-of-range values are reported per field.

#ifndef NFSIP_CONFIG_H_
#define NFSIP_CONFIG_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nfsip/envs.h"
#include "nfsip/trainer.h"

namespace nfsip::cli {

struct ExperimentConfig {
  trainer::TrainerConfig trainer;
  envs::DomainSpec domain = envs::DomainSpec::BoxPushing(envs::Variant::kV1);
  envs::LayoutMode layout = envs::LayoutMode::kFixed;
  int episodes = 2000;
  int runs = 5;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  int checkpoint_every = 0;
  int threads = 1;
  int avg_window = 100;
  // When false the `seconds` metrics column is written as 0 so reruns are
  // byte-identical.
  bool wall_clock = false;

  // Matrix-game suite: two players, row-major payoffs.
  int matrix_actions = 2;
  std::vector<double> payoffs = {1.0, 0.0, 0.0, 0.0};
  int matrix_eval_interval = 25;
  double matrix_threshold = 0.9;

  bool operator==(const ExperimentConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Parses `key = value` lines. Throws ConfigError on lines without '='.
KeyValues ParseConfigText(std::string_view text);
KeyValues ReadConfigFile(const std::string& path);

// Every accepted key, in serialization order.
std::vector<std::string> ConfigKeys();

// Applies `file_values`, then `overrides`, on top of the defaults. Domain
// defaults (agent and task counts, horizon) follow `domain` and `grid`
// unless set explicitly. `env_out` is the fallback output directory used
// when no `out` key is given (nullptr or empty: keep the default).
ExperimentConfig BuildConfig(const KeyValues& file_values,
                             const KeyValues& overrides,
                             const std::vector<std::string>& required_keys = {},
                             const char* env_out = nullptr);

// `key = value` text that BuildConfig maps back to an equal config.
std::string SerializeConfig(const ExperimentConfig& config);

}  // namespace nfsip::cli

#endif  // NFSIP_CONFIG_H_
