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

#include "nfsip/config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <system_error>

namespace nfsip::cli {
namespace {

using envs::Domain;
using envs::DomainSpec;
using envs::Variant;
using trainer::Algorithm;

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string JoinErrors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration";
  for (const std::string& e : errors) out += "\n  " + e;
  return out;
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T ParseInteger(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) {
    throw std::invalid_argument("integer out of range: '" + text + "'");
  }
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw std::invalid_argument("expected an integer, got '" + text + "'");
  }
  return value;
}

double ParseDouble(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(value)) {
    throw std::invalid_argument("expected a finite number, got '" + text + "'");
  }
  return value;
}

bool ParseBool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) items.push_back(Trim(item));
  if (items.empty()) throw std::invalid_argument("expected a comma-separated list");
  return items;
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

int PositiveInt(const std::string& v) {
  const int x = ParseInteger<int>(v);
  Require(x >= 1, "must be >= 1");
  return x;
}

int NonNegativeInt(const std::string& v) {
  const int x = ParseInteger<int>(v);
  Require(x >= 0, "must be >= 0");
  return x;
}

std::int64_t PositiveInt64(const std::string& v) {
  const auto x = ParseInteger<std::int64_t>(v);
  Require(x >= 1, "must be >= 1");
  return x;
}

double UnitInterval(const std::string& v) {
  const double x = ParseDouble(v);
  Require(x >= 0.0 && x <= 1.0, "must lie in [0, 1]");
  return x;
}

double PositiveDouble(const std::string& v) {
  const double x = ParseDouble(v);
  Require(x > 0.0, "must be > 0");
  return x;
}

template <typename E>
E ParseEnum(const std::string& v,
            const std::vector<std::pair<std::string, E>>& names) {
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (name == v) return value;
    allowed += (allowed.empty() ? "" : "|") + name;
  }
  throw std::invalid_argument("expected one of " + allowed + ", got '" + v + "'");
}

template <typename E>
std::string EnumName(E value, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

const std::vector<std::pair<std::string, Algorithm>> kAlgorithms = {
    {"nfsp", Algorithm::kNfsp}, {"nfsip", Algorithm::kNfsip},
    {"acsil", Algorithm::kAcSil}};
const std::vector<std::pair<std::string, Domain>> kDomains = {
    {"box", Domain::kBoxPushing}, {"fire", Domain::kFireFighting},
    {"sar", Domain::kSearchRescue}};
const std::vector<std::pair<std::string, Variant>> kVariants = {
    {"v1", Variant::kV1}, {"v2", Variant::kV2}};
const std::vector<std::pair<std::string, envs::LayoutMode>> kLayouts = {
    {"fixed", envs::LayoutMode::kFixed}, {"random", envs::LayoutMode::kRandom}};
const std::vector<std::pair<std::string, trainer::EtaSchedule>> kEtaSchedules = {
    {"fixed", trainer::EtaSchedule::kFixed},
    {"harmonic", trainer::EtaSchedule::kHarmonic}};
const std::vector<std::pair<std::string, trainer::DecayUnit>> kDecayUnits = {
    {"steps", trainer::DecayUnit::kSteps},
    {"episodes", trainer::DecayUnit::kEpisodes}};
const std::vector<std::pair<std::string, neural::OptimizerKind>> kOptimizers = {
    {"adam", neural::OptimizerKind::kAdam}, {"sgd", neural::OptimizerKind::kSgd}};
const std::vector<std::pair<std::string, agents::BaselineMode>> kBaselines = {
    {"uniform", agents::BaselineMode::kUniform},
    {"policy", agents::BaselineMode::kPolicyWeighted}};
const std::vector<std::pair<std::string, agents::SilValueGradient>> kSilGradients = {
    {"exact", agents::SilValueGradient::kExact},
    {"sampled", agents::SilValueGradient::kSampledAction}};

std::pair<int, int> ParseGrid(const std::string& v) {
  const auto x = v.find('x');
  Require(x != std::string::npos && v.find('x', x + 1) == std::string::npos,
          "expected WIDTHxHEIGHT, got '" + v + "'");
  const int w = ParseInteger<int>(v.substr(0, x));
  const int h = ParseInteger<int>(v.substr(x + 1));
  Require(w >= 1 && h >= 1, "grid dimensions must be >= 1");
  return {w, h};
}

struct KeySpec {
  std::string name;
  // Domain-shaping keys are applied before the domain defaults.
  bool structural = false;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  // Returns "" for keys that do not apply to the configured domain.
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string IntList(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + std::to_string(values[i]);
  }
  return out;
}

std::string DoubleList(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + FormatDouble(values[i]);
  }
  return out;
}

const std::vector<KeySpec>& KeyTable() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<KeySpec> table = {
      {"algo", false,
       [](C& c, S v) { c.trainer.algo = ParseEnum(v, kAlgorithms); },
       [](const C& c) { return EnumName(c.trainer.algo, kAlgorithms); }},
      {"domain", true,
       [](C& c, S v) { c.domain.domain = ParseEnum(v, kDomains); },
       [](const C& c) { return EnumName(c.domain.domain, kDomains); }},
      {"variant", true,
       [](C& c, S v) { c.domain.variant = ParseEnum(v, kVariants); },
       [](const C& c) { return EnumName(c.domain.variant, kVariants); }},
      {"grid", true,
       [](C& c, S v) {
         const auto [w, h] = ParseGrid(v);
         c.domain.width = w;
         c.domain.height = h;
       },
       [](const C& c) {
         return std::to_string(c.domain.width) + "x" +
                std::to_string(c.domain.height);
       }},
      {"agents", false,
       [](C& c, S v) {
         const int n = PositiveInt(v);
         switch (c.domain.domain) {
           case Domain::kBoxPushing: c.domain.generic_agents = n; break;
           case Domain::kFireFighting: c.domain.firetrucks = n; break;
           case Domain::kSearchRescue:
             throw std::invalid_argument(
                 "not used by sar; set ambulances and firetrucks");
         }
       },
       [](const C& c) {
         return c.domain.domain == Domain::kBoxPushing
                    ? std::to_string(c.domain.generic_agents)
                    : std::string();
       }},
      {"ambulances", false,
       [](C& c, S v) {
         Require(c.domain.domain == Domain::kSearchRescue, "only used by sar");
         c.domain.ambulances = PositiveInt(v);
       },
       [](const C& c) {
         return c.domain.domain == Domain::kSearchRescue
                    ? std::to_string(c.domain.ambulances)
                    : std::string();
       }},
      {"firetrucks", false,
       [](C& c, S v) {
         Require(c.domain.domain != Domain::kBoxPushing, "not used by box");
         c.domain.firetrucks = PositiveInt(v);
       },
       [](const C& c) {
         return c.domain.domain != Domain::kBoxPushing
                    ? std::to_string(c.domain.firetrucks)
                    : std::string();
       }},
      {"tasks", false, [](C& c, S v) { c.domain.tasks = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.domain.tasks); }},
      {"horizon", false, [](C& c, S v) { c.domain.horizon = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.domain.horizon); }},
      {"reward", false,
       [](C& c, S v) { c.domain.task_reward = ParseDouble(v); },
       [](const C& c) { return FormatDouble(c.domain.task_reward); }},
      {"escalation", false,
       [](C& c, S v) { c.domain.escalation_probability = UnitInterval(v); },
       [](const C& c) { return FormatDouble(c.domain.escalation_probability); }},
      {"layout", false, [](C& c, S v) { c.layout = ParseEnum(v, kLayouts); },
       [](const C& c) { return EnumName(c.layout, kLayouts); }},
      {"episodes", false, [](C& c, S v) { c.episodes = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.episodes); }},
      {"runs", false, [](C& c, S v) { c.runs = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.runs); }},
      {"seed", false,
       [](C& c, S v) { c.seed = ParseInteger<std::uint64_t>(v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"eta", false, [](C& c, S v) { c.trainer.eta = UnitInterval(v); },
       [](const C& c) { return FormatDouble(c.trainer.eta); }},
      {"eta_schedule", false,
       [](C& c, S v) { c.trainer.eta_schedule = ParseEnum(v, kEtaSchedules); },
       [](const C& c) { return EnumName(c.trainer.eta_schedule, kEtaSchedules); }},
      {"eta_decay_episodes", false,
       [](C& c, S v) { c.trainer.eta_decay_episodes = PositiveDouble(v); },
       [](const C& c) { return FormatDouble(c.trainer.eta_decay_episodes); }},
      {"epsilon", false, [](C& c, S v) { c.trainer.epsilon = UnitInterval(v); },
       [](const C& c) { return FormatDouble(c.trainer.epsilon); }},
      {"epsilon_decay", false,
       [](C& c, S v) {
         const double x = ParseDouble(v);
         Require(x > 0.0 && x <= 1.0, "must lie in (0, 1]");
         c.trainer.epsilon_decay = x;
       },
       [](const C& c) { return FormatDouble(c.trainer.epsilon_decay); }},
      {"epsilon_decay_interval", false,
       [](C& c, S v) { c.trainer.epsilon_decay_interval = PositiveInt64(v); },
       [](const C& c) { return std::to_string(c.trainer.epsilon_decay_interval); }},
      {"decay_unit", false,
       [](C& c, S v) { c.trainer.decay_unit = ParseEnum(v, kDecayUnits); },
       [](const C& c) { return EnumName(c.trainer.decay_unit, kDecayUnits); }},
      {"lr_policy", false,
       [](C& c, S v) { c.trainer.lr_policy = PositiveDouble(v); },
       [](const C& c) { return FormatDouble(c.trainer.lr_policy); }},
      {"lr_q", false, [](C& c, S v) { c.trainer.lr_q = PositiveDouble(v); },
       [](const C& c) { return FormatDouble(c.trainer.lr_q); }},
      {"batch_size", false,
       [](C& c, S v) { c.trainer.batch_size = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.trainer.batch_size); }},
      {"sil_iterations", false,
       [](C& c, S v) { c.trainer.sil_iterations = NonNegativeInt(v); },
       [](const C& c) { return std::to_string(c.trainer.sil_iterations); }},
      {"gamma", false,
       [](C& c, S v) {
         const double x = ParseDouble(v);
         Require(x > 0.0 && x <= 1.0, "must lie in (0, 1]");
         c.trainer.gamma = x;
       },
       [](const C& c) { return FormatDouble(c.trainer.gamma); }},
      {"td_discount", false,
       [](C& c, S v) { c.trainer.td_discount = UnitInterval(v); },
       [](const C& c) { return FormatDouble(c.trainer.td_discount); }},
      {"sync_interval", false,
       [](C& c, S v) { c.trainer.sync_interval = PositiveInt64(v); },
       [](const C& c) { return std::to_string(c.trainer.sync_interval); }},
      {"warmup", false,
       [](C& c, S v) {
         const auto x = ParseInteger<std::int64_t>(v);
         Require(x >= 0, "must be >= 0");
         c.trainer.warmup = x;
       },
       [](const C& c) { return std::to_string(c.trainer.warmup); }},
      {"rl_capacity", false,
       [](C& c, S v) { c.trainer.rl_capacity = PositiveInt64(v); },
       [](const C& c) { return std::to_string(c.trainer.rl_capacity); }},
      {"sl_capacity", false,
       [](C& c, S v) { c.trainer.sl_capacity = PositiveInt64(v); },
       [](const C& c) { return std::to_string(c.trainer.sl_capacity); }},
      {"si_capacity", false,
       [](C& c, S v) { c.trainer.si_capacity = PositiveInt64(v); },
       [](const C& c) { return std::to_string(c.trainer.si_capacity); }},
      {"priority_floor", false,
       [](C& c, S v) { c.trainer.priority_floor = PositiveDouble(v); },
       [](const C& c) { return FormatDouble(c.trainer.priority_floor); }},
      {"hidden", false,
       [](C& c, S v) {
         std::vector<int> sizes;
         for (const std::string& item : SplitList(v)) {
           sizes.push_back(PositiveInt(item));
         }
         c.trainer.hidden_sizes = sizes;
       },
       [](const C& c) { return IntList(c.trainer.hidden_sizes); }},
      {"optimizer", false,
       [](C& c, S v) { c.trainer.optimizer = ParseEnum(v, kOptimizers); },
       [](const C& c) { return EnumName(c.trainer.optimizer, kOptimizers); }},
      {"baseline", false,
       [](C& c, S v) { c.trainer.baseline = ParseEnum(v, kBaselines); },
       [](const C& c) { return EnumName(c.trainer.baseline, kBaselines); }},
      {"sil_value_gradient", false,
       [](C& c, S v) {
         c.trainer.sil_value_gradient = ParseEnum(v, kSilGradients);
       },
       [](const C& c) {
         return EnumName(c.trainer.sil_value_gradient, kSilGradients);
       }},
      {"out", false,
       [](C& c, S v) {
         Require(!v.empty(), "must not be empty");
         c.out_dir = v;
       },
       [](const C& c) { return c.out_dir; }},
      {"checkpoint_every", false,
       [](C& c, S v) { c.checkpoint_every = NonNegativeInt(v); },
       [](const C& c) { return std::to_string(c.checkpoint_every); }},
      {"threads", false, [](C& c, S v) { c.threads = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.threads); }},
      {"avg_window", false, [](C& c, S v) { c.avg_window = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.avg_window); }},
      {"wall_clock", false, [](C& c, S v) { c.wall_clock = ParseBool(v); },
       [](const C& c) { return std::string(c.wall_clock ? "true" : "false"); }},
      {"matrix_actions", false,
       [](C& c, S v) { c.matrix_actions = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.matrix_actions); }},
      {"payoffs", false,
       [](C& c, S v) {
         std::vector<double> values;
         for (const std::string& item : SplitList(v)) {
           values.push_back(ParseDouble(item));
         }
         c.payoffs = values;
       },
       [](const C& c) { return DoubleList(c.payoffs); }},
      {"matrix_eval_interval", false,
       [](C& c, S v) { c.matrix_eval_interval = PositiveInt(v); },
       [](const C& c) { return std::to_string(c.matrix_eval_interval); }},
      {"matrix_threshold", false,
       [](C& c, S v) {
         const double x = ParseDouble(v);
         Require(x > 0.0 && x <= 1.0, "must lie in (0, 1]");
         c.matrix_threshold = x;
       },
       [](const C& c) { return FormatDouble(c.matrix_threshold); }},
  };
  return table;
}

DomainSpec DomainDefaults(Domain domain, Variant variant, int width,
                          int height) {
  DomainSpec spec;
  switch (domain) {
    case Domain::kBoxPushing: spec = DomainSpec::BoxPushing(variant); break;
    case Domain::kFireFighting: spec = DomainSpec::FireFighting(variant); break;
    case Domain::kSearchRescue: spec = DomainSpec::SearchRescue(variant); break;
  }
  spec.width = width;
  spec.height = height;
  spec.horizon = envs::DefaultHorizon(width, height);
  return spec;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(JoinErrors(errors)), errors_(std::move(errors)) {}

KeyValues ParseConfigText(std::string_view text) {
  KeyValues values;
  std::vector<std::string> errors;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_number) +
                       ": expected 'key = value'");
      continue;
    }
    std::string key = Trim(std::string_view(trimmed).substr(0, eq));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(line_number) + ": empty key");
      continue;
    }
    values.emplace_back(std::move(key),
                        Trim(std::string_view(trimmed).substr(eq + 1)));
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return values;
}

KeyValues ReadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open '" + path + "'"});
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfigText(text.str());
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const KeySpec& spec : KeyTable()) keys.push_back(spec.name);
  return keys;
}

ExperimentConfig BuildConfig(const KeyValues& file_values,
                             const KeyValues& overrides,
                             const std::vector<std::string>& required_keys,
                             const char* env_out) {
  std::vector<std::string> errors;
  std::map<std::string, std::string> merged;
  const auto& table = KeyTable();
  auto known = [&](const std::string& key) {
    for (const KeySpec& spec : table) {
      if (spec.name == key) return true;
    }
    return false;
  };
  for (const KeyValues* source : {&file_values, &overrides}) {
    for (const auto& [key, value] : *source) {
      if (!known(key)) {
        errors.push_back(key + ": unknown key");
        continue;
      }
      merged[key] = value;
    }
  }
  for (const std::string& key : required_keys) {
    if (!merged.contains(key)) errors.push_back(key + ": required key missing");
  }

  ExperimentConfig config;
  auto apply = [&](const KeySpec& spec) {
    const auto it = merged.find(spec.name);
    if (it == merged.end()) return;
    try {
      spec.set(config, it->second);
    } catch (const std::exception& e) {
      errors.push_back(spec.name + ": " + e.what());
    }
  };
  for (const KeySpec& spec : table) {
    if (spec.structural) apply(spec);
  }
  config.domain = DomainDefaults(config.domain.domain, config.domain.variant,
                                 config.domain.width, config.domain.height);
  for (const KeySpec& spec : table) {
    if (!spec.structural) apply(spec);
  }
  if (!merged.contains("out") && env_out != nullptr && env_out[0] != '\0') {
    config.out_dir = env_out;
  }

  if (errors.empty()) {
    try {
      config.domain.Validate();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
    const std::size_t expected =
        static_cast<std::size_t>(config.matrix_actions) * config.matrix_actions;
    if (config.payoffs.size() != expected) {
      errors.push_back("payoffs: expected " + std::to_string(expected) +
                       " values for matrix_actions = " +
                       std::to_string(config.matrix_actions) + ", got " +
                       std::to_string(config.payoffs.size()));
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

std::string SerializeConfig(const ExperimentConfig& config) {
  std::string out;
  for (const KeySpec& spec : KeyTable()) {
    const std::string value = spec.get(config);
    if (value.empty()) continue;
    out += spec.name + " = " + value + "\n";
  }
  return out;
}

}  // namespace nfsip::cli
