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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "nfsip/agents.h"
#include "nfsip/neural.h"

namespace nfsip::cli {
namespace {

namespace fs = std::filesystem;

std::string Prefix(const ExperimentConfig& config) {
  return (fs::path(config.out_dir) / trainer::AlgorithmName(config.trainer.algo))
      .string();
}

std::ofstream OpenForWrite(const std::string& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void WriteCheckpointFile(const std::string& path,
                         const agents::AgentNetworks& nets) {
  std::ofstream out = OpenForWrite(path);
  neural::WriteCheckpoint(out, {{"q", &nets.q},
                                {"target_q", &nets.target_q},
                                {"policy", &nets.policy}});
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// Mean and population variance of column `episode` across runs.
std::pair<double, double> MeanVariance(const std::vector<RunMetrics>& runs,
                                       std::vector<double> RunMetrics::*series,
                                       std::size_t episode) {
  double mean = 0.0;
  for (const RunMetrics& r : runs) mean += (r.*series)[episode];
  mean /= static_cast<double>(runs.size());
  double var = 0.0;
  for (const RunMetrics& r : runs) {
    const double d = (r.*series)[episode] - mean;
    var += d * d;
  }
  return {mean, var / static_cast<double>(runs.size())};
}

}  // namespace

std::uint64_t RunSeed(const ExperimentConfig& config, int run) {
  return config.seed + static_cast<std::uint64_t>(run);
}

std::unique_ptr<envs::Environment> MakeEnvironment(const ExperimentConfig& config,
                                                   std::uint64_t run_seed) {
  return std::make_unique<envs::GridWorldEnv>(config.domain, run_seed,
                                              config.layout);
}

std::string RunCsvPath(const ExperimentConfig& config, int run) {
  return Prefix(config) + "_run" + std::to_string(run) + ".csv";
}

std::string AggregateCsvPath(const ExperimentConfig& config) {
  return Prefix(config) + "_aggregate.csv";
}

std::string CheckpointPath(const ExperimentConfig& config, int run, int episode) {
  return Prefix(config) + "_run" + std::to_string(run) + "_ep" +
         std::to_string(episode) + ".ckpt";
}

void PrepareOutputDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("output directory '" + dir +
                             "' cannot be created: " + ec.message());
  }
  const fs::path probe = fs::path(dir) / ".nfsip_write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) {
      throw std::runtime_error("output directory '" + dir + "' is not writable");
    }
  }
  fs::remove(probe, ec);
}

std::string FormatMetric(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

RunMetrics RunSingle(const ExperimentConfig& config, int run) {
  RunMetrics metrics;
  metrics.run = run;
  metrics.seed = RunSeed(config, run);
  trainer::Trainer trainer(config.trainer, MakeEnvironment(config, metrics.seed),
                           metrics.seed);

  const std::string path = RunCsvPath(config, run);
  std::ofstream csv = OpenForWrite(path);
  csv << "run,episode,social_welfare,running_avg,seconds\n";
  csv.flush();

  const auto start = std::chrono::steady_clock::now();
  double window_sum = 0.0;
  for (int episode = 1; episode <= config.episodes; ++episode) {
    const double welfare = trainer.TrainEpisode();
    metrics.welfare.push_back(welfare);
    window_sum += welfare;
    if (episode > config.avg_window) {
      window_sum -= metrics.welfare[episode - 1 - config.avg_window];
    }
    const int window = std::min(episode, config.avg_window);
    metrics.running_avg.push_back(window_sum / window);
    double seconds = 0.0;
    if (config.wall_clock) {
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
    }
    metrics.seconds.push_back(seconds);
    csv << run << ',' << episode << ',' << FormatMetric(welfare) << ','
        << FormatMetric(metrics.running_avg.back()) << ','
        << FormatMetric(seconds) << '\n';
    csv.flush();
    if (!csv) throw std::runtime_error("failed writing '" + path + "'");
    if (config.checkpoint_every > 0 && episode % config.checkpoint_every == 0) {
      WriteCheckpointFile(CheckpointPath(config, run, episode), trainer.networks());
    }
  }
  metrics.counters = trainer.counters();
  return metrics;
}

std::vector<RunMetrics> RunExperiment(const ExperimentConfig& config,
                                      std::ostream* progress) {
  config.domain.Validate();
  PrepareOutputDir(config.out_dir);
  std::vector<RunMetrics> results(config.runs);
  std::mutex mu;
  auto report = [&](const RunMetrics& m) {
    if (progress == nullptr) return;
    std::lock_guard<std::mutex> lock(mu);
    *progress << trainer::AlgorithmName(config.trainer.algo) << " run " << m.run
              << " (seed " << m.seed << "): final running average "
              << FormatMetric(m.running_avg.back()) << "\n";
  };

  const int threads = std::min(config.threads, config.runs);
  if (threads <= 1) {
    for (int run = 0; run < config.runs; ++run) {
      results[run] = RunSingle(config, run);
      report(results[run]);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(config.runs);
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&]() {
        for (int run = next++; run < config.runs; run = next++) {
          try {
            results[run] = RunSingle(config, run);
            report(results[run]);
          } catch (...) {
            errors[run] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& w : workers) w.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  WriteAggregate(config, results);
  return results;
}

void WriteAggregate(const ExperimentConfig& config,
                    const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  const std::size_t episodes = runs.front().welfare.size();
  for (const RunMetrics& r : runs) {
    if (r.welfare.size() != episodes) {
      throw std::invalid_argument("aggregate: runs differ in length");
    }
  }
  const std::string path = AggregateCsvPath(config);
  std::ofstream csv = OpenForWrite(path);
  csv << "episode,mean_welfare,var_welfare,mean_running_avg,var_running_avg\n";
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto [wm, wv] = MeanVariance(runs, &RunMetrics::welfare, e);
    const auto [am, av] = MeanVariance(runs, &RunMetrics::running_avg, e);
    csv << e + 1 << ',' << FormatMetric(wm) << ',' << FormatMetric(wv) << ','
        << FormatMetric(am) << ',' << FormatMetric(av) << '\n';
  }
  if (!csv) throw std::runtime_error("failed writing '" + path + "'");
}

double Replay(const ExperimentConfig& config, const std::string& checkpoint_path,
              int run, std::uint64_t seed, std::ostream& out) {
  std::ifstream in(checkpoint_path);
  if (!in) throw std::runtime_error("cannot open '" + checkpoint_path + "'");
  const auto networks = neural::ReadCheckpoint(in);
  const auto it = networks.find("policy");
  if (it == networks.end()) {
    throw std::runtime_error("checkpoint has no policy network");
  }
  const neural::ParameterSet& policy = it->second;
  auto env = MakeEnvironment(config, RunSeed(config, run));
  if (policy.shape().input_size != env->observation_size() ||
      policy.shape().output_size != env->num_actions()) {
    throw std::runtime_error(
        "checkpoint does not match the configured environment");
  }
  Rng rng = MakeRng(seed, 3);
  env->Reset(rng);
  std::vector<double> returns(env->num_agents(), 0.0);
  envs::JointAction joint(env->num_agents());
  while (!env->done()) {
    for (int i = 0; i < env->num_agents(); ++i) {
      joint[i] = agents::SampleFromDistribution(
          neural::Softmax(neural::Predict(policy, env->Observe(i))), rng);
    }
    const std::vector<double> rewards = env->Step(joint, rng);
    for (std::size_t i = 0; i < rewards.size(); ++i) returns[i] += rewards[i];
    out << envs::TrajectoryLine(env->steps_taken(), joint, rewards,
                                env->tasks_remaining())
        << "\n";
  }
  const double welfare = envs::SocialWelfare(returns);
  out << "welfare " << FormatMetric(welfare) << "\n";
  return welfare;
}

MatrixSuiteResult RunMatrixSuite(const ExperimentConfig& config,
                                 std::ostream* progress) {
  PrepareOutputDir(config.out_dir);
  const matrix_games::MatrixGame game(2, config.matrix_actions, config.payoffs);
  const std::vector<int> best = game.BestJointAction();

  MatrixSuiteResult result;
  const auto trace = matrix_games::ExactFictitiousPlay(game, 1000);
  for (int p = 0; p < game.num_players(); ++p) {
    result.oracle_mass.push_back(trace.back().frequencies[p](best[p]));
  }

  matrix_games::SelfPlayConfig self_play =
      matrix_games::SelfPlayConfig::Defaults(config.trainer.algo);
  self_play.episodes = config.episodes;
  self_play.eval_interval = config.matrix_eval_interval;
  self_play.threshold = config.matrix_threshold;

  const std::string path =
      (fs::path(config.out_dir) /
       ("matrix_" + trainer::AlgorithmName(config.trainer.algo) + ".csv"))
          .string();
  std::ofstream csv = OpenForWrite(path);
  csv << "run,episodes_to_threshold,min_mass\n";
  if (progress != nullptr) {
    *progress << "fictitious play mass on the optimum:";
    for (double m : result.oracle_mass) *progress << ' ' << FormatMetric(m);
    *progress << "\n";
  }
  for (int run = 0; run < config.runs; ++run) {
    matrix_games::SelfPlayResult r =
        matrix_games::NeuralSelfPlay(game, self_play, RunSeed(config, run));
    const double min_mass =
        *std::min_element(r.final_mass.begin(), r.final_mass.end());
    csv << run << ',' << r.episodes_to_threshold << ',' << FormatMetric(min_mass)
        << '\n';
    if (progress != nullptr) {
      *progress << trainer::AlgorithmName(config.trainer.algo) << " run " << run
                << ": episodes to threshold " << r.episodes_to_threshold
                << ", final min mass " << FormatMetric(min_mass) << "\n";
    }
    result.runs.push_back(std::move(r));
  }
  if (!csv) throw std::runtime_error("failed writing '" + path + "'");
  return result;
}

}  // namespace nfsip::cli
