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

#include "nfsip/trainer.h"

#include <optional>
#include <stdexcept>

namespace nfsip::trainer {
namespace {

constexpr std::uint64_t kAgentStream = 1;
constexpr std::uint64_t kEnvStream = 2;

bool AnyPositive(const std::vector<double>& values) {
  for (double v : values) {
    if (v > 0.0) return true;
  }
  return false;
}

}  // namespace

std::string AlgorithmName(Algorithm algo) {
  switch (algo) {
    case Algorithm::kNfsp:
      return "nfsp";
    case Algorithm::kNfsip:
      return "nfsip";
    case Algorithm::kAcSil:
      return "acsil";
  }
  return "?";
}

neural::NetworkShape ShapeFor(const envs::Environment& env,
                              const std::vector<int>& hidden_sizes) {
  return neural::NetworkShape{env.observation_size(), hidden_sizes,
                              env.num_actions()};
}

Trainer::Trainer(TrainerConfig config, std::unique_ptr<envs::Environment> env,
                 std::uint64_t seed)
    : config_(std::move(config)),
      env_(std::move(env)),
      rng_(MakeRng(seed, kAgentStream)),
      env_rng_(MakeRng(seed, kEnvStream)),
      nets_(agents::AgentNetworks::Create(
          ShapeFor(*env_, config_.hidden_sizes),
          neural::OptimizerConfig{config_.optimizer}, rng_)),
      rl_buffer_(static_cast<std::size_t>(config_.rl_capacity)),
      sl_buffer_(static_cast<std::size_t>(config_.sl_capacity)),
      si_buffer_(static_cast<std::size_t>(config_.si_capacity),
                 config_.priority_floor) {
  if (config_.batch_size <= 0) {
    throw std::invalid_argument("trainer: batch size must be > 0");
  }
  if (config_.sync_interval <= 0 || config_.epsilon_decay_interval <= 0) {
    throw std::invalid_argument("trainer: intervals must be > 0");
  }
  schedule_.eta = config_.eta;
  // Actor-critic explores with the same overall rate NFSP reaches through
  // eta * epsilon.
  schedule_.epsilon = config_.algo == Algorithm::kAcSil
                          ? config_.eta * config_.epsilon
                          : config_.epsilon;
  schedule_.decay_factor = config_.epsilon_decay;
  schedule_.decay_interval = config_.epsilon_decay_interval;
}

double Trainer::current_eta() const {
  if (config_.eta_schedule == EtaSchedule::kFixed) return schedule_.eta;
  return schedule_.eta /
         (1.0 + static_cast<double>(counters_.episodes) / config_.eta_decay_episodes);
}

EpisodeRecord Trainer::RunEpisode() {
  env_->Reset(env_rng_);
  const int n = env_->num_agents();
  EpisodeRecord record;
  record.trajectories.resize(n);
  record.agent_returns.assign(n, 0.0);
  record.modes.resize(n, agents::BehaviorMode::kAveragePolicy);
  if (config_.algo != Algorithm::kAcSil) {
    const double eta = current_eta();
    for (int i = 0; i < n; ++i) {
      record.modes[i] = Uniform01(rng_) < eta
                            ? agents::BehaviorMode::kBestResponse
                            : agents::BehaviorMode::kAveragePolicy;
    }
  }

  std::vector<neural::Vector> obs(n);
  for (int i = 0; i < n; ++i) obs[i] = env_->Observe(i);
  envs::JointAction joint(n);
  std::vector<buffers::Transition> step_batch;
  while (!env_->done()) {
    for (int i = 0; i < n; ++i) {
      joint[i] = config_.algo == Algorithm::kAcSil
                     ? agents::SelectActorAction(obs[i], nets_.policy,
                                                 schedule_.epsilon, rng_)
                     : agents::SelectAction(record.modes[i], obs[i], nets_,
                                            schedule_.epsilon, rng_);
    }
    const std::vector<double> rewards = env_->Step(joint, env_rng_);
    const bool done = env_->done();
    step_batch.clear();
    for (int i = 0; i < n; ++i) {
      neural::Vector next = env_->Observe(i);
      buffers::Transition t{obs[i], joint[i], rewards[i], next, done};
      if (config_.algo == Algorithm::kAcSil) step_batch.push_back(t);
      rl_buffer_.Add(std::move(t));
      ++counters_.rl_insertions;
      if (config_.algo != Algorithm::kAcSil &&
          record.modes[i] == agents::BehaviorMode::kBestResponse) {
        sl_buffer_.Add(buffers::BestResponsePair{obs[i], joint[i]}, rng_);
        ++counters_.sl_insertions;
      }
      record.trajectories[i].push_back(AgentStep{obs[i], joint[i], rewards[i], next});
      record.agent_returns[i] += rewards[i];
      obs[i] = std::move(next);
    }
    ++record.length;

    if (config_.algo == Algorithm::kAcSil) {
      std::optional<agents::AcSilLoss> loss;
      const bool ok = agents::AcSilUpdate(
          nets_, step_batch, {}, si_buffer_.best_welfare(), config_.baseline,
          config_.td_discount, config_.lr_policy, config_.lr_q, &loss);
      ++counters_.actor_critic_updates;
      if (!ok) ++counters_.rejected_updates;
      last_q_loss_ = loss->critic_loss;
      last_policy_loss_ = loss->actor_loss;
    } else {
      TrainStep();
    }
    AfterEnvStep();
  }
  record.welfare = envs::SocialWelfare(record.agent_returns);
  return record;
}

void Trainer::TrainStep() {
  if (static_cast<std::int64_t>(rl_buffer_.size()) < config_.warmup) return;
  if (auto batch = rl_buffer_.Sample(config_.batch_size, rng_)) {
    agents::LossResult loss = agents::QLoss(nets_.q, nets_.target_q, *batch,
                                            config_.td_discount);
    last_q_loss_ = loss.loss;
    if (nets_.q_optimizer.Step(nets_.q, loss.gradient, config_.lr_q)) {
      ++counters_.q_updates;
    } else {
      ++counters_.rejected_updates;
    }
  }
  if (auto batch = sl_buffer_.Sample(config_.batch_size, rng_)) {
    agents::LossResult loss = agents::PolicyLoss(nets_.policy, *batch);
    last_policy_loss_ = loss.loss;
    if (nets_.policy_optimizer.Step(nets_.policy, loss.gradient,
                                    config_.lr_policy)) {
      ++counters_.policy_updates;
    } else {
      ++counters_.rejected_updates;
    }
  }
}

void Trainer::AfterEnvStep() {
  ++counters_.steps;
  if (counters_.steps % config_.sync_interval == 0) SyncTarget();
  if (config_.decay_unit == DecayUnit::kSteps &&
      counters_.steps % schedule_.decay_interval == 0) {
    schedule_.DecayEpsilon();
    ++counters_.epsilon_decays;
  }
}

void Trainer::SyncTarget() {
  nets_.SyncTarget();
  ++counters_.target_syncs;
}

void Trainer::EndOfEpisode(const EpisodeRecord& record) {
  if (config_.uses_self_imitation()) {
    std::vector<buffers::EpisodeStep> steps;
    for (std::size_t agent = 0; agent < record.trajectories.size(); ++agent) {
      const auto& trajectory = record.trajectories[agent];
      std::vector<double> rewards;
      rewards.reserve(trajectory.size());
      for (const AgentStep& s : trajectory) rewards.push_back(s.reward);
      const std::vector<double> returns =
          buffers::DiscountedReturns(rewards, config_.gamma);
      for (std::size_t t = 0; t < trajectory.size(); ++t) {
        steps.push_back(buffers::EpisodeStep{trajectory[t].state,
                                             trajectory[t].action, returns[t],
                                             trajectory[t].next_state,
                                             static_cast<int>(agent)});
      }
    }
    const buffers::EpisodeOutcome outcome =
        si_buffer_.ConsiderEpisode(steps, record.welfare);
    if (outcome == buffers::EpisodeOutcome::kResetAndStored) ++counters_.si_resets;
    if (outcome != buffers::EpisodeOutcome::kRejected) {
      counters_.si_insertions += static_cast<std::int64_t>(steps.size());
    }
    SilPhase(config_.sil_iterations);
  }
  ++counters_.episodes;
  if (config_.decay_unit == DecayUnit::kEpisodes &&
      counters_.episodes % schedule_.decay_interval == 0) {
    schedule_.DecayEpsilon();
    ++counters_.epsilon_decays;
  }
}

double Trainer::TrainEpisode() {
  const EpisodeRecord record = RunEpisode();
  EndOfEpisode(record);
  return record.welfare;
}

void Trainer::SilPhase(int iterations) {
  for (int round = 0; round < iterations; ++round) {
    auto batch = si_buffer_.Sample(config_.batch_size, rng_);
    if (!batch) return;
    const double threshold = si_buffer_.best_welfare();
    agents::SilLossResult value =
        agents::SilQLoss(nets_.q, nets_.policy, *batch, threshold,
                         config_.baseline, config_.sil_value_gradient);
    // All-zero clipped advantages mean an exactly zero gradient: no update.
    if (AnyPositive(value.clipped_advantages) &&
        !nets_.q_optimizer.Step(nets_.q, value.gradient, config_.lr_q)) {
      ++counters_.rejected_updates;
    }
    agents::SilLossResult policy = agents::SilPolicyLoss(
        nets_.q, nets_.policy, *batch, threshold, config_.baseline);
    if (AnyPositive(policy.clipped_advantages) &&
        !nets_.policy_optimizer.Step(nets_.policy, policy.gradient,
                                     config_.lr_policy)) {
      ++counters_.rejected_updates;
    }
    SilUpdateLog log;
    log.update_index = counters_.sil_rounds;
    log.iteration = counters_.episodes;
    log.mean_clipped_advantage = policy.mean_clipped_advantage;
    log.mixing_coefficient = agents::EffectiveMixingCoefficient(
        log.iteration, log.mean_clipped_advantage);
    log.value_loss = value.loss;
    log.policy_loss = policy.loss;
    sil_log_.push_back(log);
    ++counters_.sil_rounds;
  }
}

}  // namespace nfsip::trainer
