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

// Training loop for NFSP, NFSIP and the AC-SIL baseline.
//
// Per episode:
//   1. each agent samples its behaviour (best response with probability eta)
//   2. every step: act, store transitions in the RL buffer and best-response
//      pairs in the supervised buffer, then one Q update and one policy
//      update from uniform minibatches (after warm-up)
//   3. at the end (NFSIP, AC-SIL): returns are computed per agent and the
//      episode is offered to the self-imitation buffer, gated on welfare,
//      followed by a fixed number of self-imitation rounds
// The target network is hard-synced every `sync_interval` steps and epsilon
// decays every `epsilon_decay_interval` steps (or episodes).

#ifndef NFSIP_TRAINER_H_
#define NFSIP_TRAINER_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nfsip/agents.h"
#include "nfsip/buffers.h"
#include "nfsip/envs.h"
#include "nfsip/neural.h"
#include "nfsip/random.h"

namespace nfsip::trainer {

enum class Algorithm { kNfsp, kNfsip, kAcSil };
enum class EtaSchedule {
  kFixed,     // eta stays at its initial value
  kHarmonic,  // eta_k = eta_0 / (1 + k / eta_decay_episodes)
};
enum class DecayUnit { kSteps, kEpisodes };

std::string AlgorithmName(Algorithm algo);

struct TrainerConfig {
  Algorithm algo = Algorithm::kNfsip;
  std::vector<int> hidden_sizes = {32, 32};
  neural::OptimizerKind optimizer = neural::OptimizerKind::kAdam;
  double lr_policy = 1e-3;
  double lr_q = 1e-4;
  int batch_size = 32;
  int sil_iterations = 5;
  double gamma = 0.99;        // discount of the stored self-imitation returns
  double td_discount = 1.0;   // discount inside the Q-learning target
  std::int64_t sync_interval = 300;
  std::int64_t warmup = 1000;
  std::int64_t rl_capacity = 200000;
  std::int64_t sl_capacity = 1000000;
  std::int64_t si_capacity = 50000;
  double priority_floor = buffers::SelfImitationBuffer::kDefaultPriorityFloor;
  double eta = 0.2;
  double epsilon = 0.5;
  double epsilon_decay = 0.98;
  std::int64_t epsilon_decay_interval = 500;
  DecayUnit decay_unit = DecayUnit::kSteps;
  EtaSchedule eta_schedule = EtaSchedule::kFixed;
  double eta_decay_episodes = 1000.0;
  agents::BaselineMode baseline = agents::BaselineMode::kPolicyWeighted;
  agents::SilValueGradient sil_value_gradient =
      agents::SilValueGradient::kSampledAction;

  bool operator==(const TrainerConfig&) const = default;

  bool uses_self_imitation() const {
    return algo != Algorithm::kNfsp && sil_iterations > 0;
  }
};

struct Counters {
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::int64_t rl_insertions = 0;
  std::int64_t sl_insertions = 0;
  std::int64_t si_insertions = 0;
  std::int64_t si_resets = 0;
  std::int64_t q_updates = 0;
  std::int64_t policy_updates = 0;
  std::int64_t actor_critic_updates = 0;
  std::int64_t sil_rounds = 0;
  std::int64_t target_syncs = 0;
  std::int64_t epsilon_decays = 0;
  std::int64_t rejected_updates = 0;
  bool operator==(const Counters&) const = default;
};

// One self-imitation round.
struct SilUpdateLog {
  std::int64_t update_index = 0;
  std::int64_t iteration = 0;  // episodes completed before this round
  double mean_clipped_advantage = 0.0;
  double mixing_coefficient = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
};

struct AgentStep {
  neural::Vector state;
  int action = 0;
  double reward = 0.0;
  neural::Vector next_state;
};

struct EpisodeRecord {
  std::vector<agents::BehaviorMode> modes;        // per agent
  std::vector<std::vector<AgentStep>> trajectories;  // per agent
  std::vector<double> agent_returns;              // undiscounted
  double welfare = 0.0;
  int length = 0;
};

class Trainer {
 public:
  Trainer(TrainerConfig config, std::unique_ptr<envs::Environment> env,
          std::uint64_t seed);

  // Runs one episode including per-step updates.
  EpisodeRecord RunEpisode();
  // Self-imitation bookkeeping and rounds for a finished episode.
  void EndOfEpisode(const EpisodeRecord& record);
  // RunEpisode followed by EndOfEpisode; returns the episode welfare.
  double TrainEpisode();

  // `iterations` rounds of self-imitation updates; no-op on an empty buffer.
  void SilPhase(int iterations);
  void SyncTarget();

  const TrainerConfig& config() const { return config_; }
  const agents::AgentNetworks& networks() const { return nets_; }
  agents::AgentNetworks& mutable_networks() { return nets_; }
  const agents::MixingSchedule& schedule() const { return schedule_; }
  double current_eta() const;
  const Counters& counters() const { return counters_; }
  const std::vector<SilUpdateLog>& sil_log() const { return sil_log_; }
  const buffers::SelfImitationBuffer& si_buffer() const { return si_buffer_; }
  buffers::SelfImitationBuffer& mutable_si_buffer() { return si_buffer_; }
  const buffers::CircularBuffer<buffers::Transition>& rl_buffer() const {
    return rl_buffer_;
  }
  const buffers::ReservoirBuffer<buffers::BestResponsePair>& sl_buffer() const {
    return sl_buffer_;
  }
  const envs::Environment& env() const { return *env_; }
  double last_q_loss() const { return last_q_loss_; }
  double last_policy_loss() const { return last_policy_loss_; }

 private:
  void TrainStep();
  void AfterEnvStep();

  TrainerConfig config_;
  std::unique_ptr<envs::Environment> env_;
  Rng rng_;      // agent-side randomness
  Rng env_rng_;  // environment dynamics and layouts
  agents::AgentNetworks nets_;
  agents::MixingSchedule schedule_;
  buffers::CircularBuffer<buffers::Transition> rl_buffer_;
  buffers::ReservoirBuffer<buffers::BestResponsePair> sl_buffer_;
  buffers::SelfImitationBuffer si_buffer_;
  Counters counters_;
  std::vector<SilUpdateLog> sil_log_;
  double last_q_loss_ = 0.0;
  double last_policy_loss_ = 0.0;
};

neural::NetworkShape ShapeFor(const envs::Environment& env,
                              const std::vector<int>& hidden_sizes);

}  // namespace nfsip::trainer

#endif  // NFSIP_TRAINER_H_
