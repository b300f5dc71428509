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

// Losses and action selection for fictitious self-play agents.
//
// All agents of a run share one Q-network (best response), one target
// Q-network and one policy network (average strategy); the agent id is part
// of the observation. Loss functions return the batch-mean loss and its
// gradient with respect to the network they train.
//
// The self-imitation terms use the welfare-gated clipped advantage
//   G = max(0, R - V(s))  if W >= W_T,  0 otherwise
// where R is the stored discounted return, W the welfare of the episode the
// sample came from and W_T the current welfare threshold.

#ifndef NFSIP_AGENTS_H_
#define NFSIP_AGENTS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nfsip/buffers.h"
#include "nfsip/neural.h"
#include "nfsip/random.h"

namespace nfsip::agents {

using buffers::BestResponsePair;
using buffers::ReturnTransition;
using buffers::Transition;
using neural::GradientSet;
using neural::Matrix;
using neural::ParameterSet;
using neural::Vector;

enum class BehaviorMode { kBestResponse, kAveragePolicy };

// How V(s) is formed from the Q row.
enum class BaselineMode {
  kUniform,         // mean over actions
  kPolicyWeighted,  // expectation under the average policy
};

// Gradient used for the self-imitation value loss.
enum class SilValueGradient {
  kExact,          // true gradient of mean G^2 through V(s)
  kSampledAction,  // 2 (1/|A|) G grad Q(s, a) for the stored action only
};

struct AgentNetworks {
  ParameterSet q;
  ParameterSet target_q;
  ParameterSet policy;
  neural::Optimizer q_optimizer;
  neural::Optimizer policy_optimizer;

  static AgentNetworks Create(const neural::NetworkShape& shape,
                              const neural::OptimizerConfig& optimizer,
                              Rng& rng);
  void SyncTarget() { target_q = q; }
};

struct MixingSchedule {
  double eta = 0.2;
  double epsilon = 0.5;
  double decay_factor = 0.98;
  std::int64_t decay_interval = 500;

  void DecayEpsilon() { epsilon *= decay_factor; }
};

struct LossResult {
  double loss = 0.0;
  GradientSet gradient;
};

struct SilLossResult {
  double loss = 0.0;
  GradientSet gradient;
  std::vector<double> clipped_advantages;  // one per sample
  double mean_clipped_advantage = 0.0;
};

// Lowest index among maximal entries.
int GreedyAction(const Vector& values);
int SampleFromDistribution(const Vector& probs, Rng& rng);

// Best response: epsilon-greedy over Q. Average policy: a draw from the
// policy softmax. A uniform draw for the epsilon test is always consumed in
// best-response mode.
int SelectAction(BehaviorMode mode, const Vector& obs,
                 const AgentNetworks& nets, double epsilon, Rng& rng);

// Uniform action with probability epsilon, otherwise a draw from the actor.
int SelectActorAction(const Vector& obs, const ParameterSet& actor,
                      double epsilon, Rng& rng);

// mean (r + discount * max_a' Q'(s', a') - Q(s, a))^2; terminal samples drop
// the bootstrap term. The gradient is taken with respect to `q` only.
LossResult QLoss(const ParameterSet& q, const ParameterSet& target_q,
                 std::span<const Transition> batch, double discount = 1.0);

// mean -log pi(a | s), computed through log-softmax.
LossResult PolicyLoss(const ParameterSet& policy,
                      std::span<const BestResponsePair> batch);

double StateValue(const Vector& q_row, const Vector& policy_row,
                  BaselineMode mode);

double ClippedAdvantage(double cumulative_return, double value,
                        double welfare, double welfare_threshold);

// mean G^2 and its gradient with respect to `q`. The policy only enters
// through a policy-weighted baseline and is held fixed.
SilLossResult SilQLoss(const ParameterSet& q, const ParameterSet& policy,
                       std::span<const ReturnTransition> batch,
                       double welfare_threshold, BaselineMode baseline,
                       SilValueGradient gradient = SilValueGradient::kExact);

// mean G * (-log pi(a | s)) with G held constant; gradient w.r.t. `policy`.
SilLossResult SilPolicyLoss(const ParameterSet& q, const ParameterSet& policy,
                            std::span<const ReturnTransition> batch,
                            double welfare_threshold, BaselineMode baseline);

// (1 + G) / (t + 1): the averaging step size implied by a self-imitation
// update at iteration t. G = 0 gives the fictitious-play 1 / (t + 1).
double EffectiveMixingCoefficient(std::int64_t t, double clipped_advantage);

// Per-sample constants the actor-critic losses treat as fixed.
struct ActorCriticConstants {
  std::vector<double> critic_targets;  // r + discount * E_pi Q(s', .)
  std::vector<double> advantages;      // Q(s, a) - E_pi Q(s, .)
  std::vector<double> si_clipped_advantages;
  std::vector<Vector> si_policy_rows;  // pi(. | s) used by the SIL baseline
};

struct AcSilLoss {
  double loss = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double sil_value_loss = 0.0;
  double sil_policy_loss = 0.0;
  GradientSet actor_gradient;
  GradientSet critic_gradient;
  ActorCriticConstants constants;
};

// Advantage actor-critic on `on_policy` plus the self-imitation losses on
// `si_batch`; either batch may be empty. The critic is a Q-network.
AcSilLoss AcSilLossAndGradient(const ParameterSet& actor,
                               const ParameterSet& critic,
                               std::span<const Transition> on_policy,
                               std::span<const ReturnTransition> si_batch,
                               double welfare_threshold, BaselineMode baseline,
                               double discount);

// Applies one optimizer step to the actor (policy) and critic (q) networks.
// Returns false if either step was rejected. `loss`, if given, receives the
// loss terms unless both batches are empty.
bool AcSilUpdate(AgentNetworks& nets, std::span<const Transition> on_policy,
                 std::span<const ReturnTransition> si_batch,
                 double welfare_threshold, BaselineMode baseline,
                 double discount, double actor_learning_rate,
                 double critic_learning_rate,
                 std::optional<AcSilLoss>* loss = nullptr);

// Stacks states as columns.
template <typename T>
Matrix StackStates(std::span<const T> batch) {
  Matrix m(batch.front().state.size(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) m.col(i) = batch[i].state;
  return m;
}

}  // namespace nfsip::agents

#endif  // NFSIP_AGENTS_H_
