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

#include "nfsip/agents.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfsip::agents {
namespace {

void CheckNonEmpty(std::size_t n, const char* what) {
  if (n == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

void CheckAction(int action, Eigen::Index num_actions, const char* what) {
  if (action < 0 || action >= num_actions) {
    throw std::invalid_argument(std::string(what) + ": action " +
                                std::to_string(action) + " out of range");
  }
}

Matrix StackNextStates(std::span<const Transition> batch) {
  Matrix m(batch.front().next_state.size(),
           static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) m.col(i) = batch[i].next_state;
  return m;
}

// Clipped advantages for a self-imitation batch, plus the baseline weights
// (d V / d Q row) per sample.
struct SilTerms {
  std::vector<double> gamma;
  Matrix value_weights;  // num_actions x B
  Matrix q_rows;
  Matrix policy_probs;
};

SilTerms ComputeSilTerms(const ParameterSet& q, const ParameterSet& policy,
                         std::span<const ReturnTransition> batch,
                         double welfare_threshold, BaselineMode baseline) {
  const Matrix states = StackStates(batch);
  SilTerms terms;
  terms.q_rows = neural::Predict(q, states);
  terms.policy_probs = neural::Softmax(neural::Predict(policy, states));
  const Eigen::Index actions = terms.q_rows.rows();
  if (baseline == BaselineMode::kUniform) {
    terms.value_weights =
        Matrix::Constant(actions, terms.q_rows.cols(), 1.0 / actions);
  } else {
    terms.value_weights = terms.policy_probs;
  }
  terms.gamma.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CheckAction(batch[i].action, actions, "self-imitation loss");
    const double value = terms.value_weights.col(i).dot(terms.q_rows.col(i));
    terms.gamma[i] = ClippedAdvantage(batch[i].cumulative_return, value,
                                      batch[i].episode_welfare,
                                      welfare_threshold);
  }
  return terms;
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

AgentNetworks AgentNetworks::Create(const neural::NetworkShape& shape,
                                    const neural::OptimizerConfig& optimizer,
                                    Rng& rng) {
  ParameterSet q = ParameterSet::Initialize(shape, rng);
  ParameterSet policy = ParameterSet::Initialize(shape, rng);
  ParameterSet target = q;
  return AgentNetworks{std::move(q), std::move(target), std::move(policy),
                       neural::Optimizer(optimizer, shape),
                       neural::Optimizer(optimizer, shape)};
}

int GreedyAction(const Vector& values) {
  int best = 0;
  for (Eigen::Index a = 1; a < values.size(); ++a) {
    if (values(a) > values(best)) best = static_cast<int>(a);
  }
  return best;
}

int SampleFromDistribution(const Vector& probs, Rng& rng) {
  const double u = Uniform01(rng);
  double cumulative = 0.0;
  for (Eigen::Index a = 0; a < probs.size(); ++a) {
    cumulative += probs(a);
    if (u < cumulative) return static_cast<int>(a);
  }
  // Rounding left u above the total; fall back to the last positive entry.
  for (Eigen::Index a = probs.size() - 1; a >= 0; --a) {
    if (probs(a) > 0.0) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

int SelectAction(BehaviorMode mode, const Vector& obs,
                 const AgentNetworks& nets, double epsilon, Rng& rng) {
  if (mode == BehaviorMode::kBestResponse) {
    const int num_actions = nets.q.shape().output_size;
    if (Uniform01(rng) < epsilon) return UniformInt(rng, num_actions);
    return GreedyAction(neural::Predict(nets.q, obs));
  }
  return SampleFromDistribution(neural::Softmax(neural::Predict(nets.policy, obs)),
                                rng);
}

int SelectActorAction(const Vector& obs, const ParameterSet& actor,
                      double epsilon, Rng& rng) {
  if (Uniform01(rng) < epsilon) {
    return UniformInt(rng, actor.shape().output_size);
  }
  return SampleFromDistribution(neural::Softmax(neural::Predict(actor, obs)),
                                rng);
}

LossResult QLoss(const ParameterSet& q, const ParameterSet& target_q,
                 std::span<const Transition> batch, double discount) {
  CheckNonEmpty(batch.size(), "q loss");
  const auto n = static_cast<double>(batch.size());
  const Matrix next_values = neural::Predict(target_q, StackNextStates(batch));
  const neural::ForwardTrace trace = neural::Forward(q, StackStates(batch));
  Matrix output_grad = Matrix::Zero(trace.output.rows(), trace.output.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    CheckAction(t.action, trace.output.rows(), "q loss");
    const double bootstrap =
        t.terminal ? 0.0 : discount * next_values.col(i).maxCoeff();
    const double td = t.reward + bootstrap - trace.output(t.action, i);
    loss += td * td;
    output_grad(t.action, i) = -2.0 * td / n;
  }
  return {loss / n, neural::Backward(q, trace, output_grad)};
}

LossResult PolicyLoss(const ParameterSet& policy,
                      std::span<const BestResponsePair> batch) {
  CheckNonEmpty(batch.size(), "policy loss");
  const auto n = static_cast<double>(batch.size());
  const neural::ForwardTrace trace = neural::Forward(policy, StackStates(batch));
  const Matrix log_probs = neural::LogSoftmax(trace.output);
  Matrix output_grad = log_probs.array().exp();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CheckAction(batch[i].action, log_probs.rows(), "policy loss");
    loss -= log_probs(batch[i].action, i);
    output_grad(batch[i].action, i) -= 1.0;
  }
  output_grad /= n;
  return {loss / n, neural::Backward(policy, trace, output_grad)};
}

double StateValue(const Vector& q_row, const Vector& policy_row,
                  BaselineMode mode) {
  if (mode == BaselineMode::kUniform) return q_row.mean();
  if (q_row.size() != policy_row.size()) {
    throw std::invalid_argument("state value: q row and policy row differ in length");
  }
  return policy_row.dot(q_row);
}

double ClippedAdvantage(double cumulative_return, double value, double welfare,
                        double welfare_threshold) {
  if (!(welfare >= welfare_threshold)) return 0.0;
  return std::max(0.0, cumulative_return - value);
}

SilLossResult SilQLoss(const ParameterSet& q, const ParameterSet& policy,
                       std::span<const ReturnTransition> batch,
                       double welfare_threshold, BaselineMode baseline,
                       SilValueGradient gradient) {
  CheckNonEmpty(batch.size(), "self-imitation value loss");
  const auto n = static_cast<double>(batch.size());
  SilTerms terms =
      ComputeSilTerms(q, policy, batch, welfare_threshold, baseline);
  const neural::ForwardTrace trace = neural::Forward(q, StackStates(batch));
  const Eigen::Index actions = trace.output.rows();
  Matrix output_grad = Matrix::Zero(actions, trace.output.cols());
  SilLossResult result{0.0, GradientSet::ZerosLike(q), terms.gamma,
                       Mean(terms.gamma)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double g = terms.gamma[i];
    result.loss += g * g;
    if (g == 0.0) continue;
    if (gradient == SilValueGradient::kExact) {
      output_grad.col(i) = (-2.0 * g / n) * terms.value_weights.col(i);
    } else {
      output_grad(batch[i].action, i) = -2.0 * g / (n * actions);
    }
  }
  result.loss /= n;
  result.gradient = neural::Backward(q, trace, output_grad);
  return result;
}

SilLossResult SilPolicyLoss(const ParameterSet& q, const ParameterSet& policy,
                            std::span<const ReturnTransition> batch,
                            double welfare_threshold, BaselineMode baseline) {
  CheckNonEmpty(batch.size(), "self-imitation policy loss");
  const auto n = static_cast<double>(batch.size());
  SilTerms terms =
      ComputeSilTerms(q, policy, batch, welfare_threshold, baseline);
  const neural::ForwardTrace trace = neural::Forward(policy, StackStates(batch));
  const Matrix log_probs = neural::LogSoftmax(trace.output);
  Matrix output_grad = Matrix::Zero(log_probs.rows(), log_probs.cols());
  SilLossResult result{0.0, GradientSet::ZerosLike(policy), terms.gamma,
                       Mean(terms.gamma)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double g = terms.gamma[i];
    if (g == 0.0) continue;
    result.loss -= g * log_probs(batch[i].action, i);
    output_grad.col(i) = (g / n) * log_probs.col(i).array().exp().matrix();
    output_grad(batch[i].action, i) -= g / n;
  }
  result.loss /= n;
  result.gradient = neural::Backward(policy, trace, output_grad);
  return result;
}

double EffectiveMixingCoefficient(std::int64_t t, double clipped_advantage) {
  if (t < 0) throw std::invalid_argument("mixing coefficient: t must be >= 0");
  if (!(clipped_advantage >= 0.0)) {
    throw std::invalid_argument("mixing coefficient: advantage must be >= 0");
  }
  return (1.0 + clipped_advantage) / static_cast<double>(t + 1);
}

AcSilLoss AcSilLossAndGradient(const ParameterSet& actor,
                               const ParameterSet& critic,
                               std::span<const Transition> on_policy,
                               std::span<const ReturnTransition> si_batch,
                               double welfare_threshold, BaselineMode baseline,
                               double discount) {
  AcSilLoss result{0.0,
                   0.0,
                   0.0,
                   0.0,
                   0.0,
                   GradientSet::ZerosLike(actor),
                   GradientSet::ZerosLike(critic),
                   {}};
  if (!on_policy.empty()) {
    const auto n = static_cast<double>(on_policy.size());
    const Matrix states = StackStates(on_policy);
    const Matrix next_states = StackNextStates(on_policy);
    const Matrix next_q = neural::Predict(critic, next_states);
    const Matrix next_pi = neural::Softmax(neural::Predict(actor, next_states));
    const neural::ForwardTrace critic_trace = neural::Forward(critic, states);
    const neural::ForwardTrace actor_trace = neural::Forward(actor, states);
    const Matrix log_pi = neural::LogSoftmax(actor_trace.output);
    const Matrix pi = log_pi.array().exp();
    Matrix critic_grad = Matrix::Zero(critic_trace.output.rows(), on_policy.size());
    Matrix actor_grad = Matrix::Zero(log_pi.rows(), on_policy.size());
    for (std::size_t i = 0; i < on_policy.size(); ++i) {
      const Transition& t = on_policy[i];
      CheckAction(t.action, log_pi.rows(), "actor-critic loss");
      const double bootstrap =
          t.terminal ? 0.0 : discount * next_pi.col(i).dot(next_q.col(i));
      const double target = t.reward + bootstrap;
      const double q_sa = critic_trace.output(t.action, i);
      const double advantage = q_sa - pi.col(i).dot(critic_trace.output.col(i));
      result.constants.critic_targets.push_back(target);
      result.constants.advantages.push_back(advantage);
      const double td = target - q_sa;
      result.critic_loss += td * td / n;
      critic_grad(t.action, i) = -2.0 * td / n;
      result.actor_loss -= advantage * log_pi(t.action, i) / n;
      actor_grad.col(i) = (advantage / n) * pi.col(i);
      actor_grad(t.action, i) -= advantage / n;
    }
    result.critic_gradient += neural::Backward(critic, critic_trace, critic_grad);
    result.actor_gradient += neural::Backward(actor, actor_trace, actor_grad);
  }
  if (!si_batch.empty()) {
    const SilTerms terms =
        ComputeSilTerms(critic, actor, si_batch, welfare_threshold, baseline);
    result.constants.si_clipped_advantages = terms.gamma;
    for (Eigen::Index i = 0; i < terms.policy_probs.cols(); ++i) {
      result.constants.si_policy_rows.push_back(terms.policy_probs.col(i));
    }
    SilLossResult value = SilQLoss(critic, actor, si_batch, welfare_threshold,
                                   baseline, SilValueGradient::kExact);
    SilLossResult policy =
        SilPolicyLoss(critic, actor, si_batch, welfare_threshold, baseline);
    result.sil_value_loss = value.loss;
    result.sil_policy_loss = policy.loss;
    result.critic_gradient += value.gradient;
    result.actor_gradient += policy.gradient;
  }
  result.loss = result.critic_loss + result.actor_loss + result.sil_value_loss +
                result.sil_policy_loss;
  return result;
}

bool AcSilUpdate(AgentNetworks& nets, std::span<const Transition> on_policy,
                 std::span<const ReturnTransition> si_batch,
                 double welfare_threshold, BaselineMode baseline,
                 double discount, double actor_learning_rate,
                 double critic_learning_rate,
                 std::optional<AcSilLoss>* loss) {
  if (on_policy.empty() && si_batch.empty()) return true;
  AcSilLoss l = AcSilLossAndGradient(nets.policy, nets.q, on_policy, si_batch,
                                     welfare_threshold, baseline, discount);
  const bool actor_ok = nets.policy_optimizer.Step(nets.policy, l.actor_gradient,
                                                   actor_learning_rate);
  const bool critic_ok =
      nets.q_optimizer.Step(nets.q, l.critic_gradient, critic_learning_rate);
  if (loss != nullptr) *loss = std::move(l);
  return actor_ok && critic_ok;
}

}  // namespace nfsip::agents
