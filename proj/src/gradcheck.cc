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

#include "nfsip/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>

#include "nfsip/agents.h"
#include "nfsip/buffers.h"
#include "nfsip/neural.h"
#include "nfsip/random.h"

namespace nfsip::gradcheck {
namespace {

using agents::BaselineMode;
using buffers::BestResponsePair;
using buffers::ReturnTransition;
using buffers::Transition;
using neural::GradientSet;
using neural::Matrix;
using neural::NetworkShape;
using neural::ParameterSet;
using neural::Vector;

constexpr double kWelfareThreshold = 5.0;
constexpr int kMaxAttemptsPerDraw = 200;

double Uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

ParameterSet RandomNetwork(const NetworkShape& shape, Rng& rng) {
  ParameterSet params = ParameterSet::Initialize(shape, rng);
  for (neural::LayerTensors& layer : params.layers()) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias(i) = Uniform(rng, -0.2, 0.2);
    }
    for (Eigen::Index i = 0; i < layer.gain.size(); ++i) {
      layer.gain(i) = Uniform(rng, 0.6, 1.4);
      layer.offset(i) = Uniform(rng, -0.3, 0.3);
    }
  }
  return params;
}

Vector RandomState(int size, Rng& rng) {
  Vector v(size);
  for (int i = 0; i < size; ++i) v(i) = Uniform(rng, -1.0, 1.0);
  return v;
}

// True if some ReLU input lies within `margin` of zero.
bool NearReluKink(const ParameterSet& params, const Matrix& states,
                  double margin) {
  const neural::ForwardTrace trace = neural::Forward(params, states);
  for (const neural::LayerTrace& layer : trace.layers) {
    if (layer.activated.size() > 0 &&
        layer.activated.cwiseAbs().minCoeff() < margin) {
      return true;
    }
  }
  return false;
}

template <typename T>
Matrix States(const std::vector<T>& batch) {
  return agents::StackStates(std::span<const T>(batch));
}

double Check(const GradientSet& analytic,
             const std::function<double(const ParameterSet&)>& loss,
             const ParameterSet& at, double step) {
  const GradientSet numeric = neural::FiniteDifferenceGradient(loss, at, step);
  return neural::MaxRelativeError(analytic, numeric);
}

std::vector<Transition> RandomTransitions(const GradCheckConfig& c, Rng& rng) {
  std::vector<Transition> batch;
  for (int i = 0; i < c.batch_size; ++i) {
    batch.push_back(Transition{RandomState(c.input_size, rng),
                               UniformInt(rng, c.num_actions),
                               Uniform(rng, -1.0, 1.0),
                               RandomState(c.input_size, rng),
                               Uniform01(rng) < 0.25});
  }
  return batch;
}

std::vector<ReturnTransition> RandomReturns(const GradCheckConfig& c, Rng& rng) {
  static constexpr double kWelfare[] = {3.0, kWelfareThreshold, 8.0};
  std::vector<ReturnTransition> batch;
  for (int i = 0; i < c.batch_size; ++i) {
    ReturnTransition t;
    t.state = RandomState(c.input_size, rng);
    t.action = UniformInt(rng, c.num_actions);
    t.cumulative_return = Uniform(rng, -0.5, 2.0);
    t.next_state = RandomState(c.input_size, rng);
    t.episode_welfare = kWelfare[UniformInt(rng, 3)];
    t.priority = std::max(t.cumulative_return, 1e-3);
    batch.push_back(std::move(t));
  }
  return batch;
}

// Per-sample value baselines for the self-imitation batch.
std::vector<double> Values(const ParameterSet& q, const std::vector<Vector>& pi_rows,
                           const std::vector<ReturnTransition>& batch,
                           BaselineMode baseline) {
  const Matrix q_rows = neural::Predict(q, States(batch));
  std::vector<double> values;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    values.push_back(agents::StateValue(q_rows.col(i), pi_rows[i], baseline));
  }
  return values;
}

std::vector<Vector> PolicyRows(const ParameterSet& policy,
                               const std::vector<ReturnTransition>& batch) {
  const Matrix probs = neural::Softmax(neural::Predict(policy, States(batch)));
  std::vector<Vector> rows;
  for (Eigen::Index i = 0; i < probs.cols(); ++i) rows.push_back(probs.col(i));
  return rows;
}

// Rejects batches with no positive advantage or a gated return-minus-value
// near the clipping kink.
bool UsableSilBatch(const std::vector<ReturnTransition>& batch,
                    const std::vector<double>& values, double margin) {
  bool any_positive = false;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].episode_welfare < kWelfareThreshold) continue;
    const double diff = batch[i].cumulative_return - values[i];
    if (std::abs(diff) < margin) return false;
    any_positive = any_positive || diff > 0.0;
  }
  return any_positive;
}

double SilValueTerm(const ParameterSet& q, const std::vector<Vector>& pi_rows,
                    const std::vector<ReturnTransition>& batch,
                    BaselineMode baseline) {
  const std::vector<double> values = Values(q, pi_rows, batch, baseline);
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double g = agents::ClippedAdvantage(batch[i].cumulative_return,
                                              values[i], batch[i].episode_welfare,
                                              kWelfareThreshold);
    sum += g * g;
  }
  return sum / static_cast<double>(batch.size());
}

// mean weight_i * (-log pi(a_i | s_i)).
template <typename T>
double WeightedNll(const ParameterSet& policy, const std::vector<T>& batch,
                   const std::vector<double>& weights) {
  const Matrix log_pi = neural::LogSoftmax(neural::Predict(policy, States(batch)));
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum -= weights[i] * log_pi(batch[i].action, static_cast<Eigen::Index>(i));
  }
  return sum / static_cast<double>(batch.size());
}

class Runner {
 public:
  explicit Runner(const GradCheckConfig& config)
      : c_(config),
        shape_{config.input_size, config.hidden_sizes, config.num_actions} {}

  LossCheck Run(const std::string& name, std::uint64_t stream,
                const std::function<std::optional<double>(Rng&, int)>& draw) {
    LossCheck check;
    check.name = name;
    Rng rng = MakeRng(c_.seed, stream);
    while (check.draws < c_.draws) {
      if (check.redraws > kMaxAttemptsPerDraw * c_.draws) {
        throw std::runtime_error("gradcheck: could not find usable draws for " +
                                 name);
      }
      const std::optional<double> error = draw(rng, check.draws);
      if (!error) {
        ++check.redraws;
        continue;
      }
      check.max_relative_error = std::max(check.max_relative_error, *error);
      ++check.draws;
    }
    check.passed = check.max_relative_error <= c_.tolerance;
    return check;
  }

  std::optional<double> QDraw(Rng& rng, int) {
    const ParameterSet q = RandomNetwork(shape_, rng);
    const ParameterSet target = RandomNetwork(shape_, rng);
    const std::vector<Transition> batch = RandomTransitions(c_, rng);
    if (NearReluKink(q, States(batch), c_.kink_margin)) return std::nullopt;
    const agents::LossResult analytic = agents::QLoss(q, target, batch, 0.9);
    return Check(
        analytic.gradient,
        [&](const ParameterSet& p) { return agents::QLoss(p, target, batch, 0.9).loss; },
        q, c_.step);
  }

  std::optional<double> PolicyDraw(Rng& rng, int) {
    const ParameterSet policy = RandomNetwork(shape_, rng);
    std::vector<BestResponsePair> batch;
    for (int i = 0; i < c_.batch_size; ++i) {
      batch.push_back(BestResponsePair{RandomState(c_.input_size, rng),
                                       UniformInt(rng, c_.num_actions)});
    }
    if (NearReluKink(policy, States(batch), c_.kink_margin)) return std::nullopt;
    const agents::LossResult analytic = agents::PolicyLoss(policy, batch);
    const std::vector<double> ones(batch.size(), 1.0);
    return Check(
        analytic.gradient,
        [&](const ParameterSet& p) { return WeightedNll(p, batch, ones); },
        policy, c_.step);
  }

  std::optional<double> SilQDraw(Rng& rng, int draw) {
    const BaselineMode baseline =
        draw % 2 == 0 ? BaselineMode::kPolicyWeighted : BaselineMode::kUniform;
    const ParameterSet q = RandomNetwork(shape_, rng);
    const ParameterSet policy = RandomNetwork(shape_, rng);
    const std::vector<ReturnTransition> batch = RandomReturns(c_, rng);
    if (NearReluKink(q, States(batch), c_.kink_margin)) return std::nullopt;
    const std::vector<Vector> rows = PolicyRows(policy, batch);
    if (!UsableSilBatch(batch, Values(q, rows, batch, baseline), c_.kink_margin)) {
      return std::nullopt;
    }
    const agents::SilLossResult analytic =
        agents::SilQLoss(q, policy, batch, kWelfareThreshold, baseline);
    return Check(
        analytic.gradient,
        [&](const ParameterSet& p) { return SilValueTerm(p, rows, batch, baseline); },
        q, c_.step);
  }

  std::optional<double> SilPolicyDraw(Rng& rng, int draw) {
    const BaselineMode baseline =
        draw % 2 == 0 ? BaselineMode::kPolicyWeighted : BaselineMode::kUniform;
    const ParameterSet q = RandomNetwork(shape_, rng);
    const ParameterSet policy = RandomNetwork(shape_, rng);
    const std::vector<ReturnTransition> batch = RandomReturns(c_, rng);
    if (NearReluKink(policy, States(batch), c_.kink_margin)) return std::nullopt;
    const std::vector<double> values =
        Values(q, PolicyRows(policy, batch), batch, baseline);
    if (!UsableSilBatch(batch, values, c_.kink_margin)) return std::nullopt;
    std::vector<double> gammas;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      gammas.push_back(agents::ClippedAdvantage(batch[i].cumulative_return,
                                                values[i], batch[i].episode_welfare,
                                                kWelfareThreshold));
    }
    const agents::SilLossResult analytic =
        agents::SilPolicyLoss(q, policy, batch, kWelfareThreshold, baseline);
    return Check(
        analytic.gradient,
        [&](const ParameterSet& p) { return WeightedNll(p, batch, gammas); },
        policy, c_.step);
  }

  std::optional<double> AcSilDraw(Rng& rng, int draw) {
    const BaselineMode baseline =
        draw % 2 == 0 ? BaselineMode::kPolicyWeighted : BaselineMode::kUniform;
    const double discount = 0.95;
    const ParameterSet actor = RandomNetwork(shape_, rng);
    const ParameterSet critic = RandomNetwork(shape_, rng);
    const std::vector<Transition> on_policy = RandomTransitions(c_, rng);
    const std::vector<ReturnTransition> si = RandomReturns(c_, rng);
    for (const ParameterSet* net : {&actor, &critic}) {
      if (NearReluKink(*net, States(on_policy), c_.kink_margin) ||
          NearReluKink(*net, States(si), c_.kink_margin)) {
        return std::nullopt;
      }
    }
    const std::vector<Vector> rows = PolicyRows(actor, si);
    if (!UsableSilBatch(si, Values(critic, rows, si, baseline), c_.kink_margin)) {
      return std::nullopt;
    }
    const agents::AcSilLoss analytic = agents::AcSilLossAndGradient(
        actor, critic, on_policy, si, kWelfareThreshold, baseline, discount);
    const agents::ActorCriticConstants& k = analytic.constants;
    const double n = static_cast<double>(on_policy.size());

    auto total = [&](const ParameterSet& a, const ParameterSet& cr) {
      const Matrix q_rows = neural::Predict(cr, States(on_policy));
      double critic_loss = 0.0;
      for (std::size_t i = 0; i < on_policy.size(); ++i) {
        const double td =
            k.critic_targets[i] - q_rows(on_policy[i].action, static_cast<Eigen::Index>(i));
        critic_loss += td * td / n;
      }
      return critic_loss + WeightedNll(a, on_policy, k.advantages) +
             SilValueTerm(cr, k.si_policy_rows, si, baseline) +
             WeightedNll(a, si, k.si_clipped_advantages);
    };
    const double actor_error = Check(
        analytic.actor_gradient,
        [&](const ParameterSet& a) { return total(a, critic); }, actor, c_.step);
    const double critic_error = Check(
        analytic.critic_gradient,
        [&](const ParameterSet& cr) { return total(actor, cr); }, critic, c_.step);
    return std::max(actor_error, critic_error);
  }

 private:
  GradCheckConfig c_;
  NetworkShape shape_;
};

}  // namespace

std::vector<LossCheck> RunGradientChecks(const GradCheckConfig& config) {
  if (config.draws < 1 || config.batch_size < 1 || config.num_actions < 2) {
    throw std::invalid_argument("gradcheck: need draws >= 1, batch >= 1, actions >= 2");
  }
  Runner runner(config);
  using std::placeholders::_1;
  using std::placeholders::_2;
  return {
      runner.Run("q", 1, std::bind(&Runner::QDraw, &runner, _1, _2)),
      runner.Run("policy", 2, std::bind(&Runner::PolicyDraw, &runner, _1, _2)),
      runner.Run("sil_q", 3, std::bind(&Runner::SilQDraw, &runner, _1, _2)),
      runner.Run("sil_policy", 4, std::bind(&Runner::SilPolicyDraw, &runner, _1, _2)),
      runner.Run("acsil", 5, std::bind(&Runner::AcSilDraw, &runner, _1, _2)),
  };
}

}  // namespace nfsip::gradcheck
