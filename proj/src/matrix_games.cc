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

#include "nfsip/matrix_games.h"

#include <cmath>
#include <stdexcept>

namespace nfsip::matrix_games {

MatrixGame::MatrixGame(int num_players, int num_actions,
                       std::vector<double> payoffs)
    : num_players_(num_players),
      num_actions_(num_actions),
      payoffs_(std::move(payoffs)) {
  if (num_players < 1 || num_actions < 1) {
    throw std::invalid_argument("matrix game: need at least one player and action");
  }
  std::size_t expected = 1;
  for (int p = 0; p < num_players; ++p) expected *= num_actions;
  if (payoffs_.size() != expected) {
    throw std::invalid_argument("matrix game: expected " +
                                std::to_string(expected) + " payoffs, got " +
                                std::to_string(payoffs_.size()));
  }
  for (double v : payoffs_) {
    if (!std::isfinite(v)) throw std::invalid_argument("matrix game: non-finite payoff");
  }
}

MatrixGame MatrixGame::SingleReward(int num_actions, int row, int col) {
  std::vector<double> payoffs(num_actions * num_actions, 0.0);
  payoffs.at(row * num_actions + col) = 1.0;
  return MatrixGame(2, num_actions, std::move(payoffs));
}

double MatrixGame::Payoff(std::span<const int> joint) const {
  if (static_cast<int>(joint.size()) != num_players_) {
    throw std::invalid_argument("matrix game: wrong number of actions");
  }
  int index = 0;
  for (int a : joint) {
    if (a < 0 || a >= num_actions_) {
      throw std::invalid_argument("matrix game: action out of range");
    }
    index = index * num_actions_ + a;
  }
  return payoffs_[index];
}

std::vector<int> MatrixGame::JointFromIndex(int index) const {
  std::vector<int> joint(num_players_);
  for (int p = num_players_ - 1; p >= 0; --p) {
    joint[p] = index % num_actions_;
    index /= num_actions_;
  }
  return joint;
}

std::vector<int> MatrixGame::BestJointAction() const {
  int best = 0;
  for (int i = 1; i < num_joint_actions(); ++i) {
    if (payoffs_[i] > payoffs_[best]) best = i;
  }
  return JointFromIndex(best);
}

std::vector<EmpiricalProfile> ExactFictitiousPlay(const MatrixGame& game,
                                                  int iterations,
                                                  TieRule tie_rule) {
  if (iterations < 1) {
    throw std::invalid_argument("fictitious play: iterations must be >= 1");
  }
  (void)tie_rule;  // kLowestIndex is the only rule.
  const int players = game.num_players();
  const int actions = game.num_actions();
  std::vector<Vector> counts(players, Vector::Zero(actions));
  std::vector<EmpiricalProfile> trace;
  trace.reserve(iterations);
  std::vector<Vector> beliefs(players, Vector::Constant(actions, 1.0 / actions));
  for (int it = 1; it <= iterations; ++it) {
    std::vector<int> responses(players);
    for (int p = 0; p < players; ++p) {
      Vector value = Vector::Zero(actions);
      for (int j = 0; j < game.num_joint_actions(); ++j) {
        const std::vector<int> joint = game.JointFromIndex(j);
        double prob = 1.0;
        for (int q = 0; q < players; ++q) {
          if (q != p) prob *= beliefs[q](joint[q]);
        }
        value(joint[p]) += prob * game.payoffs()[j];
      }
      int best = 0;
      for (int a = 1; a < actions; ++a) {
        if (value(a) > value(best)) best = a;
      }
      responses[p] = best;
    }
    EmpiricalProfile profile;
    for (int p = 0; p < players; ++p) {
      counts[p](responses[p]) += 1.0;
      beliefs[p] = counts[p] / static_cast<double>(it);
      profile.frequencies.push_back(beliefs[p]);
    }
    trace.push_back(std::move(profile));
  }
  return trace;
}

Vector MatrixGameEnv::Observe(int agent) const {
  if (agent < 0 || agent >= game_.num_players()) {
    throw std::invalid_argument("matrix game: agent id out of range");
  }
  Vector obs = Vector::Zero(observation_size());
  obs(0) = 1.0;
  obs(1 + agent) = 1.0;
  return obs;
}

std::vector<double> MatrixGameEnv::Step(const envs::JointAction& actions, Rng&) {
  if (done_) throw std::logic_error("matrix game: episode already finished");
  const double payoff = game_.Payoff(actions);
  done_ = true;
  return std::vector<double>(game_.num_players(), payoff);
}

SelfPlayConfig SelfPlayConfig::Defaults(trainer::Algorithm algo) {
  SelfPlayConfig config;
  trainer::TrainerConfig& t = config.trainer;
  t.algo = algo;
  t.lr_q = 1e-3;
  t.lr_policy = 1e-3;
  t.warmup = 64;
  t.sync_interval = 50;
  t.rl_capacity = 10000;
  t.sl_capacity = 100000;
  t.si_capacity = 1000;
  t.eta = 0.2;
  t.eta_schedule = trainer::EtaSchedule::kHarmonic;
  t.eta_decay_episodes = 1000.0;
  t.epsilon = 0.5;
  t.epsilon_decay = 0.98;
  t.epsilon_decay_interval = 10;
  return config;
}

SelfPlayResult NeuralSelfPlay(const MatrixGame& game,
                              const SelfPlayConfig& config, std::uint64_t seed) {
  auto env = std::make_unique<MatrixGameEnv>(game);
  std::vector<Vector> observations;
  for (int p = 0; p < game.num_players(); ++p) {
    observations.push_back(env->Observe(p));
  }
  trainer::Trainer trainer(config.trainer, std::move(env), seed);
  const std::vector<int> best = game.BestJointAction();

  SelfPlayResult result;
  auto evaluate = [&]() {
    result.final_policies.clear();
    result.final_mass.clear();
    bool all = true;
    for (int p = 0; p < game.num_players(); ++p) {
      Vector probs = neural::Softmax(
          neural::Predict(trainer.networks().policy, observations[p]));
      result.final_mass.push_back(probs(best[p]));
      all = all && probs(best[p]) >= config.threshold;
      result.final_policies.push_back(std::move(probs));
    }
    return all;
  };

  for (int episode = 1; episode <= config.episodes; ++episode) {
    trainer.TrainEpisode();
    if (episode % config.eval_interval == 0 || episode == config.episodes) {
      const bool reached = evaluate();
      if (reached && result.episodes_to_threshold < 0) {
        result.episodes_to_threshold = episode;
        if (config.stop_at_threshold) break;
      }
    }
  }
  if (result.final_policies.empty()) evaluate();
  result.counters = trainer.counters();
  return result;
}

}  // namespace nfsip::matrix_games
