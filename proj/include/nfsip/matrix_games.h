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

// Identical-interest normal-form games: an exact fictitious-play reference
// and neural self-play on the game played as a one-step episode.

#ifndef NFSIP_MATRIX_GAMES_H_
#define NFSIP_MATRIX_GAMES_H_

#include <cstdint>
#include <span>
#include <vector>

#include "nfsip/envs.h"
#include "nfsip/neural.h"
#include "nfsip/trainer.h"

namespace nfsip::matrix_games {

using neural::Vector;

// Every player receives payoff(joint action).
class MatrixGame {
 public:
  // `payoffs` is row-major over the joint action: player 0 is the slowest
  // varying index.
  MatrixGame(int num_players, int num_actions, std::vector<double> payoffs);

  // Two players, payoff 1 at (row, col), 0 elsewhere.
  static MatrixGame SingleReward(int num_actions, int row, int col);

  int num_players() const { return num_players_; }
  int num_actions() const { return num_actions_; }
  int num_joint_actions() const { return static_cast<int>(payoffs_.size()); }
  double Payoff(std::span<const int> joint) const;
  const std::vector<double>& payoffs() const { return payoffs_; }
  std::vector<int> JointFromIndex(int index) const;
  // Joint action with the highest payoff; lowest index on ties.
  std::vector<int> BestJointAction() const;

 private:
  int num_players_;
  int num_actions_;
  std::vector<double> payoffs_;
};

enum class TieRule { kLowestIndex };

// Per-player empirical action frequencies after some iteration.
struct EmpiricalProfile {
  std::vector<Vector> frequencies;
};

// Iteration 1 best-responds to uniform opponents; later iterations to the
// opponents' empirical frequencies. Returns the profile after every
// iteration.
std::vector<EmpiricalProfile> ExactFictitiousPlay(const MatrixGame& game,
                                                  int iterations,
                                                  TieRule tie_rule = TieRule::kLowestIndex);

// The game as a one-step episode. Observations are a constant bias feature
// plus a one-hot player id; every player is rewarded the joint payoff.
class MatrixGameEnv : public envs::Environment {
 public:
  explicit MatrixGameEnv(MatrixGame game) : game_(std::move(game)) {}

  int num_agents() const override { return game_.num_players(); }
  int num_actions() const override { return game_.num_actions(); }
  int observation_size() const override { return 1 + game_.num_players(); }
  void Reset(Rng&) override { done_ = false; }
  Vector Observe(int agent) const override;
  std::vector<double> Step(const envs::JointAction& actions, Rng&) override;
  bool done() const override { return done_; }
  int steps_taken() const override { return done_ ? 1 : 0; }
  int tasks_remaining() const override { return done_ ? 0 : 1; }

 private:
  MatrixGame game_;
  bool done_ = false;
};

struct SelfPlayConfig {
  trainer::TrainerConfig trainer;
  int episodes = 5000;
  int eval_interval = 25;
  double threshold = 0.9;
  bool stop_at_threshold = false;

  // Settings for one-step games: eta decays toward zero, epsilon decays
  // quickly, short warm-up and small buffers.
  static SelfPlayConfig Defaults(trainer::Algorithm algo);
};

struct SelfPlayResult {
  std::vector<Vector> final_policies;  // average policy per player
  // Mass each player's average policy puts on its part of the best joint
  // action, at the end of training.
  std::vector<double> final_mass;
  // First evaluated episode count at which every player's mass reached the
  // threshold; -1 if never.
  std::int64_t episodes_to_threshold = -1;
  trainer::Counters counters;
};

SelfPlayResult NeuralSelfPlay(const MatrixGame& game,
                              const SelfPlayConfig& config, std::uint64_t seed);

}  // namespace nfsip::matrix_games

#endif  // NFSIP_MATRIX_GAMES_H_
