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

#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

namespace nfsip::trainer {
namespace {

envs::DomainSpec SmallBox() {
  envs::DomainSpec spec = envs::DomainSpec::BoxPushing(envs::Variant::kV1);
  spec.width = 3;
  spec.height = 3;
  spec.generic_agents = 2;
  spec.tasks = 2;
  spec.horizon = 12;
  return spec;
}

TrainerConfig SmallConfig(Algorithm algo) {
  TrainerConfig c;
  c.algo = algo;
  c.hidden_sizes = {8, 8};
  c.batch_size = 8;
  c.warmup = 20;
  c.sync_interval = 7;
  c.epsilon_decay_interval = 10;
  return c;
}

Trainer MakeTrainer(const TrainerConfig& config, std::uint64_t seed = 3) {
  return Trainer(config, std::make_unique<envs::GridWorldEnv>(SmallBox(), seed),
                 seed);
}

bool SameParams(const neural::ParameterSet& a, const neural::ParameterSet& b) {
  const auto va = a.Views();
  const auto vb = b.Views();
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    for (std::size_t j = 0; j < va[i].size(); ++j) {
      if (va[i][j] != vb[i][j]) return false;
    }
  }
  return true;
}

TEST(TrainerTest, EtaOneStoresEveryStepInSupervisedBuffer) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.eta = 1.0;
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 5; ++e) t.TrainEpisode();
  EXPECT_EQ(t.counters().sl_insertions, 2 * t.counters().steps);
  EXPECT_EQ(t.counters().rl_insertions, 2 * t.counters().steps);
}

TEST(TrainerTest, EtaZeroStoresNothingInSupervisedBuffer) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.eta = 0.0;
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 5; ++e) t.TrainEpisode();
  EXPECT_EQ(t.counters().sl_insertions, 0);
  EXPECT_EQ(t.sl_buffer().size(), 0u);
  EXPECT_EQ(t.counters().policy_updates, 0);
}

TEST(TrainerTest, BehaviourModeIsFixedWithinAnEpisode) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 20; ++e) {
    const std::int64_t before = t.counters().sl_insertions;
    const EpisodeRecord r = t.RunEpisode();
    t.EndOfEpisode(r);
    int best_response = 0;
    for (agents::BehaviorMode m : r.modes) {
      best_response += m == agents::BehaviorMode::kBestResponse;
    }
    EXPECT_EQ(t.counters().sl_insertions - before,
              static_cast<std::int64_t>(best_response) * r.length);
  }
}

TEST(TrainerTest, CountersFollowTheSchedule) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 12; ++e) t.TrainEpisode();
  const Counters& n = t.counters();
  EXPECT_EQ(n.episodes, 12);
  EXPECT_EQ(n.target_syncs, n.steps / 7);
  EXPECT_EQ(n.epsilon_decays, n.steps / 10);
  EXPECT_NEAR(t.schedule().epsilon, 0.5 * std::pow(0.98, n.epsilon_decays),
              1e-15);
  // One Q update per step once the RL buffer holds `warmup` transitions;
  // two transitions arrive per step.
  EXPECT_EQ(n.q_updates, n.steps - (c.warmup / 2) + 1);
  EXPECT_EQ(n.sil_rounds, 0);
  EXPECT_EQ(n.rejected_updates, 0);
}

TEST(TrainerTest, EpsilonDecaysByTwoPercentPerInterval) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.epsilon_decay_interval = 500;
  Trainer t = MakeTrainer(c);
  while (t.counters().steps < 500) t.TrainEpisode();
  ASSERT_LT(t.counters().steps, 1000);
  EXPECT_DOUBLE_EQ(t.schedule().epsilon, 0.49);
  while (t.counters().steps < 1000) t.TrainEpisode();
  ASSERT_LT(t.counters().steps, 1500);
  EXPECT_NEAR(t.schedule().epsilon, 0.4802, 1e-15);
}

TEST(TrainerTest, EpisodeDecayUnit) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.decay_unit = DecayUnit::kEpisodes;
  c.epsilon_decay_interval = 3;
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 7; ++e) t.TrainEpisode();
  EXPECT_EQ(t.counters().epsilon_decays, 2);
  EXPECT_DOUBLE_EQ(t.schedule().epsilon, 0.5 * 0.98 * 0.98);
}

TEST(TrainerTest, HarmonicEtaSchedule) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.eta_schedule = EtaSchedule::kHarmonic;
  c.eta_decay_episodes = 4.0;
  Trainer t = MakeTrainer(c);
  EXPECT_DOUBLE_EQ(t.current_eta(), 0.2);
  for (int e = 0; e < 4; ++e) t.TrainEpisode();
  EXPECT_DOUBLE_EQ(t.current_eta(), 0.1);
}

TEST(TrainerTest, TargetSyncCopiesOnlineNetwork) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.sync_interval = 1000000;
  Trainer t = MakeTrainer(c);
  for (int e = 0; e < 5; ++e) t.TrainEpisode();
  ASSERT_GT(t.counters().q_updates, 0);
  EXPECT_FALSE(SameParams(t.networks().q, t.networks().target_q));
  t.SyncTarget();
  EXPECT_TRUE(SameParams(t.networks().q, t.networks().target_q));
}

TEST(TrainerTest, FixedSeedReproducesEverything) {
  for (Algorithm algo : {Algorithm::kNfsp, Algorithm::kNfsip, Algorithm::kAcSil}) {
    Trainer a = MakeTrainer(SmallConfig(algo), 9);
    Trainer b = MakeTrainer(SmallConfig(algo), 9);
    for (int e = 0; e < 8; ++e) {
      const EpisodeRecord ra = a.RunEpisode();
      const EpisodeRecord rb = b.RunEpisode();
      ASSERT_EQ(ra.welfare, rb.welfare);
      ASSERT_EQ(ra.length, rb.length);
      ASSERT_EQ(ra.modes, rb.modes);
      for (std::size_t i = 0; i < ra.trajectories.size(); ++i) {
        for (std::size_t s = 0; s < ra.trajectories[i].size(); ++s) {
          ASSERT_EQ(ra.trajectories[i][s].action, rb.trajectories[i][s].action);
          ASSERT_EQ(ra.trajectories[i][s].state, rb.trajectories[i][s].state);
        }
      }
      a.EndOfEpisode(ra);
      b.EndOfEpisode(rb);
    }
    EXPECT_EQ(a.counters(), b.counters());
    EXPECT_TRUE(SameParams(a.networks().q, b.networks().q));
    EXPECT_TRUE(SameParams(a.networks().policy, b.networks().policy));
  }
}

TEST(TrainerTest, NfsipWithoutSelfImitationIsNfsp) {
  TrainerConfig nfsp = SmallConfig(Algorithm::kNfsp);
  TrainerConfig nfsip = SmallConfig(Algorithm::kNfsip);
  nfsip.sil_iterations = 0;
  Trainer a = MakeTrainer(nfsp, 5);
  Trainer b = MakeTrainer(nfsip, 5);
  for (int e = 0; e < 30; ++e) ASSERT_EQ(a.TrainEpisode(), b.TrainEpisode());
  EXPECT_EQ(a.counters(), b.counters());
  EXPECT_TRUE(SameParams(a.networks().q, b.networks().q));
  EXPECT_TRUE(SameParams(a.networks().target_q, b.networks().target_q));
  EXPECT_TRUE(SameParams(a.networks().policy, b.networks().policy));
  EXPECT_TRUE(b.si_buffer().empty());
}

TEST(TrainerTest, NfsipRunsSelfImitationRounds) {
  Trainer t = MakeTrainer(SmallConfig(Algorithm::kNfsip));
  for (int e = 0; e < 10; ++e) t.TrainEpisode();
  EXPECT_EQ(t.counters().sil_rounds, 50);
  EXPECT_EQ(t.sil_log().size(), 50u);
  EXPECT_FALSE(t.si_buffer().empty());
  EXPECT_GE(t.counters().si_resets, 1);
}

TEST(TrainerTest, SilLogMixingCoefficientIdentity) {
  Trainer t = MakeTrainer(SmallConfig(Algorithm::kNfsip));
  for (int e = 0; e < 15; ++e) t.TrainEpisode();
  for (const SilUpdateLog& log : t.sil_log()) {
    EXPECT_EQ(log.mixing_coefficient,
              (1.0 + log.mean_clipped_advantage) /
                  static_cast<double>(log.iteration + 1));
    EXPECT_GE(log.mean_clipped_advantage, 0.0);
  }
}

TEST(TrainerTest, SilPhaseOnEmptyBufferDoesNothing) {
  Trainer t = MakeTrainer(SmallConfig(Algorithm::kNfsip));
  const neural::ParameterSet q = t.networks().q;
  t.SilPhase(5);
  EXPECT_EQ(t.counters().sil_rounds, 0);
  EXPECT_TRUE(SameParams(q, t.networks().q));
}

TEST(TrainerTest, SilPhaseLeavesParametersWhenNoSampleImproves) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsip);
  c.optimizer = neural::OptimizerKind::kSgd;
  Trainer t = MakeTrainer(c);
  const int inputs = t.env().observation_size();
  std::vector<buffers::EpisodeStep> steps;
  for (int i = 0; i < 10; ++i) {
    steps.push_back({neural::Vector::Constant(inputs, 0.1 * i), i % 5, -1000.0,
                     neural::Vector::Zero(inputs), i % 2});
  }
  t.mutable_si_buffer().ConsiderEpisode(steps, 3.0);
  const agents::AgentNetworks before = t.networks();
  t.SilPhase(5);
  EXPECT_EQ(t.counters().sil_rounds, 5);
  EXPECT_TRUE(SameParams(before.q, t.networks().q));
  EXPECT_TRUE(SameParams(before.policy, t.networks().policy));
  for (const SilUpdateLog& log : t.sil_log()) {
    EXPECT_EQ(log.value_loss, 0.0);
    EXPECT_EQ(log.policy_loss, 0.0);
  }
}

TEST(TrainerTest, AcSilUpdatesEveryStepWithoutSupervisedBuffer) {
  Trainer t = MakeTrainer(SmallConfig(Algorithm::kAcSil));
  for (int e = 0; e < 5; ++e) t.TrainEpisode();
  EXPECT_EQ(t.counters().actor_critic_updates, t.counters().steps);
  EXPECT_EQ(t.counters().sl_insertions, 0);
  EXPECT_EQ(t.counters().q_updates, 0);
  EXPECT_EQ(t.counters().sil_rounds, 25);
}

TEST(TrainerTest, RejectsInvalidConfig) {
  TrainerConfig c = SmallConfig(Algorithm::kNfsp);
  c.batch_size = 0;
  EXPECT_THROW(MakeTrainer(c), std::invalid_argument);
  c = SmallConfig(Algorithm::kNfsp);
  c.sync_interval = 0;
  EXPECT_THROW(MakeTrainer(c), std::invalid_argument);
}

TEST(TrainerTest, AlgorithmNames) {
  EXPECT_EQ(AlgorithmName(Algorithm::kNfsp), "nfsp");
  EXPECT_EQ(AlgorithmName(Algorithm::kNfsip), "nfsip");
  EXPECT_EQ(AlgorithmName(Algorithm::kAcSil), "acsil");
}

}  // namespace
}  // namespace nfsip::trainer
