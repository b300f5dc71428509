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

// Cooperative grid worlds with sparse task-completion rewards:
//
//   box pushing    generic agents; v1 one agent completes a box, v2 needs two
//   fire fighting  fire trucks; completion odds depend on fire intensity and
//                  on the number of trucks acting; v2 fires escalate
//   search/rescue  ambulances and fire trucks; a victim needs both types,
//                  v2 victims escalate and then need two of each
//
// Agents act simultaneously. A task is attempted by every agent standing on
// its cell and choosing kAct in the same step.

#ifndef NFSIP_ENVS_H_
#define NFSIP_ENVS_H_

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nfsip/neural.h"
#include "nfsip/random.h"

namespace nfsip::envs {

using neural::Vector;

enum class Domain { kBoxPushing, kFireFighting, kSearchRescue };
enum class Variant { kV1, kV2 };
enum class AgentType { kGeneric = 0, kFiretruck = 1, kAmbulance = 2 };
enum class TaskKind { kBox = 0, kFire = 1, kVictim = 2 };
enum class TaskLevel { kLow = 0, kHigh = 1 };
enum class LayoutMode { kFixed, kRandom };

enum Action : int {
  kMoveLeft = 0,
  kMoveRight = 1,
  kMoveUp = 2,
  kMoveDown = 3,
  kAct = 4,
  kStay = 5,
};
inline constexpr int kNumActions = 6;

using JointAction = std::vector<int>;

struct Position {
  int x = 0;
  int y = 0;
  auto operator<=>(const Position&) const = default;
};

struct AgentRecord {
  int id = 0;
  AgentType type = AgentType::kGeneric;
  Position pos;
  bool operator==(const AgentRecord&) const = default;
};

struct TaskRecord {
  Position pos;
  TaskKind kind = TaskKind::kBox;
  TaskLevel level = TaskLevel::kLow;
  bool done = false;
  bool operator==(const TaskRecord&) const = default;
};

struct DomainSpec {
  Domain domain = Domain::kBoxPushing;
  Variant variant = Variant::kV1;
  int width = 4;
  int height = 4;
  int generic_agents = 0;
  int firetrucks = 0;
  int ambulances = 0;
  int tasks = 4;
  int horizon = 50;
  // Shared equally by the agents acting on a task when it completes.
  double task_reward = 10.0;
  double escalation_probability = 0.2;

  int num_agents() const { return generic_agents + firetrucks + ambulances; }
  bool operator==(const DomainSpec&) const = default;
  // Throws std::invalid_argument describing the first problem found.
  void Validate() const;

  // Benchmark instances on a 4x4 grid.
  static DomainSpec BoxPushing(Variant variant);
  static DomainSpec FireFighting(Variant variant);
  static DomainSpec SearchRescue(Variant variant);
};

// 50 steps up to 4x4, 80 beyond.
int DefaultHorizon(int width, int height);

struct EnvState {
  int width = 0;
  int height = 0;
  std::vector<AgentRecord> agents;
  std::vector<TaskRecord> tasks;
  int step = 0;
  int horizon = 0;

  int tasks_remaining() const;
  bool terminal() const { return tasks_remaining() == 0 || step >= horizon; }
  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  std::vector<double> rewards;  // one per agent
  bool done = false;
};

struct ActingCounts {
  int generic = 0;
  int firetrucks = 0;
  int ambulances = 0;
  int total() const { return generic + firetrucks + ambulances; }
};

// Tasks at distinct uniformly drawn cells; agents at uniformly drawn cells,
// possibly shared. Same (spec, seed) gives the same layout.
EnvState Reset(const DomainSpec& spec, std::uint64_t seed);

// Moves (clamped at the border), resolves tasks, escalates remaining v2
// tasks, and advances the step counter. Throws std::logic_error on a
// terminal state.
StepResult Step(const DomainSpec& spec, const EnvState& state,
                const JointAction& actions, Rng& rng);

// Probability that a task completes this step given who acts on it.
double CompletionProbability(const DomainSpec& spec, TaskLevel level,
                             const ActingCounts& acting);

// Layout of the observation vector:
//   cells * kPlanes occupancy values, plane-major per cell:
//     [generic, firetruck, ambulance,
//      box-low, box-high, fire-low, fire-high, victim-low, victim-high,
//      done task]
//   own position (x / (width-1), y / (height-1))
//   one-hot agent id
inline constexpr int kPlanes = 10;
int ObservationSize(int width, int height, int num_agents);
Vector EncodeObservation(const EnvState& state, int agent_id);

double SocialWelfare(std::span<const double> per_agent_returns);

// "<step> <a0,a1,...> <r0,r1,...> <tasks remaining>"
std::string TrajectoryLine(int step, const JointAction& actions,
                           std::span<const double> rewards,
                           int tasks_remaining);

// Episodic multi-agent environment as seen by the trainer.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  virtual int observation_size() const = 0;
  // Starts a new episode.
  virtual void Reset(Rng& rng) = 0;
  virtual Vector Observe(int agent) const = 0;
  // Per-agent rewards for the step.
  virtual std::vector<double> Step(const JointAction& actions, Rng& rng) = 0;
  virtual bool done() const = 0;
  virtual int steps_taken() const = 0;
  virtual int tasks_remaining() const = 0;
};

class GridWorldEnv : public Environment {
 public:
  // kFixed replays the layout of `layout_seed` every episode; kRandom draws
  // a fresh layout seed from the reset rng.
  GridWorldEnv(DomainSpec spec, std::uint64_t layout_seed,
               LayoutMode mode = LayoutMode::kFixed);

  int num_agents() const override { return spec_.num_agents(); }
  int num_actions() const override { return kNumActions; }
  int observation_size() const override;
  void Reset(Rng& rng) override;
  Vector Observe(int agent) const override;
  std::vector<double> Step(const JointAction& actions, Rng& rng) override;
  bool done() const override { return state_.terminal(); }
  int steps_taken() const override { return state_.step; }
  int tasks_remaining() const override { return state_.tasks_remaining(); }

  const DomainSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }

 private:
  DomainSpec spec_;
  std::uint64_t layout_seed_;
  LayoutMode mode_;
  EnvState state_;
};

std::string DomainName(Domain domain);
std::string VariantName(Variant variant);

}  // namespace nfsip::envs

#endif  // NFSIP_ENVS_H_
