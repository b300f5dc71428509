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

#include "nfsip/envs.h"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nfsip::envs {
namespace {

TaskKind KindFor(Domain domain) {
  switch (domain) {
    case Domain::kBoxPushing:
      return TaskKind::kBox;
    case Domain::kFireFighting:
      return TaskKind::kFire;
    case Domain::kSearchRescue:
      return TaskKind::kVictim;
  }
  return TaskKind::kBox;
}

bool Escalates(const DomainSpec& spec) {
  return spec.variant == Variant::kV2 && spec.domain != Domain::kBoxPushing;
}

Position Move(Position p, int action, int width, int height) {
  switch (action) {
    case kMoveLeft:
      p.x = std::max(0, p.x - 1);
      break;
    case kMoveRight:
      p.x = std::min(width - 1, p.x + 1);
      break;
    case kMoveUp:
      p.y = std::max(0, p.y - 1);
      break;
    case kMoveDown:
      p.y = std::min(height - 1, p.y + 1);
      break;
    default:
      break;
  }
  return p;
}

}  // namespace

void DomainSpec::Validate() const {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("domain: grid must be at least 1x1");
  }
  if (generic_agents < 0 || firetrucks < 0 || ambulances < 0 ||
      num_agents() <= 0) {
    throw std::invalid_argument("domain: need at least one agent");
  }
  if (tasks <= 0) throw std::invalid_argument("domain: need at least one task");
  if (tasks + num_agents() > width * height) {
    throw std::invalid_argument(
        "domain: " + std::to_string(tasks + num_agents()) +
        " entities do not fit on a " + std::to_string(width) + "x" +
        std::to_string(height) + " grid");
  }
  if (horizon <= 0) throw std::invalid_argument("domain: horizon must be > 0");
  if (!(escalation_probability >= 0.0 && escalation_probability <= 1.0)) {
    throw std::invalid_argument("domain: escalation probability outside [0, 1]");
  }
  switch (domain) {
    case Domain::kBoxPushing:
      if (firetrucks != 0 || ambulances != 0) {
        throw std::invalid_argument("domain: box pushing uses generic agents only");
      }
      break;
    case Domain::kFireFighting:
      if (generic_agents != 0 || ambulances != 0) {
        throw std::invalid_argument("domain: fire fighting uses fire trucks only");
      }
      break;
    case Domain::kSearchRescue:
      if (generic_agents != 0) {
        throw std::invalid_argument(
            "domain: search and rescue uses ambulances and fire trucks only");
      }
      break;
  }
}

DomainSpec DomainSpec::BoxPushing(Variant variant) {
  DomainSpec spec;
  spec.domain = Domain::kBoxPushing;
  spec.variant = variant;
  spec.generic_agents = 5;
  spec.tasks = 4;
  return spec;
}

DomainSpec DomainSpec::FireFighting(Variant variant) {
  DomainSpec spec;
  spec.domain = Domain::kFireFighting;
  spec.variant = variant;
  spec.firetrucks = 10;
  spec.tasks = 4;
  return spec;
}

DomainSpec DomainSpec::SearchRescue(Variant variant) {
  DomainSpec spec;
  spec.domain = Domain::kSearchRescue;
  spec.variant = variant;
  spec.ambulances = 5;
  spec.firetrucks = 5;
  spec.tasks = 4;
  return spec;
}

int DefaultHorizon(int width, int height) {
  return std::max(width, height) <= 4 ? 50 : 80;
}

int EnvState::tasks_remaining() const {
  return static_cast<int>(std::count_if(
      tasks.begin(), tasks.end(), [](const TaskRecord& t) { return !t.done; }));
}

EnvState Reset(const DomainSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng = MakeRng(seed, 0x6c61796f7574ULL);
  EnvState state;
  state.width = spec.width;
  state.height = spec.height;
  state.horizon = spec.horizon;

  const int cells = spec.width * spec.height;
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `tasks` cells become task cells.
  for (int i = 0; i < spec.tasks; ++i) {
    const int j = i + UniformInt(rng, cells - i);
    std::swap(order[i], order[j]);
  }
  const TaskKind kind = KindFor(spec.domain);
  for (int i = 0; i < spec.tasks; ++i) {
    TaskRecord task;
    task.pos = {order[i] % spec.width, order[i] / spec.width};
    task.kind = kind;
    state.tasks.push_back(task);
  }

  auto add_agents = [&](int count, AgentType type) {
    for (int i = 0; i < count; ++i) {
      const int cell = UniformInt(rng, cells);
      AgentRecord agent;
      agent.id = static_cast<int>(state.agents.size());
      agent.type = type;
      agent.pos = {cell % spec.width, cell / spec.width};
      state.agents.push_back(agent);
    }
  };
  add_agents(spec.generic_agents, AgentType::kGeneric);
  add_agents(spec.ambulances, AgentType::kAmbulance);
  add_agents(spec.firetrucks, AgentType::kFiretruck);
  return state;
}

double CompletionProbability(const DomainSpec& spec, TaskLevel level,
                             const ActingCounts& acting) {
  switch (spec.domain) {
    case Domain::kBoxPushing: {
      const int needed = spec.variant == Variant::kV1 ? 1 : 2;
      return acting.total() >= needed ? 1.0 : 0.0;
    }
    case Domain::kFireFighting: {
      const int n = acting.total();
      if (level == TaskLevel::kLow) {
        if (n > 2) return 1.0;
        if (n == 2) return 0.9;
        return 0.0;
      }
      if (n > 3) return 1.0;
      if (n == 3) return 0.9;
      if (n == 2) return 0.75;
      return 0.0;
    }
    case Domain::kSearchRescue: {
      const int needed = level == TaskLevel::kLow ? 1 : 2;
      return acting.ambulances >= needed && acting.firetrucks >= needed ? 1.0
                                                                         : 0.0;
    }
  }
  return 0.0;
}

StepResult Step(const DomainSpec& spec, const EnvState& state,
                const JointAction& actions, Rng& rng) {
  if (state.terminal()) {
    throw std::logic_error("step: episode already terminated at step " +
                           std::to_string(state.step));
  }
  if (actions.size() != state.agents.size()) {
    throw std::invalid_argument("step: got " + std::to_string(actions.size()) +
                                " actions for " +
                                std::to_string(state.agents.size()) + " agents");
  }
  for (int a : actions) {
    if (a < 0 || a >= kNumActions) {
      throw std::invalid_argument("step: action " + std::to_string(a) +
                                  " out of range");
    }
  }

  StepResult result;
  result.state = state;
  result.rewards.assign(state.agents.size(), 0.0);
  EnvState& next = result.state;

  for (std::size_t i = 0; i < next.agents.size(); ++i) {
    next.agents[i].pos =
        Move(next.agents[i].pos, actions[i], next.width, next.height);
  }

  std::vector<int> acting;
  for (TaskRecord& task : next.tasks) {
    if (task.done) continue;
    acting.clear();
    ActingCounts counts;
    for (std::size_t i = 0; i < next.agents.size(); ++i) {
      if (actions[i] != kAct || next.agents[i].pos != task.pos) continue;
      acting.push_back(static_cast<int>(i));
      switch (next.agents[i].type) {
        case AgentType::kGeneric:
          ++counts.generic;
          break;
        case AgentType::kFiretruck:
          ++counts.firetrucks;
          break;
        case AgentType::kAmbulance:
          ++counts.ambulances;
          break;
      }
    }
    if (acting.empty()) continue;
    const double p = CompletionProbability(spec, task.level, counts);
    bool completed = p >= 1.0;
    if (p > 0.0 && p < 1.0) completed = Uniform01(rng) < p;
    if (!completed) continue;
    task.done = true;
    const double share = spec.task_reward / static_cast<double>(acting.size());
    for (int i : acting) result.rewards[i] += share;
  }

  if (Escalates(spec)) {
    for (TaskRecord& task : next.tasks) {
      if (task.done || task.level == TaskLevel::kHigh) continue;
      if (Uniform01(rng) < spec.escalation_probability) {
        task.level = TaskLevel::kHigh;
      }
    }
  }

  ++next.step;
  result.done = next.terminal();
  return result;
}

int ObservationSize(int width, int height, int num_agents) {
  return width * height * kPlanes + 2 + num_agents;
}

Vector EncodeObservation(const EnvState& state, int agent_id) {
  const int n = static_cast<int>(state.agents.size());
  if (agent_id < 0 || agent_id >= n) {
    throw std::invalid_argument("observation: agent id " +
                                std::to_string(agent_id) + " out of range");
  }
  const int cells = state.width * state.height;
  Vector obs = Vector::Zero(ObservationSize(state.width, state.height, n));
  auto cell = [&](Position p) { return p.y * state.width + p.x; };
  for (const AgentRecord& agent : state.agents) {
    obs(cell(agent.pos) * kPlanes + static_cast<int>(agent.type)) += 1.0;
  }
  for (const TaskRecord& task : state.tasks) {
    const int plane = task.done ? kPlanes - 1
                                : 3 + 2 * static_cast<int>(task.kind) +
                                      static_cast<int>(task.level);
    obs(cell(task.pos) * kPlanes + plane) += 1.0;
  }
  const Position own = state.agents[agent_id].pos;
  const int base = cells * kPlanes;
  obs(base) = state.width > 1 ? own.x / static_cast<double>(state.width - 1) : 0.0;
  obs(base + 1) =
      state.height > 1 ? own.y / static_cast<double>(state.height - 1) : 0.0;
  obs(base + 2 + agent_id) = 1.0;
  return obs;
}

double SocialWelfare(std::span<const double> per_agent_returns) {
  return std::accumulate(per_agent_returns.begin(), per_agent_returns.end(), 0.0);
}

std::string TrajectoryLine(int step, const JointAction& actions,
                           std::span<const double> rewards,
                           int tasks_remaining) {
  std::ostringstream out;
  out << step << " ";
  for (std::size_t i = 0; i < actions.size(); ++i) {
    out << (i > 0 ? "," : "") << actions[i];
  }
  out << " ";
  char buf[32];
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g", rewards[i]);
    out << (i > 0 ? "," : "") << buf;
  }
  out << " " << tasks_remaining;
  return out.str();
}

GridWorldEnv::GridWorldEnv(DomainSpec spec, std::uint64_t layout_seed,
                           LayoutMode mode)
    : spec_(std::move(spec)), layout_seed_(layout_seed), mode_(mode) {
  spec_.Validate();
  state_ = envs::Reset(spec_, layout_seed_);
}

int GridWorldEnv::observation_size() const {
  return ObservationSize(spec_.width, spec_.height, spec_.num_agents());
}

void GridWorldEnv::Reset(Rng& rng) {
  if (mode_ == LayoutMode::kRandom) {
    state_ = envs::Reset(spec_, rng());
  } else {
    state_ = envs::Reset(spec_, layout_seed_);
  }
}

Vector GridWorldEnv::Observe(int agent) const {
  return EncodeObservation(state_, agent);
}

std::vector<double> GridWorldEnv::Step(const JointAction& actions, Rng& rng) {
  StepResult result = envs::Step(spec_, state_, actions, rng);
  state_ = std::move(result.state);
  return std::move(result.rewards);
}

std::string DomainName(Domain domain) {
  switch (domain) {
    case Domain::kBoxPushing:
      return "box";
    case Domain::kFireFighting:
      return "fire";
    case Domain::kSearchRescue:
      return "sar";
  }
  return "?";
}

std::string VariantName(Variant variant) {
  return variant == Variant::kV1 ? "v1" : "v2";
}

}  // namespace nfsip::envs
