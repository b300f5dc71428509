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

#include "nfsip/buffers.h"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace nfsip::buffers {

std::vector<double> DiscountedReturns(std::span<const double> rewards,
                                      double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("discounted returns: gamma must be in (0, 1]");
  }
  std::vector<double> returns(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    returns[i] = running;
  }
  return returns;
}

SelfImitationBuffer::SelfImitationBuffer(std::size_t capacity,
                                         double priority_floor)
    : capacity_(capacity), priority_floor_(priority_floor) {
  if (capacity == 0) {
    throw std::invalid_argument("self-imitation buffer: capacity must be > 0");
  }
  if (!(priority_floor > 0.0)) {
    throw std::invalid_argument(
        "self-imitation buffer: priority floor must be > 0");
  }
}

EpisodeOutcome SelfImitationBuffer::ConsiderEpisode(
    std::span<const EpisodeStep> steps, double welfare) {
  bool reset = false;
  if (welfare > best_welfare_) {
    entries_.clear();
    best_welfare_ = welfare;
    ++resets_;
    reset = true;
  }
  if (!(welfare >= best_welfare_)) return EpisodeOutcome::kRejected;

  for (const EpisodeStep& step : steps) {
    ReturnTransition entry;
    entry.state = step.state;
    entry.action = step.action;
    entry.cumulative_return = step.cumulative_return;
    entry.next_state = step.next_state;
    entry.episode_welfare = welfare;
    entry.priority = std::max(step.cumulative_return, priority_floor_);
    entry.agent_id = step.agent_id;
    entries_.push_back(std::move(entry));
  }
  if (entries_.size() > capacity_) {
    const auto overflow = static_cast<std::ptrdiff_t>(entries_.size() - capacity_);
    entries_.erase(entries_.begin(), entries_.begin() + overflow);
  }
  RebuildCumulative();
  return reset ? EpisodeOutcome::kResetAndStored : EpisodeOutcome::kStored;
}

void SelfImitationBuffer::RebuildCumulative() {
  cumulative_.resize(entries_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    total += entries_[i].priority;
    cumulative_[i] = total;
  }
}

std::optional<std::vector<ReturnTransition>> SelfImitationBuffer::Sample(
    int n, Rng& rng) const {
  if (entries_.empty()) return std::nullopt;
  std::vector<ReturnTransition> batch;
  batch.reserve(n);
  const double total = cumulative_.back();
  for (int i = 0; i < n; ++i) {
    const double u = Uniform01(rng) * total;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cumulative_.begin());
    if (idx >= entries_.size()) idx = entries_.size() - 1;
    batch.push_back(entries_[idx]);
  }
  return batch;
}

void SelfImitationBuffer::WriteTsv(std::ostream& out) const {
  out << "agent\taction\treturn\twelfare\tpriority\tstate\n";
  char buf[32];
  for (const ReturnTransition& e : entries_) {
    out << e.agent_id << "\t" << e.action;
    for (double v : {e.cumulative_return, e.episode_welfare, e.priority}) {
      std::snprintf(buf, sizeof(buf), "%.6g", v);
      out << "\t" << buf;
    }
    out << "\t";
    for (Eigen::Index i = 0; i < e.state.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6g", e.state(i));
      out << (i > 0 ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace nfsip::buffers
