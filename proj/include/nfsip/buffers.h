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

// Experience stores used by the trainer:
//   CircularBuffer<Transition>        RL replay, oldest entries evicted first
//   ReservoirBuffer<BestResponsePair> supervised buffer, reservoir sampling
//   SelfImitationBuffer               return-annotated steps from the best
//                                     episodes seen so far, sampled in
//                                     proportion to their priority

#ifndef NFSIP_BUFFERS_H_
#define NFSIP_BUFFERS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nfsip/neural.h"
#include "nfsip/random.h"

namespace nfsip::buffers {

using neural::Vector;

struct Transition {
  Vector state;
  int action = 0;
  double reward = 0.0;
  Vector next_state;
  bool terminal = false;
};

struct BestResponsePair {
  Vector state;
  int action = 0;
};

struct ReturnTransition {
  Vector state;
  int action = 0;
  double cumulative_return = 0.0;
  Vector next_state;
  double episode_welfare = 0.0;
  double priority = 0.0;
  int agent_id = 0;
};

// Fixed-capacity FIFO store; when full the oldest entry is overwritten.
template <typename T>
class CircularBuffer {
 public:
  explicit CircularBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("circular buffer: capacity must be > 0");
    }
  }

  void Add(T item) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
    } else {
      data_[next_] = std::move(item);
    }
    next_ = (next_ + 1) % capacity_;
    ++total_added_;
  }

  // `n` uniform draws with replacement, or nullopt when empty.
  std::optional<std::vector<T>> Sample(int n, Rng& rng) const {
    if (data_.empty()) return std::nullopt;
    std::vector<T> batch;
    batch.reserve(n);
    const int size = static_cast<int>(data_.size());
    for (int i = 0; i < n; ++i) batch.push_back(data_[UniformInt(rng, size)]);
    return batch;
  }

  // Logical index: 0 is the oldest resident entry.
  const T& operator[](std::size_t i) const {
    if (data_.size() < capacity_) return data_[i];
    return data_[(next_ + i) % capacity_];
  }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t total_added() const { return total_added_; }

 private:
  std::size_t capacity_;
  std::vector<T> data_;
  std::size_t next_ = 0;
  std::int64_t total_added_ = 0;
};

// Keeps a uniform random subset of everything ever added (Algorithm R).
template <typename T>
class ReservoirBuffer {
 public:
  explicit ReservoirBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("reservoir buffer: capacity must be > 0");
    }
  }

  void Add(T item, Rng& rng) {
    ++seen_;
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
      return;
    }
    const std::int64_t slot = UniformInt64(rng, seen_);
    if (slot < static_cast<std::int64_t>(capacity_)) {
      data_[static_cast<std::size_t>(slot)] = std::move(item);
    }
  }

  std::optional<std::vector<T>> Sample(int n, Rng& rng) const {
    if (data_.empty()) return std::nullopt;
    std::vector<T> batch;
    batch.reserve(n);
    const int size = static_cast<int>(data_.size());
    for (int i = 0; i < n; ++i) batch.push_back(data_[UniformInt(rng, size)]);
    return batch;
  }

  const T& operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::vector<T> data_;
  std::int64_t seen_ = 0;
};

// R_t = r_t + gamma * R_{t+1}, with zero return past the last step.
std::vector<double> DiscountedReturns(std::span<const double> rewards,
                                      double gamma);

// One agent-step of a finished episode, returns already computed.
struct EpisodeStep {
  Vector state;
  int action = 0;
  double cumulative_return = 0.0;
  Vector next_state;
  int agent_id = 0;
};

enum class EpisodeOutcome {
  kResetAndStored,  // strictly better welfare: buffer cleared, then stored
  kStored,          // welfare ties the threshold
  kRejected,        // welfare below the threshold
};

class SelfImitationBuffer {
 public:
  static constexpr double kDefaultPriorityFloor = 1e-3;

  explicit SelfImitationBuffer(std::size_t capacity,
                               double priority_floor = kDefaultPriorityFloor);

  // Applies the end-of-episode protocol:
  //   if welfare > threshold: clear, threshold := welfare
  //   if welfare >= threshold: store every step
  EpisodeOutcome ConsiderEpisode(std::span<const EpisodeStep> steps,
                                 double welfare);

  // Draws with probability proportional to priority; nullopt when empty.
  std::optional<std::vector<ReturnTransition>> Sample(int n, Rng& rng) const;

  // Threshold W_T; -infinity until the first episode is considered.
  double best_welfare() const { return best_welfare_; }
  const std::vector<ReturnTransition>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t resets() const { return resets_; }
  double priority_floor() const { return priority_floor_; }

  // Debug dump: header line, then one tab-separated record per entry.
  void WriteTsv(std::ostream& out) const;

 private:
  void Insert(ReturnTransition entry);
  void RebuildCumulative();

  std::size_t capacity_;
  double priority_floor_;
  double best_welfare_ = -std::numeric_limits<double>::infinity();
  // Oldest first; when full the oldest entry is dropped.
  std::vector<ReturnTransition> entries_;
  std::vector<double> cumulative_;
  std::int64_t resets_ = 0;
};

}  // namespace nfsip::buffers

#endif  // NFSIP_BUFFERS_H_
