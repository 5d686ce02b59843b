// Copyright 2026 The pipebft Authors
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

#include "pipebft/pipeline/execution_queue_array.hpp"

#include <algorithm>
#include <string>

namespace pipebft::pipeline {

std::size_t queue_count(std::size_t num_clients, std::size_t num_req, std::size_t max_qc) {
  const std::size_t qc = 2 * num_clients * num_req;
  return std::clamp<std::size_t>(qc, 1, std::max<std::size_t>(max_qc, 1));
}

ExecutionQueueArray::ExecutionQueueArray(std::size_t qc, SeqNum first_seq)
    : buckets_(std::max<std::size_t>(qc, 1)), next_seq_(first_seq) {}

void ExecutionQueueArray::push(ExecuteDirective directive) {
  {
    std::lock_guard lock(mu_);
    if (directive.first_seq < next_seq_) {
      throw DuplicateDirective("batch at " + std::to_string(directive.first_seq) +
                               " already executed");
    }
    auto& bucket = buckets_[queue_index(directive.first_seq, buckets_.size())];
    for (const auto& d : bucket) {
      if (d.first_seq == directive.first_seq) {
        throw DuplicateDirective("batch at " + std::to_string(directive.first_seq) +
                                 " already queued");
      }
    }
    if (directive.first_seq >= next_seq_ + buckets_.size()) ++overflows_;
    bucket.push_back(std::move(directive));
    ++pending_;
  }
  cv_.notify_one();
}

std::optional<ExecuteDirective> ExecutionQueueArray::take_locked() {
  auto& bucket = buckets_[queue_index(next_seq_, buckets_.size())];
  for (auto it = bucket.begin(); it != bucket.end(); ++it) {
    if (it->first_seq == next_seq_) {
      ExecuteDirective d = std::move(*it);
      bucket.erase(it);
      --pending_;
      next_seq_ = d.last_seq + 1;
      return d;
    }
  }
  return std::nullopt;
}

std::optional<ExecuteDirective> ExecutionQueueArray::try_pop_next() {
  std::lock_guard lock(mu_);
  return take_locked();
}

std::optional<ExecuteDirective> ExecutionQueueArray::pop_next(std::chrono::microseconds timeout) {
  std::unique_lock lock(mu_);
  std::optional<ExecuteDirective> d;
  cv_.wait_for(lock, timeout, [&] {
    d = take_locked();
    return d.has_value() || closed_;
  });
  return d;
}

void ExecutionQueueArray::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

SeqNum ExecutionQueueArray::next_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_;
}

bool ExecutionQueueArray::ready() const {
  std::lock_guard lock(mu_);
  const auto& bucket = buckets_[queue_index(next_seq_, buckets_.size())];
  return std::any_of(bucket.begin(), bucket.end(),
                     [this](const ExecuteDirective& d) { return d.first_seq == next_seq_; });
}

std::size_t ExecutionQueueArray::pending() const {
  std::lock_guard lock(mu_);
  return pending_;
}

std::uint64_t ExecutionQueueArray::window_overflows() const {
  std::lock_guard lock(mu_);
  return overflows_;
}

}  // namespace pipebft::pipeline
