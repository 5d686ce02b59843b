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

#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pipebft/pipeline/execute_directive.hpp"

namespace pipebft::pipeline {

class DuplicateDirective : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// QC = 2 * Num_Clients * Num_Req, clamped to [1, max_qc].
std::size_t queue_count(std::size_t num_clients, std::size_t num_req, std::size_t max_qc);

// Logical queues feeding the single executor. A directive whose batch starts
// at s goes to queue s mod QC; after executing through k the executor looks
// only at queue (k + 1) mod QC, so execution is gapless and in sequence order
// however out of order consensus completes.
class ExecutionQueueArray {
 public:
  explicit ExecutionQueueArray(std::size_t qc, SeqNum first_seq = 0);

  // Throws DuplicateDirective for a batch already queued or executed.
  void push(ExecuteDirective directive);

  // Non-blocking: the directive for next_seq(), if it has arrived.
  std::optional<ExecuteDirective> try_pop_next();

  // Blocks up to `timeout` for the directive for next_seq().
  std::optional<ExecuteDirective> pop_next(std::chrono::microseconds timeout);

  // Wakes blocked consumers; subsequent pops return what is already queued.
  void close();

  // True when the directive for next_seq() has arrived.
  bool ready() const;
  SeqNum next_seq() const;
  std::size_t qc() const { return buckets_.size(); }
  std::size_t pending() const;
  // Directives that arrived at least QC past next_seq(); legal but a sign
  // that the in-flight window exceeds the provisioned queue count.
  std::uint64_t window_overflows() const;

  static std::size_t queue_index(SeqNum seq, std::size_t qc) { return seq % qc; }

 private:
  std::optional<ExecuteDirective> take_locked();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::vector<ExecuteDirective>> buckets_;
  SeqNum next_seq_;
  std::size_t pending_ = 0;
  std::uint64_t overflows_ = 0;
  bool closed_ = false;
};

}  // namespace pipebft::pipeline
