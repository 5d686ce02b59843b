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

#include <atomic>
#include <stdexcept>

#include "pipebft/common/types.hpp"

namespace pipebft::pipeline {

// Hands out globally unique, gapless, monotonically increasing transaction
// sequence numbers at the primary. Safe for concurrent callers.
class SequenceAssigner {
 public:
  SeqNum assign() { return assign_range(1); }

  // Reserves `count` consecutive numbers and returns the first.
  SeqNum assign_range(std::uint64_t count) {
    started_.store(true, std::memory_order_relaxed);
    return next_.fetch_add(count, std::memory_order_relaxed);
  }

  // Only legal before the first assignment; the counter never restarts.
  void start_at(SeqNum first) {
    if (started_.load()) throw std::logic_error("sequence counter cannot restart mid-run");
    next_.store(first);
  }

  SeqNum peek() const { return next_.load(std::memory_order_relaxed); }

 private:
  std::atomic<SeqNum> next_{0};
  std::atomic<bool> started_{false};
};

}  // namespace pipebft::pipeline
