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
#include <chrono>
#include <ctime>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace pipebft::pipeline {

using SteadyClock = std::chrono::steady_clock;

// Busy time accumulated by one thread. Written by its owner, read by anyone.
class ThreadStats {
 public:
  explicit ThreadStats(std::string role) : role_(std::move(role)) {}

  const std::string& role() const { return role_; }
  void add_busy(std::chrono::nanoseconds d) {
    busy_ns_.fetch_add(static_cast<std::uint64_t>(d.count()), std::memory_order_relaxed);
  }
  std::uint64_t busy_ns() const { return busy_ns_.load(std::memory_order_relaxed); }

 private:
  std::string role_;
  std::atomic<std::uint64_t> busy_ns_{0};
};

// CPU time consumed by the calling thread. Preemption does not count, so
// busy fractions stay meaningful when threads outnumber cores.
inline std::chrono::nanoseconds thread_cpu_now() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return std::chrono::seconds(ts.tv_sec) + std::chrono::nanoseconds(ts.tv_nsec);
}

// RAII span of useful work on the current thread.
class BusyScope {
 public:
  explicit BusyScope(ThreadStats& stats) : stats_(stats), start_(thread_cpu_now()) {}
  ~BusyScope() { stats_.add_busy(thread_cpu_now() - start_); }
  BusyScope(const BusyScope&) = delete;
  BusyScope& operator=(const BusyScope&) = delete;

 private:
  ThreadStats& stats_;
  std::chrono::nanoseconds start_;
};

struct UtilizationSample {
  SteadyClock::time_point at;
  std::vector<std::uint64_t> busy_ns;  // index-aligned with registered threads
};

struct RoleUtilization {
  std::string role;
  int threads = 0;
  double mean = 0.0;  // average busy fraction over the role's threads
  double max = 0.0;
};

// Registry of every pipeline thread's stats.
class UtilizationTracker {
 public:
  ThreadStats& register_thread(const std::string& role);

  UtilizationSample sample() const;

  // Busy fraction of each thread between two samples, clamped to [0, 1].
  std::vector<double> per_thread(const UtilizationSample& from, const UtilizationSample& to) const;
  std::vector<RoleUtilization> per_role(const UtilizationSample& from,
                                        const UtilizationSample& to) const;

  // Distinct roles in registration order.
  std::vector<std::string> roles() const;
  // Role of each registered thread, index-aligned with samples.
  std::vector<std::string> thread_roles() const;

 private:
  mutable std::mutex mu_;
  std::deque<ThreadStats> threads_;
};

}  // namespace pipebft::pipeline
