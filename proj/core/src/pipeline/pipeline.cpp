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

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

#include "pipebft/pipeline/dispatch.hpp"
#include "pipebft/pipeline/topology.hpp"
#include "pipebft/pipeline/utilization.hpp"

namespace pipebft::pipeline {

void ThreadTopology::validate() const {
  if (worker_threads != 1) throw std::invalid_argument("exactly one worker thread is supported");
  if (execute_threads < 0 || execute_threads > 1) {
    throw std::invalid_argument("ordered execution needs at most one execute thread");
  }
  if (checkpoint_threads != 1) throw std::invalid_argument("exactly one checkpoint thread");
  if (batch_threads < 0) throw std::invalid_argument("negative batch thread count");
  if (input_threads < 2) throw std::invalid_argument("need a client and a replica input thread");
  if (output_threads < 1) throw std::invalid_argument("need an output thread");
}

std::string ThreadTopology::label() const {
  return std::to_string(execute_threads) + "E " + std::to_string(batch_threads) + "B";
}

ThreadTopology parse_topology(std::string_view label) {
  ThreadTopology t;
  bool saw_e = false, saw_b = false;
  std::size_t i = 0;
  while (i < label.size()) {
    if (std::isspace(static_cast<unsigned char>(label[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < label.size() && std::isdigit(static_cast<unsigned char>(label[j]))) ++j;
    if (j == i || j >= label.size()) throw std::invalid_argument("bad topology: " + std::string(label));
    const int count = std::stoi(std::string(label.substr(i, j - i)));
    const char kind = static_cast<char>(std::toupper(static_cast<unsigned char>(label[j])));
    if (kind == 'E') {
      t.execute_threads = count;
      saw_e = true;
    } else if (kind == 'B') {
      t.batch_threads = count;
      saw_b = true;
    } else {
      throw std::invalid_argument("bad topology: " + std::string(label));
    }
    i = j + 1;
  }
  if (!saw_e || !saw_b) throw std::invalid_argument("topology needs E and B counts: " + std::string(label));
  t.validate();
  return t;
}

Route route_for(messages::Tag tag, bool is_primary) {
  using messages::Tag;
  switch (tag) {
    case Tag::kClientSubmit:
      return is_primary ? Route::kBatchQueue : Route::kForwardToPrimary;
    case Tag::kPrePrepare:
    case Tag::kPrepare:
    case Tag::kCommit:
    case Tag::kCommitCertificate:
      return Route::kWorkQueue;
    case Tag::kCheckpoint:
      return Route::kCheckpointQueue;
    case Tag::kHello:
    case Tag::kSpecResponse:
    case Tag::kClientResponse:
    case Tag::kCertAck:
      break;
  }
  throw UnknownRoute("no replica route for " + std::string(messages::tag_name(tag)));
}

ThreadStats& UtilizationTracker::register_thread(const std::string& role) {
  std::lock_guard lock(mu_);
  return threads_.emplace_back(role);
}

UtilizationSample UtilizationTracker::sample() const {
  std::lock_guard lock(mu_);
  UtilizationSample s{SteadyClock::now(), {}};
  s.busy_ns.reserve(threads_.size());
  for (const auto& t : threads_) s.busy_ns.push_back(t.busy_ns());
  return s;
}

std::vector<double> UtilizationTracker::per_thread(const UtilizationSample& from,
                                                   const UtilizationSample& to) const {
  const double wall = std::chrono::duration<double, std::nano>(to.at - from.at).count();
  std::vector<double> out;
  for (std::size_t i = 0; i < to.busy_ns.size(); ++i) {
    const std::uint64_t before = i < from.busy_ns.size() ? from.busy_ns[i] : 0;
    const double busy = static_cast<double>(to.busy_ns[i] - std::min(before, to.busy_ns[i]));
    out.push_back(wall > 0 ? std::clamp(busy / wall, 0.0, 1.0) : 0.0);
  }
  return out;
}

std::vector<RoleUtilization> UtilizationTracker::per_role(const UtilizationSample& from,
                                                          const UtilizationSample& to) const {
  const std::vector<double> fractions = per_thread(from, to);
  std::vector<RoleUtilization> out;
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < fractions.size() && i < threads_.size(); ++i) {
    const std::string& role = threads_[i].role();
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& r) { return r.role == role; });
    if (it == out.end()) {
      out.push_back({role, 0, 0.0, 0.0});
      it = std::prev(out.end());
    }
    it->mean += fractions[i];
    it->max = std::max(it->max, fractions[i]);
    ++it->threads;
  }
  for (auto& r : out) r.mean /= r.threads;
  return out;
}

std::vector<std::string> UtilizationTracker::thread_roles() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& t : threads_) out.push_back(t.role());
  return out;
}

std::vector<std::string> UtilizationTracker::roles() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& t : threads_) {
    if (std::find(out.begin(), out.end(), t.role()) == out.end()) out.push_back(t.role());
  }
  return out;
}

}  // namespace pipebft::pipeline
