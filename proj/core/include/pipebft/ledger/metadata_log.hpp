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

#include <functional>
#include <map>
#include <optional>

#include "pipebft/common/types.hpp"

namespace pipebft::ledger {

// Per-sequence consensus metadata (instances, retained batches) awaiting
// garbage collection. When a checkpoint becomes stable, everything below the
// *previous* stable checkpoint is released. Blocks are never pruned.
template <typename Entry>
class MetadataLog {
 public:
  using OnRelease = std::function<void(SeqNum, Entry&)>;

  explicit MetadataLog(OnRelease on_release = {}) : on_release_(std::move(on_release)) {}

  Entry& operator[](SeqNum seq) { return entries_[seq]; }
  Entry* find(SeqNum seq) {
    auto it = entries_.find(seq);
    return it == entries_.end() ? nullptr : &it->second;
  }
  const Entry* find(SeqNum seq) const {
    auto it = entries_.find(seq);
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool contains(SeqNum seq) const { return entries_.contains(seq); }
  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  // Records `checkpoint_seq` as stable. Returns how many entries were released.
  // Repeated or older checkpoints are no-ops.
  std::size_t prune_below(SeqNum checkpoint_seq) {
    if (last_stable_ && checkpoint_seq <= *last_stable_) return 0;
    std::size_t released = 0;
    if (last_stable_) {
      const auto stop = entries_.lower_bound(*last_stable_);
      for (auto it = entries_.begin(); it != stop;) {
        if (on_release_) on_release_(it->first, it->second);
        it = entries_.erase(it);
        ++released;
      }
    }
    last_stable_ = checkpoint_seq;
    return released;
  }

  std::optional<SeqNum> last_stable() const { return last_stable_; }

 private:
  std::map<SeqNum, Entry> entries_;
  std::optional<SeqNum> last_stable_;
  OnRelease on_release_;
};

}  // namespace pipebft::ledger
