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

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "pipebft/messages/messages.hpp"

namespace pipebft::pipeline {

// Collects checkpoint votes. Owned by the checkpoint thread.
class CheckpointTracker {
 public:
  // `interval` is the checkpoint period in blocks (delta).
  CheckpointTracker(std::size_t n, std::size_t f, std::uint64_t interval);

  // True when a replica that just reached chain height `height` must
  // broadcast a checkpoint.
  bool due(std::uint64_t height) const { return height > 0 && height % interval_ == 0; }

  // Records one vote. Returns the checkpoint the first time 2f+1 distinct
  // replicas agree on an identical state at a height above the current
  // stable one. Votes from a sender already counted at that height and
  // votes at or below the stable height are ignored.
  std::optional<messages::CheckpointMsg> on_checkpoint(const messages::CheckpointMsg& msg);

  std::optional<messages::CheckpointMsg> stable() const { return stable_; }
  std::uint64_t interval() const { return interval_; }
  std::size_t quorum() const { return quorum_; }
  std::size_t pending_heights() const { return votes_.size(); }

 private:
  struct Key {
    SeqNum txn_seq;
    Digest chain_digest;
    auto operator<=>(const Key&) const = default;
  };
  struct Height {
    std::set<NodeId> senders;
    std::map<Key, std::set<NodeId>> by_state;
  };

  std::size_t quorum_;
  std::uint64_t interval_;
  std::map<SeqNum, Height> votes_;
  std::optional<messages::CheckpointMsg> stable_;
};

}  // namespace pipebft::pipeline
