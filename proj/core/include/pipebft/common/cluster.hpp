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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pipebft/common/types.hpp"

namespace pipebft {

enum class Protocol { kPbft, kZyzzyva };

inline std::string_view protocol_name(Protocol p) { return p == Protocol::kPbft ? "pbft" : "zyzzyva"; }

inline Protocol parse_protocol(std::string_view name) {
  if (name == "pbft") return Protocol::kPbft;
  if (name == "zyzzyva") return Protocol::kZyzzyva;
  throw std::invalid_argument("unknown protocol: " + std::string(name));
}

// Static membership: replicas are 0..n-1 and the primary of view v is v mod n.
struct ClusterConfig {
  std::size_t n = 4;
  std::size_t f = 1;
  NodeId self = 0;

  void validate() const {
    if (n < 3 * f + 1) {
      throw std::invalid_argument("n=" + std::to_string(n) + " cannot tolerate f=" +
                                  std::to_string(f) + " (need n >= 3f+1)");
    }
  }

  NodeId primary(ViewNum view) const { return static_cast<NodeId>(view % n); }
  bool is_replica(NodeId id) const { return id < n; }
  std::size_t prepare_quorum() const { return 2 * f; }
  std::size_t commit_quorum() const { return 2 * f + 1; }
  std::size_t reply_quorum() const { return f + 1; }

  std::vector<NodeId> replicas() const {
    std::vector<NodeId> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<NodeId>(i);
    return out;
  }
};

}  // namespace pipebft
