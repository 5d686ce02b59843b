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

#include "pipebft/messages/messages.hpp"

namespace pipebft::pipeline {

enum class Route {
  kBatchQueue,        // client requests at the primary
  kWorkQueue,         // consensus messages for the worker
  kCheckpointQueue,   // checkpoint thread
  kExecutionQueue,    // execute directives
  kForwardToPrimary,  // client requests that reached a backup
};

class UnknownRoute : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Routing table for inbound traffic at a replica. Throws UnknownRoute for
// kinds a replica never consumes (responses, handshakes after setup).
Route route_for(messages::Tag tag, bool is_primary);

// Internal execute directives travel on their own path.
inline Route route_for_directive() { return Route::kExecutionQueue; }

}  // namespace pipebft::pipeline
