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

#include <memory>

#include "pipebft/messages/messages.hpp"

namespace pipebft::pipeline {

// Tells the executor that the batch covering [first_seq, last_seq] may run.
// The batch body is shared with the worker's consensus metadata.
struct ExecuteDirective {
  SeqNum first_seq = 0;
  SeqNum last_seq = 0;
  Digest digest{};
  ViewNum view = 0;
  std::shared_ptr<const messages::RequestBatch> batch;

  std::uint32_t txn_count() const { return static_cast<std::uint32_t>(last_seq - first_seq + 1); }
};

}  // namespace pipebft::pipeline
