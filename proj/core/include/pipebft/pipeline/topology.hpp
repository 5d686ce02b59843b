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

#include <string>
#include <string_view>

namespace pipebft::pipeline {

// Thread counts per replica. execute_threads = 0 folds execution into the
// worker and batch_threads = 0 folds batching into the worker; the
// defaults are the full pipeline (1E 2B).
struct ThreadTopology {
  int input_threads = 3;  // one client-facing, the rest replica-facing
  int output_threads = 2;
  int batch_threads = 2;  // primary only
  int worker_threads = 1;
  int execute_threads = 1;
  int checkpoint_threads = 1;

  // Throws std::invalid_argument on counts the pipeline cannot honor.
  void validate() const;

  // "1E 2B" style label.
  std::string label() const;
  bool operator==(const ThreadTopology&) const = default;
};

// Parses "0E 0B", "1E2B", "1e 1b"; other fields keep their defaults.
ThreadTopology parse_topology(std::string_view label);

}  // namespace pipebft::pipeline
