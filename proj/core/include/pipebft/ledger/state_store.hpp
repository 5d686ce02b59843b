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

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "pipebft/messages/messages.hpp"

namespace pipebft::ledger {

inline constexpr std::uint64_t kDefaultActiveSet = 600'000;

enum class Backend { kInMemory, kFileBacked };

std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view name);

class KeyOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Every replica starts from the same table: record k holds k.
inline std::int64_t initial_value(std::uint64_t key) { return static_cast<std::int64_t>(key); }

// Executed key-value state over a fixed active set of 8-byte records. Owned
// by the executor; not thread-safe.
class StateStore {
 public:
  virtual ~StateStore() = default;

  // Applies the writes in order and returns, per operation, the value it
  // replaced. Throws KeyOutOfRange (without applying anything) if any key is
  // outside the active set.
  virtual std::vector<std::int64_t> apply_operations(std::span<const messages::Operation> ops) = 0;

  virtual std::int64_t read(std::uint64_t key) const = 0;

  // Records whose value differs from initial_value(), sorted by key.
  virtual std::vector<std::pair<std::uint64_t, std::int64_t>> modified_records() const = 0;

  virtual Backend backend() const = 0;
  std::uint64_t active_set() const { return active_set_; }

 protected:
  explicit StateStore(std::uint64_t active_set) : active_set_(active_set) {}
  void check_keys(std::span<const messages::Operation> ops) const;

 private:
  std::uint64_t active_set_;
};

// `file` is required for kFileBacked and is created (or truncated) on open.
std::unique_ptr<StateStore> make_state_store(Backend backend, std::uint64_t active_set,
                                             const std::filesystem::path& file = {});

}  // namespace pipebft::ledger
