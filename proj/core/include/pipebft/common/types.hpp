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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pipebft {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// 32-byte SHA-256 output.
using Digest = std::array<std::uint8_t, 32>;

// Network identity. Replicas occupy [0, n); client endpoints follow.
using NodeId = std::uint32_t;
using SeqNum = std::uint64_t;
using ViewNum = std::uint64_t;

inline constexpr NodeId kBroadcast = 0xffffffffu;

std::string to_hex(ByteView bytes);
inline std::string to_hex(const Digest& d) { return to_hex(ByteView{d.data(), d.size()}); }
Bytes from_hex(std::string_view hex);

inline ByteView as_view(const Bytes& b) { return {b.data(), b.size()}; }
inline ByteView as_view(const Digest& d) { return {d.data(), d.size()}; }

}  // namespace pipebft
