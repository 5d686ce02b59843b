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

#include <cstring>
#include <stdexcept>

#include "pipebft/common/types.hpp"

namespace pipebft {

// Raised by ByteReader when the input ends early or a length field is
// inconsistent with the remaining bytes.
class TruncatedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Big-endian fixed-width writer used by every canonical encoding.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes&& reuse) : buf_(std::move(reuse)) { buf_.clear(); }

  void reserve(std::size_t n) { buf_.reserve(buf_.size() + n); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v); }
  void u32(std::uint32_t v) { put_be(v); }
  void u64(std::uint64_t v) { put_be(v); }
  void i64(std::int64_t v) { put_be(static_cast<std::uint64_t>(v)); }

  void raw(ByteView bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void digest(const Digest& d) { raw(as_view(d)); }
  void blob(ByteView bytes) {
    u32(static_cast<std::uint32_t>(bytes.size()));
    raw(bytes);
  }

  std::size_t size() const { return buf_.size(); }
  Bytes& buffer() { return buf_; }
  Bytes take() { return std::move(buf_); }

  // Overwrites a previously written u32 at `offset`.
  void patch_u32(std::size_t offset, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_[offset + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
  }

 private:
  template <typename T>
  void put_be(T v) {
    for (int shift = (sizeof(T) - 1) * 8; shift >= 0; shift -= 8) {
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : data_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be<std::uint8_t>()); }
  std::uint16_t u16() { return get_be<std::uint16_t>(); }
  std::uint32_t u32() { return get_be<std::uint32_t>(); }
  std::uint64_t u64() { return get_be<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_be<std::uint64_t>()); }

  // Next `n` bytes without copying.
  ByteView view(std::size_t n) {
    need(n);
    ByteView v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
  }

  Digest digest() {
    need(32);
    Digest d;
    std::memcpy(d.data(), data_.data() + pos_, 32);
    pos_ += 32;
    return d;
  }

  Bytes blob() {
    const std::uint32_t len = u32();
    need(len);
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + len);
    pos_ += len;
    return out;
  }

  // Reads a u32 element count and checks that `count * min_element_size`
  // bytes can still follow, so corrupt counts never trigger huge allocations.
  std::uint32_t count(std::size_t min_element_size) {
    const std::uint32_t n = u32();
    if (min_element_size > 0 && static_cast<std::uint64_t>(n) * min_element_size > remaining()) {
      throw TruncatedInput("element count exceeds remaining input");
    }
    return n;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw TruncatedInput("input truncated");
  }

  template <typename T>
  T get_be() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | data_[pos_ + i]);
    pos_ += sizeof(T);
    return v;
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace pipebft
