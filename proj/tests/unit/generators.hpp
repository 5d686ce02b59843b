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

// Randomized message generators shared by the property-style tests.

#include <random>

#include "pipebft/messages/messages.hpp"

namespace pipebft::testing {

using namespace pipebft::messages;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t u64() { return rng_(); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(rng_()); }
  std::uint32_t below(std::uint32_t n) { return static_cast<std::uint32_t>(rng_() % n); }

  Bytes bytes(std::size_t max_len) {
    Bytes b(below(static_cast<std::uint32_t>(max_len + 1)));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng_());
    return b;
  }

  Digest digest() {
    Digest d;
    for (auto& x : d) x = static_cast<std::uint8_t>(rng_());
    return d;
  }

  Signature signature() {
    return Signature{static_cast<crypto::Scheme>(below(4)), bytes(80)};
  }

  ClientRequest request() {
    ClientRequest r;
    r.client_id = u32();
    r.request_seq = u64();
    const std::uint32_t ops = 1 + below(5);
    for (std::uint32_t i = 0; i < ops; ++i) {
      r.operations.push_back({OpKind::kWrite, u64() % 600000, static_cast<std::int64_t>(u64())});
    }
    r.payload = bytes(32);
    r.client_signature = signature();
    return r;
  }

  RequestBatch batch(std::size_t max_requests = 6) {
    RequestBatch b;
    b.first_seq = u64() >> 8;
    const std::uint32_t n = 1 + below(static_cast<std::uint32_t>(max_requests));
    for (std::uint32_t i = 0; i < n; ++i) b.requests.push_back(request());
    b.last_seq = b.first_seq + n - 1;
    return b;
  }

  SpecResponse spec_response() {
    return SpecResponse{u64(), u64(), digest(), digest(), u32(), u32(), u64(), signature()};
  }

  Message message() {
    switch (below(10)) {
      case 0: return Hello{u32()};
      case 1: {
        ClientSubmit s;
        const std::uint32_t n = below(4);
        for (std::uint32_t i = 0; i < n; ++i) s.requests.push_back(request());
        return s;
      }
      case 2: {
        PrePrepare pp{u64(), u64(), digest(), batch(), signature()};
        return pp;
      }
      case 3: return Prepare{u64(), u64(), digest(), u32(), signature()};
      case 4: return Commit{u64(), u64(), digest(), u32(), signature()};
      case 5: return CheckpointMsg{u64(), u64(), digest(), u32(), signature()};
      case 6: return spec_response();
      case 7: {
        ClientResponse r{u32(), u64(), {}, u32(), signature()};
        const std::uint32_t n = below(5);
        for (std::uint32_t i = 0; i < n; ++i) r.result.push_back(static_cast<std::int64_t>(u64()));
        return r;
      }
      case 8: {
        CommitCertificate c{u32(), u64(), u64(), digest(), {}};
        const std::uint32_t n = below(4);
        for (std::uint32_t i = 0; i < n; ++i) c.responses.push_back(spec_response());
        return c;
      }
      default: return CertAck{u32(), u64(), u64(), u32(), signature()};
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace pipebft::testing
