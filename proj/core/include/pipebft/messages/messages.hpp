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
#include <variant>
#include <vector>

#include "pipebft/common/types.hpp"
#include "pipebft/crypto/crypto.hpp"

namespace pipebft::messages {

using crypto::Signature;

enum class OpKind : std::uint8_t { kWrite = 1 };

struct Operation {
  OpKind kind = OpKind::kWrite;
  std::uint64_t key = 0;
  std::int64_t value = 0;

  bool operator==(const Operation&) const = default;
};

// One client transaction. `client_id` is the network identity of the client
// endpoint that signed it and receives the responses; `request_seq` is unique
// and increasing per endpoint.
struct ClientRequest {
  NodeId client_id = 0;
  std::uint64_t request_seq = 0;
  std::vector<Operation> operations;
  Bytes payload;
  Signature client_signature;

  bool operator==(const ClientRequest&) const = default;
};

// Requests covering the contiguous transaction sequence range
// [first_seq, last_seq].
struct RequestBatch {
  SeqNum first_seq = 0;
  SeqNum last_seq = 0;
  std::vector<ClientRequest> requests;

  std::size_t size() const { return requests.size(); }
  bool operator==(const RequestBatch&) const = default;
};

struct Hello {
  NodeId node = 0;
  bool operator==(const Hello&) const = default;
};

// A burst of requests sent in one frame by a client endpoint.
struct ClientSubmit {
  std::vector<ClientRequest> requests;
  bool operator==(const ClientSubmit&) const = default;
};

struct PrePrepare {
  ViewNum view = 0;
  SeqNum seq = 0;  // first transaction sequence of the batch
  Digest digest{};
  RequestBatch batch;
  Signature primary_sig;

  bool operator==(const PrePrepare&) const = default;
};

struct Prepare {
  ViewNum view = 0;
  SeqNum seq = 0;
  Digest digest{};
  NodeId sender_id = 0;
  Signature sig;

  bool operator==(const Prepare&) const = default;
};

struct Commit {
  ViewNum view = 0;
  SeqNum seq = 0;
  Digest digest{};
  NodeId sender_id = 0;
  Signature sig;

  bool operator==(const Commit&) const = default;
};

// `seq` is the chain height (a multiple of the checkpoint interval) and
// `txn_seq` the first transaction sequence not covered by it.
struct CheckpointMsg {
  SeqNum seq = 0;
  SeqNum txn_seq = 0;
  Digest chain_digest{};
  NodeId sender_id = 0;
  Signature sig;

  bool same_state(const CheckpointMsg& o) const {
    return seq == o.seq && txn_seq == o.txn_seq && chain_digest == o.chain_digest;
  }
  bool operator==(const CheckpointMsg&) const = default;
};

// Speculative execution evidence for one request. `seq` is the request's
// transaction sequence; `digest` the digest of the batch carrying it.
struct SpecResponse {
  ViewNum view = 0;
  SeqNum seq = 0;
  Digest digest{};
  Digest result_digest{};
  NodeId replica_id = 0;
  NodeId client_id = 0;
  std::uint64_t request_seq = 0;
  Signature sig;

  bool matches(const SpecResponse& o) const {
    return view == o.view && seq == o.seq && digest == o.digest &&
           result_digest == o.result_digest && client_id == o.client_id &&
           request_seq == o.request_seq;
  }
  bool operator==(const SpecResponse&) const = default;
};

// Per-operation results are the values each write replaced.
struct ClientResponse {
  NodeId client_id = 0;
  std::uint64_t request_seq = 0;
  std::vector<std::int64_t> result;
  NodeId replica_id = 0;
  Signature sig;

  bool operator==(const ClientResponse&) const = default;
};

struct CommitCertificate {
  NodeId client_id = 0;
  std::uint64_t request_seq = 0;
  SeqNum seq = 0;
  Digest digest{};
  std::vector<SpecResponse> responses;

  bool operator==(const CommitCertificate&) const = default;
};

struct CertAck {
  NodeId client_id = 0;
  std::uint64_t request_seq = 0;
  SeqNum seq = 0;
  NodeId replica_id = 0;
  Signature sig;

  bool operator==(const CertAck&) const = default;
};

enum class Tag : std::uint8_t {
  kHello = 1,
  kClientSubmit = 2,
  kPrePrepare = 3,
  kPrepare = 4,
  kCommit = 5,
  kCheckpoint = 6,
  kSpecResponse = 7,
  kClientResponse = 8,
  kCommitCertificate = 9,
  kCertAck = 10,
};

// Variant order matches Tag order (index + 1 == tag).
using Message = std::variant<Hello, ClientSubmit, PrePrepare, Prepare, Commit, CheckpointMsg,
                             SpecResponse, ClientResponse, CommitCertificate, CertAck>;

inline Tag tag_of(const Message& m) { return static_cast<Tag>(m.index() + 1); }
std::string_view tag_name(Tag tag);

class MalformedFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownTag : public MalformedFrame {
 public:
  using MalformedFrame::MalformedFrame;
};

inline constexpr std::size_t kFrameHeaderSize = 5;  // u32 length + u8 tag
inline constexpr std::uint32_t kMaxFrameBody = 512u << 20;

// Frame layout: 4-byte big-endian length of (tag + body), 1-byte tag, body.
// The body opens with the bitwise complement of the tag so that a corrupted
// tag byte can never decode as a different message kind.
Bytes encode_message(const Message& msg);
void encode_message_into(const Message& msg, Bytes& out);
Message decode_message(ByteView frame);
// Decodes a body whose header the caller has already parsed.
Message decode_body(std::uint8_t tag, ByteView body);

// Canonical bytes covered by each signature: the tag followed by every field
// except the signature itself.
Bytes signing_bytes(const ClientRequest& r);
Bytes signing_bytes(const PrePrepare& m);
Bytes signing_bytes(const Prepare& m);
Bytes signing_bytes(const Commit& m);
Bytes signing_bytes(const CheckpointMsg& m);
Bytes signing_bytes(const SpecResponse& m);
Bytes signing_bytes(const ClientResponse& m);
Bytes signing_bytes(const CertAck& m);

Bytes encode_batch(const RequestBatch& batch);
RequestBatch decode_batch(ByteView bytes);

// SHA-256 over the canonical encoding of the whole batch, request bodies and
// client signatures included. Throws std::invalid_argument on an empty batch.
Digest digest_of_batch(const RequestBatch& batch);

Digest result_digest(std::span<const std::int64_t> results);

}  // namespace pipebft::messages
