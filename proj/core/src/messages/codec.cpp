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

#include <type_traits>

#include "pipebft/common/byte_io.hpp"
#include "pipebft/messages/messages.hpp"

namespace pipebft::messages {
namespace {

constexpr std::size_t kMinSignature = 5;
constexpr std::size_t kOperationSize = 17;
constexpr std::size_t kMinRequest = 4 + 8 + 4 + 4 + kMinSignature;
constexpr std::size_t kMinSpecResponse = 8 + 8 + 32 + 32 + 4 + 4 + 8 + kMinSignature;

void put(ByteWriter& w, const Signature& s) {
  w.u8(static_cast<std::uint8_t>(s.scheme));
  w.blob(as_view(s.bytes));
}

Signature get_signature(ByteReader& r) {
  Signature s;
  const std::uint8_t scheme = r.u8();
  if (scheme > static_cast<std::uint8_t>(crypto::Scheme::kSlowSig)) {
    throw MalformedFrame("unknown signature scheme");
  }
  s.scheme = static_cast<crypto::Scheme>(scheme);
  s.bytes = r.blob();
  return s;
}

void put_fields(ByteWriter& w, const ClientRequest& m) {
  w.u32(m.client_id);
  w.u64(m.request_seq);
  w.u32(static_cast<std::uint32_t>(m.operations.size()));
  for (const Operation& op : m.operations) {
    w.u8(static_cast<std::uint8_t>(op.kind));
    w.u64(op.key);
    w.i64(op.value);
  }
  w.blob(as_view(m.payload));
}

void put(ByteWriter& w, const ClientRequest& m) {
  put_fields(w, m);
  put(w, m.client_signature);
}

ClientRequest get_request(ByteReader& r) {
  ClientRequest m;
  m.client_id = r.u32();
  m.request_seq = r.u64();
  const std::uint32_t n = r.count(kOperationSize);
  m.operations.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Operation op;
    const std::uint8_t kind = r.u8();
    if (kind != static_cast<std::uint8_t>(OpKind::kWrite)) throw MalformedFrame("unknown op kind");
    op.kind = OpKind::kWrite;
    op.key = r.u64();
    op.value = r.i64();
    m.operations.push_back(op);
  }
  m.payload = r.blob();
  m.client_signature = get_signature(r);
  return m;
}

void put(ByteWriter& w, const RequestBatch& b) {
  w.u64(b.first_seq);
  w.u64(b.last_seq);
  w.u32(static_cast<std::uint32_t>(b.requests.size()));
  for (const ClientRequest& req : b.requests) put(w, req);
}

RequestBatch get_batch(ByteReader& r) {
  RequestBatch b;
  b.first_seq = r.u64();
  b.last_seq = r.u64();
  const std::uint32_t n = r.count(kMinRequest);
  b.requests.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) b.requests.push_back(get_request(r));
  return b;
}

void put_fields(ByteWriter& w, const PrePrepare& m) {
  w.u64(m.view);
  w.u64(m.seq);
  w.digest(m.digest);
}

template <typename PhaseMsg>
void put_phase_fields(ByteWriter& w, const PhaseMsg& m) {
  w.u64(m.view);
  w.u64(m.seq);
  w.digest(m.digest);
  w.u32(m.sender_id);
}

template <typename PhaseMsg>
PhaseMsg get_phase(ByteReader& r) {
  PhaseMsg m;
  m.view = r.u64();
  m.seq = r.u64();
  m.digest = r.digest();
  m.sender_id = r.u32();
  m.sig = get_signature(r);
  return m;
}

void put_fields(ByteWriter& w, const Prepare& m) { put_phase_fields(w, m); }
void put_fields(ByteWriter& w, const Commit& m) { put_phase_fields(w, m); }

void put_fields(ByteWriter& w, const CheckpointMsg& m) {
  w.u64(m.seq);
  w.u64(m.txn_seq);
  w.digest(m.chain_digest);
  w.u32(m.sender_id);
}

void put_fields(ByteWriter& w, const SpecResponse& m) {
  w.u64(m.view);
  w.u64(m.seq);
  w.digest(m.digest);
  w.digest(m.result_digest);
  w.u32(m.replica_id);
  w.u32(m.client_id);
  w.u64(m.request_seq);
}

void put(ByteWriter& w, const SpecResponse& m) {
  put_fields(w, m);
  put(w, m.sig);
}

SpecResponse get_spec_response(ByteReader& r) {
  SpecResponse m;
  m.view = r.u64();
  m.seq = r.u64();
  m.digest = r.digest();
  m.result_digest = r.digest();
  m.replica_id = r.u32();
  m.client_id = r.u32();
  m.request_seq = r.u64();
  m.sig = get_signature(r);
  return m;
}

void put_fields(ByteWriter& w, const ClientResponse& m) {
  w.u32(m.client_id);
  w.u64(m.request_seq);
  w.u32(static_cast<std::uint32_t>(m.result.size()));
  for (std::int64_t v : m.result) w.i64(v);
  w.u32(m.replica_id);
}

void put_fields(ByteWriter& w, const CertAck& m) {
  w.u32(m.client_id);
  w.u64(m.request_seq);
  w.u64(m.seq);
  w.u32(m.replica_id);
}

// Body writers, one per variant alternative.
void put_body(ByteWriter& w, const Hello& m) { w.u32(m.node); }
void put_body(ByteWriter& w, const ClientSubmit& m) {
  w.u32(static_cast<std::uint32_t>(m.requests.size()));
  for (const ClientRequest& req : m.requests) put(w, req);
}
void put_body(ByteWriter& w, const PrePrepare& m) {
  put_fields(w, m);
  put(w, m.batch);
  put(w, m.primary_sig);
}
void put_body(ByteWriter& w, const Prepare& m) {
  put_fields(w, m);
  put(w, m.sig);
}
void put_body(ByteWriter& w, const Commit& m) {
  put_fields(w, m);
  put(w, m.sig);
}
void put_body(ByteWriter& w, const CheckpointMsg& m) {
  put_fields(w, m);
  put(w, m.sig);
}
void put_body(ByteWriter& w, const SpecResponse& m) { put(w, m); }
void put_body(ByteWriter& w, const ClientResponse& m) {
  put_fields(w, m);
  put(w, m.sig);
}
void put_body(ByteWriter& w, const CommitCertificate& m) {
  w.u32(m.client_id);
  w.u64(m.request_seq);
  w.u64(m.seq);
  w.digest(m.digest);
  w.u32(static_cast<std::uint32_t>(m.responses.size()));
  for (const SpecResponse& r : m.responses) put(w, r);
}
void put_body(ByteWriter& w, const CertAck& m) {
  put_fields(w, m);
  put(w, m.sig);
}

Message get_body(Tag tag, ByteReader& r) {
  switch (tag) {
    case Tag::kHello:
      return Hello{r.u32()};
    case Tag::kClientSubmit: {
      ClientSubmit m;
      const std::uint32_t n = r.count(kMinRequest);
      m.requests.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) m.requests.push_back(get_request(r));
      return m;
    }
    case Tag::kPrePrepare: {
      PrePrepare m;
      m.view = r.u64();
      m.seq = r.u64();
      m.digest = r.digest();
      m.batch = get_batch(r);
      m.primary_sig = get_signature(r);
      return m;
    }
    case Tag::kPrepare:
      return get_phase<Prepare>(r);
    case Tag::kCommit:
      return get_phase<Commit>(r);
    case Tag::kCheckpoint: {
      CheckpointMsg m;
      m.seq = r.u64();
      m.txn_seq = r.u64();
      m.chain_digest = r.digest();
      m.sender_id = r.u32();
      m.sig = get_signature(r);
      return m;
    }
    case Tag::kSpecResponse:
      return get_spec_response(r);
    case Tag::kClientResponse: {
      ClientResponse m;
      m.client_id = r.u32();
      m.request_seq = r.u64();
      const std::uint32_t n = r.count(8);
      m.result.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) m.result.push_back(r.i64());
      m.replica_id = r.u32();
      m.sig = get_signature(r);
      return m;
    }
    case Tag::kCommitCertificate: {
      CommitCertificate m;
      m.client_id = r.u32();
      m.request_seq = r.u64();
      m.seq = r.u64();
      m.digest = r.digest();
      const std::uint32_t n = r.count(kMinSpecResponse);
      m.responses.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) m.responses.push_back(get_spec_response(r));
      return m;
    }
    case Tag::kCertAck: {
      CertAck m;
      m.client_id = r.u32();
      m.request_seq = r.u64();
      m.seq = r.u64();
      m.replica_id = r.u32();
      m.sig = get_signature(r);
      return m;
    }
  }
  throw UnknownTag("unknown message tag " + std::to_string(static_cast<int>(tag)));
}

template <typename T>
Bytes tagged_fields(Tag tag, const T& m) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag));
  put_fields(w, m);
  return w.take();
}

}  // namespace

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::kHello: return "hello";
    case Tag::kClientSubmit: return "client_submit";
    case Tag::kPrePrepare: return "preprepare";
    case Tag::kPrepare: return "prepare";
    case Tag::kCommit: return "commit";
    case Tag::kCheckpoint: return "checkpoint";
    case Tag::kSpecResponse: return "spec_response";
    case Tag::kClientResponse: return "client_response";
    case Tag::kCommitCertificate: return "commit_certificate";
    case Tag::kCertAck: return "cert_ack";
  }
  return "unknown";
}

void encode_message_into(const Message& msg, Bytes& out) {
  ByteWriter w(std::move(out));
  w.u32(0);
  w.u8(static_cast<std::uint8_t>(tag_of(msg)));
  w.u8(static_cast<std::uint8_t>(~static_cast<std::uint8_t>(tag_of(msg))));
  std::visit([&w](const auto& m) { put_body(w, m); }, msg);
  w.patch_u32(0, static_cast<std::uint32_t>(w.size() - 4));
  out = w.take();
}

Bytes encode_message(const Message& msg) {
  Bytes out;
  encode_message_into(msg, out);
  return out;
}

Message decode_body(std::uint8_t tag, ByteView body) {
  if (tag == 0 || tag > static_cast<std::uint8_t>(Tag::kCertAck)) {
    throw UnknownTag("unknown message tag " + std::to_string(tag));
  }
  ByteReader r(body);
  try {
    if (r.u8() != static_cast<std::uint8_t>(~tag)) throw MalformedFrame("tag check byte mismatch");
    Message m = get_body(static_cast<Tag>(tag), r);
    if (!r.done()) throw MalformedFrame("trailing bytes after message body");
    return m;
  } catch (const TruncatedInput& e) {
    throw MalformedFrame(e.what());
  }
}

RequestBatch decode_batch(ByteView bytes) {
  ByteReader r(bytes);
  try {
    RequestBatch b = get_batch(r);
    if (!r.done()) throw MalformedFrame("trailing bytes after batch");
    return b;
  } catch (const TruncatedInput& e) {
    throw MalformedFrame(e.what());
  }
}

Message decode_message(ByteView frame) {
  if (frame.size() < kFrameHeaderSize) throw MalformedFrame("frame shorter than header");
  ByteReader r(frame);
  const std::uint32_t len = r.u32();
  if (len != frame.size() - 4) throw MalformedFrame("frame length mismatch");
  const std::uint8_t tag = r.u8();
  return decode_body(tag, frame.subspan(kFrameHeaderSize));
}

Bytes signing_bytes(const ClientRequest& r) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(Tag::kClientSubmit));
  put_fields(w, r);
  return w.take();
}
Bytes signing_bytes(const PrePrepare& m) { return tagged_fields(Tag::kPrePrepare, m); }
Bytes signing_bytes(const Prepare& m) { return tagged_fields(Tag::kPrepare, m); }
Bytes signing_bytes(const Commit& m) { return tagged_fields(Tag::kCommit, m); }
Bytes signing_bytes(const CheckpointMsg& m) { return tagged_fields(Tag::kCheckpoint, m); }
Bytes signing_bytes(const SpecResponse& m) { return tagged_fields(Tag::kSpecResponse, m); }
Bytes signing_bytes(const ClientResponse& m) { return tagged_fields(Tag::kClientResponse, m); }
Bytes signing_bytes(const CertAck& m) { return tagged_fields(Tag::kCertAck, m); }

Bytes encode_batch(const RequestBatch& batch) {
  ByteWriter w;
  put(w, batch);
  return w.take();
}

Digest digest_of_batch(const RequestBatch& batch) {
  if (batch.requests.empty()) throw std::invalid_argument("cannot digest an empty batch");
  return crypto::hash(as_view(encode_batch(batch)));
}

Digest result_digest(std::span<const std::int64_t> results) {
  ByteWriter w;
  w.reserve(results.size() * 8);
  for (std::int64_t v : results) w.i64(v);
  return crypto::hash(as_view(w.buffer()));
}

}  // namespace pipebft::messages
