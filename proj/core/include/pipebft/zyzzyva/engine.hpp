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

#include <map>
#include <optional>
#include <set>

#include "pipebft/common/cluster.hpp"
#include "pipebft/crypto/crypto.hpp"
#include "pipebft/messages/messages.hpp"
#include "pipebft/pipeline/execute_directive.hpp"

namespace pipebft::zyzzyva {

enum class Status {
  kAccepted,
  kDuplicate,
  kStale,
  kBadPrimarySignature,
  kDigestMismatch,
  kMalformedBatch,
  kConflictingPrePrepare,
  kInvalidCertificate,
  kUnknownSequence,
};

std::string_view status_name(Status s);

struct Effects {
  Status status = Status::kAccepted;
  std::optional<pipeline::ExecuteDirective> directive;
};

struct CertResult {
  Status status = Status::kAccepted;
  std::optional<messages::CertAck> ack;
};

struct ReplicaCounters {
  std::uint64_t preprepares = 0;
  std::uint64_t executed_batches = 0;
  std::uint64_t certificates = 0;
  std::uint64_t invalid_certificates = 0;
  std::uint64_t unknown_sequence = 0;
  std::uint64_t equivocations = 0;
  std::uint64_t bad_signatures = 0;
};

// Builds a signed speculative response for one executed request.
messages::SpecResponse make_spec_response(const pipeline::ExecuteDirective& d, std::size_t index,
                                          std::span<const std::int64_t> result,
                                          const crypto::Authenticator& auth,
                                          crypto::Scheme scheme);

// Single-phase replica: a valid PrePrepare becomes an execute directive at
// once. Execution order is still enforced by the execution queue array.
class ReplicaEngine {
 public:
  ReplicaEngine(ClusterConfig cluster, const crypto::Authenticator& auth,
                crypto::SchemeConfig schemes);

  Effects on_preprepare(const messages::PrePrepare& pp, bool local = false);

  // Validates a client's commit certificate; acks when it holds 2f+1
  // distinct, matching, correctly signed responses for a batch we accepted.
  CertResult on_commit_certificate(const messages::CommitCertificate& cert);

  std::size_t on_stable_checkpoint(SeqNum txn_seq);

  bool durably_committed(SeqNum seq) const;
  const ReplicaCounters& counters() const { return counters_; }
  std::size_t live_batches() const { return accepted_.size(); }

 private:
  struct Accepted {
    SeqNum last_seq;
    Digest digest;
    bool certified = false;
  };

  ClusterConfig cluster_;
  const crypto::Authenticator& auth_;
  crypto::SchemeConfig schemes_;
  ViewNum view_ = 0;
  std::map<SeqNum, Accepted> accepted_;  // keyed by first_seq
  std::optional<SeqNum> last_stable_;
  SeqNum low_mark_ = 0;
  ReplicaCounters counters_;
};

enum class Outcome { kPending, kFastComplete, kAwaitingAcks, kCertCommitted, kFailed };

std::string_view outcome_name(Outcome o);

// Client-side bookkeeping for one outstanding request. Responses are assumed
// already signature-checked by the caller.
class SpecCollector {
 public:
  SpecCollector(std::size_t n, std::size_t f, NodeId client_id, std::uint64_t request_seq);

  // Fast path: 3f+1 matching responses complete the request.
  Outcome add_response(const messages::SpecResponse& r);

  // With 2f+1 matching responses the caller broadcasts the returned
  // certificate and waits for acks; with fewer the request failed. A second
  // timeout while waiting for acks also fails it.
  struct TimeoutAction {
    Outcome outcome;
    std::optional<messages::CommitCertificate> certificate;
  };
  TimeoutAction on_timeout();

  // 2f+1 distinct acks for the certified sequence commit the request.
  Outcome add_ack(const messages::CertAck& ack);

  Outcome outcome() const { return outcome_; }
  bool mismatched() const { return mismatched_; }
  std::size_t responses() const { return by_replica_.size(); }

 private:
  std::size_t best_group_size(const messages::SpecResponse** representative) const;

  std::size_t n_, f_;
  NodeId client_id_;
  std::uint64_t request_seq_;
  std::map<NodeId, messages::SpecResponse> by_replica_;
  std::set<NodeId> acks_;
  std::optional<SeqNum> certified_seq_;
  Outcome outcome_ = Outcome::kPending;
  bool mismatched_ = false;
};

}  // namespace pipebft::zyzzyva
