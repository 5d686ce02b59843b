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

#include "pipebft/zyzzyva/engine.hpp"

#include "pipebft/pbft/engine.hpp"

namespace pipebft::zyzzyva {

using messages::CertAck;
using messages::CommitCertificate;
using messages::PrePrepare;
using messages::SpecResponse;

std::string_view status_name(Status s) {
  switch (s) {
    case Status::kAccepted: return "accepted";
    case Status::kDuplicate: return "duplicate";
    case Status::kStale: return "stale";
    case Status::kBadPrimarySignature: return "bad_primary_signature";
    case Status::kDigestMismatch: return "digest_mismatch";
    case Status::kMalformedBatch: return "malformed_batch";
    case Status::kConflictingPrePrepare: return "conflicting_preprepare";
    case Status::kInvalidCertificate: return "invalid_certificate";
    case Status::kUnknownSequence: return "unknown_sequence";
  }
  return "?";
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kPending: return "pending";
    case Outcome::kFastComplete: return "fast";
    case Outcome::kAwaitingAcks: return "awaiting_acks";
    case Outcome::kCertCommitted: return "cert";
    case Outcome::kFailed: return "failed";
  }
  return "?";
}

SpecResponse make_spec_response(const pipeline::ExecuteDirective& d, std::size_t index,
                                std::span<const std::int64_t> result,
                                const crypto::Authenticator& auth, crypto::Scheme scheme) {
  const auto& req = d.batch->requests.at(index);
  SpecResponse r;
  r.view = d.view;
  r.seq = d.first_seq + index;
  r.digest = d.digest;
  r.result_digest = messages::result_digest(result);
  r.replica_id = auth.self();
  r.client_id = req.client_id;
  r.request_seq = req.request_seq;
  r.sig = auth.sign(req.client_id, messages::signing_bytes(r), scheme);
  return r;
}

ReplicaEngine::ReplicaEngine(ClusterConfig cluster, const crypto::Authenticator& auth,
                             crypto::SchemeConfig schemes)
    : cluster_(cluster), auth_(auth), schemes_(schemes) {
  cluster_.validate();
}

Effects ReplicaEngine::on_preprepare(const PrePrepare& pp, bool local) {
  Effects out;
  ++counters_.preprepares;
  if (pp.view != view_ || pp.seq < low_mark_) {
    out.status = Status::kStale;
    return out;
  }
  if (!local) {
    const NodeId primary = cluster_.primary(view_);
    if (primary == cluster_.self ||
        !auth_.verify(primary, messages::signing_bytes(pp), pp.primary_sig, schemes_.replica)) {
      ++counters_.bad_signatures;
      out.status = Status::kBadPrimarySignature;
      return out;
    }
    switch (pbft::check_batch(pp)) {
      case pbft::Status::kAccepted: break;
      case pbft::Status::kDigestMismatch: out.status = Status::kDigestMismatch; return out;
      default: out.status = Status::kMalformedBatch; return out;
    }
  }
  auto [it, inserted] = accepted_.try_emplace(pp.seq, Accepted{pp.batch.last_seq, pp.digest});
  if (!inserted) {
    if (it->second.digest == pp.digest) {
      out.status = Status::kDuplicate;
    } else {
      ++counters_.equivocations;
      out.status = Status::kConflictingPrePrepare;
    }
    return out;
  }
  ++counters_.executed_batches;
  out.directive = pipeline::ExecuteDirective{
      pp.seq, pp.batch.last_seq, pp.digest, pp.view,
      std::make_shared<const messages::RequestBatch>(pp.batch)};
  return out;
}

CertResult ReplicaEngine::on_commit_certificate(const CommitCertificate& cert) {
  CertResult out;
  ++counters_.certificates;
  auto invalid = [&] {
    ++counters_.invalid_certificates;
    out.status = Status::kInvalidCertificate;
    return out;
  };
  if (cert.responses.size() < cluster_.commit_quorum()) return invalid();
  std::set<NodeId> ids;
  const SpecResponse& first = cert.responses.front();
  for (const auto& r : cert.responses) {
    if (!cluster_.is_replica(r.replica_id) || !ids.insert(r.replica_id).second) return invalid();
    if (!r.matches(first) || r.seq != cert.seq || r.digest != cert.digest ||
        r.client_id != cert.client_id || r.request_seq != cert.request_seq) {
      return invalid();
    }
    try {
      if (!auth_.verify(r.replica_id, r.client_id, messages::signing_bytes(r), r.sig,
                        schemes_.speculative_response())) {
        return invalid();
      }
    } catch (const crypto::MissingKey&) {
      return invalid();
    }
  }
  auto it = accepted_.upper_bound(cert.seq);
  if (it == accepted_.begin() || std::prev(it)->second.last_seq < cert.seq ||
      std::prev(it)->second.digest != cert.digest) {
    ++counters_.unknown_sequence;
    out.status = Status::kUnknownSequence;
    return out;
  }
  std::prev(it)->second.certified = true;
  CertAck ack{cert.client_id, cert.request_seq, cert.seq, cluster_.self, {}};
  ack.sig = auth_.sign(cert.client_id, messages::signing_bytes(ack), schemes_.replica);
  out.ack = std::move(ack);
  return out;
}

bool ReplicaEngine::durably_committed(SeqNum seq) const {
  auto it = accepted_.upper_bound(seq);
  return it != accepted_.begin() && std::prev(it)->second.last_seq >= seq &&
         std::prev(it)->second.certified;
}

std::size_t ReplicaEngine::on_stable_checkpoint(SeqNum txn_seq) {
  if (last_stable_ && txn_seq <= *last_stable_) return 0;
  std::size_t released = 0;
  if (last_stable_) {
    low_mark_ = *last_stable_;
    auto stop = accepted_.lower_bound(low_mark_);
    released = static_cast<std::size_t>(std::distance(accepted_.begin(), stop));
    accepted_.erase(accepted_.begin(), stop);
  }
  last_stable_ = txn_seq;
  return released;
}

SpecCollector::SpecCollector(std::size_t n, std::size_t f, NodeId client_id,
                             std::uint64_t request_seq)
    : n_(n), f_(f), client_id_(client_id), request_seq_(request_seq) {}

std::size_t SpecCollector::best_group_size(const SpecResponse** representative) const {
  std::size_t best = 0;
  for (const auto& [id, r] : by_replica_) {
    std::size_t count = 0;
    for (const auto& [_, other] : by_replica_) count += r.matches(other) ? 1 : 0;
    if (count > best) {
      best = count;
      if (representative) *representative = &r;
    }
  }
  return best;
}

Outcome SpecCollector::add_response(const SpecResponse& r) {
  if (outcome_ != Outcome::kPending) return outcome_;
  if (r.client_id != client_id_ || r.request_seq != request_seq_ || r.replica_id >= n_) {
    return outcome_;
  }
  if (!by_replica_.emplace(r.replica_id, r).second) return outcome_;
  for (const auto& [_, other] : by_replica_) {
    if (!r.matches(other)) mismatched_ = true;
  }
  if (best_group_size(nullptr) >= n_) outcome_ = Outcome::kFastComplete;
  return outcome_;
}

SpecCollector::TimeoutAction SpecCollector::on_timeout() {
  if (outcome_ == Outcome::kAwaitingAcks) outcome_ = Outcome::kFailed;
  if (outcome_ != Outcome::kPending) return {outcome_, std::nullopt};
  const SpecResponse* rep = nullptr;
  if (best_group_size(&rep) < 2 * f_ + 1) {
    outcome_ = Outcome::kFailed;
    return {outcome_, std::nullopt};
  }
  CommitCertificate cert{client_id_, request_seq_, rep->seq, rep->digest, {}};
  for (const auto& [_, r] : by_replica_) {
    if (r.matches(*rep)) cert.responses.push_back(r);
  }
  certified_seq_ = rep->seq;
  outcome_ = Outcome::kAwaitingAcks;
  return {outcome_, std::move(cert)};
}

Outcome SpecCollector::add_ack(const CertAck& ack) {
  if (outcome_ != Outcome::kAwaitingAcks) return outcome_;
  if (ack.client_id != client_id_ || ack.request_seq != request_seq_ ||
      ack.seq != *certified_seq_ || ack.replica_id >= n_) {
    return outcome_;
  }
  acks_.insert(ack.replica_id);
  if (acks_.size() >= 2 * f_ + 1) outcome_ = Outcome::kCertCommitted;
  return outcome_;
}

}  // namespace pipebft::zyzzyva
