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

#include "pipebft/pbft/engine.hpp"

namespace pipebft::pbft {

using messages::Commit;
using messages::PrePrepare;
using messages::Prepare;

std::string_view status_name(Status s) {
  switch (s) {
    case Status::kAccepted: return "accepted";
    case Status::kBuffered: return "buffered";
    case Status::kDuplicate: return "duplicate";
    case Status::kStale: return "stale";
    case Status::kWindowDrop: return "window_drop";
    case Status::kNotFromReplica: return "not_from_replica";
    case Status::kBadSignature: return "bad_signature";
    case Status::kBadPrimarySignature: return "bad_primary_signature";
    case Status::kDigestMismatch: return "digest_mismatch";
    case Status::kMalformedBatch: return "malformed_batch";
    case Status::kConflictingPrePrepare: return "conflicting_preprepare";
    case Status::kPoisoned: return "poisoned";
  }
  return "?";
}

PrePrepare make_preprepare(ViewNum view, messages::RequestBatch batch,
                           const crypto::Authenticator& auth, crypto::Scheme scheme,
                           std::span<const NodeId> receivers) {
  PrePrepare pp;
  pp.view = view;
  pp.seq = batch.first_seq;
  pp.digest = messages::digest_of_batch(batch);
  pp.batch = std::move(batch);
  pp.primary_sig = auth.sign(receivers, messages::signing_bytes(pp), scheme);
  return pp;
}

std::size_t drop_unverified_requests(std::vector<messages::ClientRequest>& requests,
                                     const crypto::Authenticator& auth, crypto::Scheme scheme) {
  const auto bad = [&](const messages::ClientRequest& r) {
    if (r.operations.empty()) return true;
    try {
      return !auth.verify(r.client_id, messages::signing_bytes(r), r.client_signature, scheme);
    } catch (const crypto::MissingKey&) {
      return true;
    }
  };
  const auto removed = std::erase_if(requests, bad);
  return static_cast<std::size_t>(removed);
}

Status check_batch(const PrePrepare& pp) {
  const auto& b = pp.batch;
  if (b.requests.empty() || b.first_seq != pp.seq || b.last_seq < b.first_seq ||
      b.last_seq - b.first_seq + 1 != b.requests.size()) {
    return Status::kMalformedBatch;
  }
  for (const auto& r : b.requests) {
    if (r.operations.empty()) return Status::kMalformedBatch;
  }
  return messages::digest_of_batch(b) == pp.digest ? Status::kAccepted : Status::kDigestMismatch;
}

Engine::Engine(ClusterConfig cluster, const crypto::Authenticator& auth,
               crypto::SchemeConfig schemes, EngineOptions options)
    : cluster_(cluster), auth_(auth), schemes_(schemes), options_(options),
      peers_(cluster.replicas()) {
  cluster_.validate();
}

Status Engine::admit(SeqNum seq) {
  if (seq < low_mark_) {
    ++counters_.stale;
    return Status::kStale;
  }
  const SeqNum stable = log_.last_stable().value_or(0);
  if (seq >= stable + options_.window) {
    ++counters_.window_drops;
    return Status::kWindowDrop;
  }
  return Status::kAccepted;
}

Effects Engine::on_preprepare(const PrePrepare& pp, bool local) {
  Effects out;
  ++counters_.preprepares;
  if (pp.view != view_) {
    out.status = Status::kStale;
    ++counters_.stale;
    return out;
  }
  if ((out.status = admit(pp.seq)) != Status::kAccepted) return out;
  const NodeId primary = cluster_.primary(view_);
  if (!local) {
    if (primary == cluster_.self) {
      // Only our own batch threads propose for this view.
      out.status = Status::kBadPrimarySignature;
      ++counters_.bad_signatures;
      return out;
    }
    if (!auth_.verify(primary, messages::signing_bytes(pp), pp.primary_sig, schemes_.replica)) {
      out.status = Status::kBadPrimarySignature;
      ++counters_.bad_signatures;
      return out;
    }
    if (Status s = check_batch(pp); s != Status::kAccepted) {
      out.status = s;
      ++counters_.digest_mismatches;
      return out;
    }
  }

  Instance& inst = log_[pp.seq];
  if (inst.phase != Phase::kNone) {
    if (inst.digest == pp.digest && inst.view == pp.view) {
      out.status = Status::kDuplicate;
      ++counters_.duplicates;
    } else {
      inst.poisoned = true;
      out.status = Status::kConflictingPrePrepare;
      ++counters_.equivocations;
    }
    return out;
  }
  inst.view = pp.view;
  inst.seq = pp.seq;
  inst.digest = pp.digest;
  inst.phase = Phase::kPrePrepared;
  inst.batch = std::make_shared<const messages::RequestBatch>(pp.batch);
  for (const auto& [sender, digest] : inst.early_prepares) {
    if (digest == inst.digest) inst.prepare_senders.insert(sender);
  }
  for (const auto& [sender, digest] : inst.early_commits) {
    if (digest == inst.digest) inst.commit_senders.insert(sender);
  }
  inst.early_prepares.clear();
  inst.early_commits.clear();

  if (primary != cluster_.self) {
    Prepare p{view_, pp.seq, pp.digest, cluster_.self, {}};
    p.sig = auth_.sign(peers_, messages::signing_bytes(p), schemes_.replica);
    inst.prepare_senders.insert(cluster_.self);
    out.prepare = std::move(p);
  }
  advance(inst, out);
  return out;
}

Effects Engine::on_prepare(const Prepare& p) {
  Effects out;
  ++counters_.prepares;
  if (!cluster_.is_replica(p.sender_id) || p.sender_id == cluster_.self ||
      p.sender_id == cluster_.primary(p.view)) {
    out.status = Status::kNotFromReplica;
    return out;
  }
  if (p.view != view_) {
    out.status = Status::kStale;
    ++counters_.stale;
    return out;
  }
  if ((out.status = admit(p.seq)) != Status::kAccepted) return out;
  if (!auth_.verify(p.sender_id, messages::signing_bytes(p), p.sig, schemes_.replica)) {
    out.status = Status::kBadSignature;
    ++counters_.bad_signatures;
    return out;
  }
  Instance& inst = log_[p.seq];
  if (inst.phase == Phase::kNone) {
    if (!inst.early_prepares.emplace(p.sender_id, p.digest).second) {
      out.status = Status::kDuplicate;
      ++counters_.duplicates;
      return out;
    }
    out.status = Status::kBuffered;
    ++counters_.buffered;
    return out;
  }
  if (inst.digest != p.digest) {
    out.status = Status::kDigestMismatch;
    ++counters_.digest_mismatches;
    return out;
  }
  if (!inst.prepare_senders.insert(p.sender_id).second) {
    out.status = Status::kDuplicate;
    ++counters_.duplicates;
    return out;
  }
  advance(inst, out);
  return out;
}

Effects Engine::on_commit(const Commit& c) {
  Effects out;
  ++counters_.commits;
  if (!cluster_.is_replica(c.sender_id) || c.sender_id == cluster_.self) {
    out.status = Status::kNotFromReplica;
    return out;
  }
  if (c.view != view_) {
    out.status = Status::kStale;
    ++counters_.stale;
    return out;
  }
  if ((out.status = admit(c.seq)) != Status::kAccepted) return out;
  if (!auth_.verify(c.sender_id, messages::signing_bytes(c), c.sig, schemes_.replica)) {
    out.status = Status::kBadSignature;
    ++counters_.bad_signatures;
    return out;
  }
  Instance& inst = log_[c.seq];
  if (inst.phase == Phase::kNone) {
    if (!inst.early_commits.emplace(c.sender_id, c.digest).second) {
      out.status = Status::kDuplicate;
      ++counters_.duplicates;
      return out;
    }
    out.status = Status::kBuffered;
    ++counters_.buffered;
    return out;
  }
  if (inst.digest != c.digest) {
    out.status = Status::kDigestMismatch;
    ++counters_.digest_mismatches;
    return out;
  }
  if (!inst.commit_senders.insert(c.sender_id).second) {
    out.status = Status::kDuplicate;
    ++counters_.duplicates;
    return out;
  }
  advance(inst, out);
  return out;
}

void Engine::advance(Instance& inst, Effects& out) {
  if (inst.poisoned) {
    out.status = Status::kPoisoned;
    return;
  }
  if (inst.phase == Phase::kPrePrepared &&
      inst.prepare_senders.size() >= cluster_.prepare_quorum()) {
    inst.phase = Phase::kPrepared;
    Commit c{inst.view, inst.seq, inst.digest, cluster_.self, {}};
    c.sig = auth_.sign(peers_, messages::signing_bytes(c), schemes_.replica);
    inst.commit_senders.insert(cluster_.self);
    out.commit = std::move(c);
  }
  if (inst.phase == Phase::kPrepared && inst.commit_senders.size() >= cluster_.commit_quorum()) {
    inst.phase = Phase::kCommitted;
    ++counters_.committed;
    out.directive = pipeline::ExecuteDirective{inst.seq, inst.batch->last_seq, inst.digest,
                                               inst.view, inst.batch};
  }
}

void Engine::mark_executed(SeqNum seq) {
  if (Instance* inst = log_.find(seq); inst != nullptr && inst->phase == Phase::kCommitted) {
    inst->phase = Phase::kExecuted;
  }
}

std::size_t Engine::on_stable_checkpoint(SeqNum txn_seq) {
  const auto previous = log_.last_stable();
  const std::size_t released = log_.prune_below(txn_seq);
  if (previous && txn_seq > *previous) low_mark_ = *previous;
  return released;
}

const Instance* Engine::instance(SeqNum seq) const {
  return log_.find(seq);
}

}  // namespace pipebft::pbft
