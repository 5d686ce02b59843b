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
#include <memory>
#include <optional>
#include <set>

#include "pipebft/common/cluster.hpp"
#include "pipebft/crypto/crypto.hpp"
#include "pipebft/ledger/metadata_log.hpp"
#include "pipebft/messages/messages.hpp"
#include "pipebft/pipeline/execute_directive.hpp"

namespace pipebft::pbft {

enum class Status {
  kAccepted,
  kBuffered,  // arrived before its PrePrepare
  kDuplicate,
  kStale,       // below the garbage-collection mark
  kWindowDrop,  // too far ahead of the stable checkpoint
  kNotFromReplica,
  kBadSignature,
  kBadPrimarySignature,
  kDigestMismatch,
  kMalformedBatch,
  kConflictingPrePrepare,
  kPoisoned,  // instance disabled after equivocation
};

std::string_view status_name(Status s);

enum class Phase { kNone, kPrePrepared, kPrepared, kCommitted, kExecuted };

struct Instance {
  ViewNum view = 0;
  SeqNum seq = 0;
  Digest digest{};
  Phase phase = Phase::kNone;
  bool poisoned = false;
  std::set<NodeId> prepare_senders;
  std::set<NodeId> commit_senders;
  // Votes that beat the PrePrepare here, by sender.
  std::map<NodeId, Digest> early_prepares;
  std::map<NodeId, Digest> early_commits;
  std::shared_ptr<const messages::RequestBatch> batch;
};

struct Effects {
  Status status = Status::kAccepted;
  std::optional<messages::Prepare> prepare;  // broadcast to the other replicas
  std::optional<messages::Commit> commit;    // broadcast to the other replicas
  std::optional<pipeline::ExecuteDirective> directive;
};

struct EngineOptions {
  // Instances may run at most this many transaction sequences ahead of the
  // last stable checkpoint; later messages are dropped.
  std::uint64_t window = std::uint64_t{1} << 40;
};

struct EngineCounters {
  std::uint64_t preprepares = 0;
  std::uint64_t prepares = 0;
  std::uint64_t commits = 0;
  std::uint64_t committed = 0;
  std::uint64_t buffered = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t bad_signatures = 0;
  std::uint64_t digest_mismatches = 0;
  std::uint64_t equivocations = 0;
  std::uint64_t window_drops = 0;
  std::uint64_t stale = 0;
};

// Builds and signs the PrePrepare for a batch whose sequence range the
// caller already owns. Safe to call from any batch thread.
messages::PrePrepare make_preprepare(ViewNum view, messages::RequestBatch batch,
                                     const crypto::Authenticator& auth, crypto::Scheme scheme,
                                     std::span<const NodeId> receivers);

// Drops requests whose client signature does not verify under `scheme` and
// returns how many were dropped. Run by the primary's batch threads.
std::size_t drop_unverified_requests(std::vector<messages::ClientRequest>& requests,
                                     const crypto::Authenticator& auth, crypto::Scheme scheme);

// Checks a PrePrepare's batch shape and digest. Returns kAccepted or the
// failure status.
Status check_batch(const messages::PrePrepare& pp);

// Normal-case three-phase agreement. Not thread-safe: owned by the worker.
// Prepared = PrePrepare plus 2f distinct backup Prepares (the primary never
// prepares); committed = prepared plus 2f+1 distinct Commits.
class Engine {
 public:
  Engine(ClusterConfig cluster, const crypto::Authenticator& auth, crypto::SchemeConfig schemes,
         EngineOptions options = {});

  // `local` marks the primary's own proposal, already trusted.
  Effects on_preprepare(const messages::PrePrepare& pp, bool local = false);
  Effects on_prepare(const messages::Prepare& p);
  Effects on_commit(const messages::Commit& c);

  void mark_executed(SeqNum seq);

  // Garbage-collects instances below the previous stable checkpoint.
  std::size_t on_stable_checkpoint(SeqNum txn_seq);

  const Instance* instance(SeqNum seq) const;
  std::size_t live_instances() const { return log_.size(); }
  const EngineCounters& counters() const { return counters_; }
  ViewNum view() const { return view_; }
  const ClusterConfig& cluster() const { return cluster_; }
  bool is_primary() const { return cluster_.primary(view_) == cluster_.self; }

 private:
  Status admit(SeqNum seq);
  void advance(Instance& inst, Effects& out);

  ClusterConfig cluster_;
  const crypto::Authenticator& auth_;
  crypto::SchemeConfig schemes_;
  EngineOptions options_;
  ViewNum view_ = 0;
  std::vector<NodeId> peers_;
  ledger::MetadataLog<Instance> log_;
  SeqNum low_mark_ = 0;
  EngineCounters counters_;
};

}  // namespace pipebft::pbft
