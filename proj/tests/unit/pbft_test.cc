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

#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include "cluster_sim.hpp"
#include "pipebft/pipeline/execution_queue_array.hpp"
#include "pipebft/pipeline/sequencer.hpp"

namespace pipebft::pbft {
namespace {

using messages::Commit;
using messages::PrePrepare;
using messages::Prepare;
using testing::make_batch;
using testing::PbftSim;

Prepare signed_prepare(PbftSim& sim, NodeId from, const PrePrepare& pp) {
  Prepare p{pp.view, pp.seq, pp.digest, from, {}};
  const auto ids = sim.replicas();
  p.sig = sim.auth(from).sign(ids, messages::signing_bytes(p), crypto::Scheme::kMac);
  return p;
}

Commit signed_commit(PbftSim& sim, NodeId from, const PrePrepare& pp) {
  Commit c{pp.view, pp.seq, pp.digest, from, {}};
  const auto ids = sim.replicas();
  c.sig = sim.auth(from).sign(ids, messages::signing_bytes(c), crypto::Scheme::kMac);
  return c;
}

TEST(Cluster, RejectsTooFewReplicas) {
  EXPECT_THROW((ClusterConfig{3, 1, 0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((ClusterConfig{4, 1, 0}.validate()));
  EXPECT_EQ((ClusterConfig{16, 5, 0}.commit_quorum()), 11u);
}

TEST(Pbft, HundredRequestsMakeOnePrePrepare) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 100));
  EXPECT_EQ(pp.seq, 0u);
  EXPECT_EQ(pp.batch.last_seq, 99u);
  EXPECT_EQ(pp.digest, messages::digest_of_batch(pp.batch));
  EXPECT_EQ(sim.broadcasts()[messages::Tag::kPrePrepare], 1);
}

TEST(Pbft, BackupAnswersPrePrepareWithMatchingPrepare) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 10));
  Effects fx = sim.engine(1).on_preprepare(pp);
  EXPECT_EQ(fx.status, Status::kAccepted);
  ASSERT_TRUE(fx.prepare);
  EXPECT_EQ(fx.prepare->view, pp.view);
  EXPECT_EQ(fx.prepare->seq, pp.seq);
  EXPECT_EQ(fx.prepare->digest, pp.digest);
  EXPECT_EQ(fx.prepare->sender_id, 1u);
  EXPECT_FALSE(fx.commit);
  EXPECT_EQ(sim.engine(1).instance(0)->phase, Phase::kPrePrepared);
}

TEST(Pbft, TamperedBatchIsDigestMismatch) {
  PbftSim sim(4, 1);
  PrePrepare pp = sim.propose(make_batch(0, 10));
  pp.batch.requests[3].operations[0].value ^= 1;
  EXPECT_EQ(sim.engine(1).on_preprepare(pp).status, Status::kDigestMismatch);
  EXPECT_EQ(sim.engine(1).instance(0), nullptr);
}

TEST(Pbft, PrePrepareFromNonPrimaryRejected) {
  PbftSim sim(4, 1);
  const auto ids = sim.replicas();
  PrePrepare forged = make_preprepare(0, make_batch(0, 5), sim.auth(2), crypto::Scheme::kMac, ids);
  EXPECT_EQ(sim.engine(1).on_preprepare(forged).status, Status::kBadPrimarySignature);
}

TEST(Pbft, SecondPrePrepareWithOtherDigestIsEquivocation) {
  PbftSim sim(4, 1);
  const auto ids = sim.replicas();
  const PrePrepare a = sim.propose(make_batch(0, 5));
  const PrePrepare b = make_preprepare(0, make_batch(0, 5, nullptr, 77), sim.auth(0),
                                       crypto::Scheme::kMac, ids);
  ASSERT_NE(a.digest, b.digest);
  Engine& backup = sim.engine(1);
  EXPECT_EQ(backup.on_preprepare(a).status, Status::kAccepted);
  EXPECT_EQ(backup.on_preprepare(a).status, Status::kDuplicate);
  EXPECT_EQ(backup.on_preprepare(b).status, Status::kConflictingPrePrepare);
  EXPECT_EQ(backup.counters().equivocations, 1u);
  // A poisoned instance never progresses.
  Effects fx = backup.on_prepare(signed_prepare(sim, 2, a));
  EXPECT_EQ(fx.status, Status::kPoisoned);
  EXPECT_FALSE(fx.commit);
}

TEST(Pbft, BackupPreparesAtExactlyTwoDistinctBackups) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(1);
  ASSERT_TRUE(backup.on_preprepare(pp).prepare);  // its own Prepare is the first
  Effects fx = backup.on_prepare(signed_prepare(sim, 2, pp));
  ASSERT_TRUE(fx.commit);
  EXPECT_EQ(fx.commit->sender_id, 1u);
  EXPECT_EQ(backup.instance(0)->phase, Phase::kPrepared);
  EXPECT_FALSE(backup.on_prepare(signed_prepare(sim, 3, pp)).commit);  // exactly once
}

TEST(Pbft, PrimaryPreparesAtExactlyTwoBackupPrepares) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& primary = sim.engine(0);
  EXPECT_FALSE(primary.on_prepare(signed_prepare(sim, 1, pp)).commit);
  Effects dup = primary.on_prepare(signed_prepare(sim, 1, pp));
  EXPECT_EQ(dup.status, Status::kDuplicate);
  EXPECT_FALSE(dup.commit);
  EXPECT_EQ(primary.instance(0)->prepare_senders.size(), 1u);
  EXPECT_TRUE(primary.on_prepare(signed_prepare(sim, 2, pp)).commit);
}

TEST(Pbft, PrepareClaimingPrimaryNotCounted) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(1);
  backup.on_preprepare(pp);
  Effects fx = backup.on_prepare(signed_prepare(sim, 0, pp));
  EXPECT_EQ(fx.status, Status::kNotFromReplica);
  EXPECT_FALSE(fx.commit);
}

TEST(Pbft, CommitsAtExactlyThreeDistinctReplicas) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& primary = sim.engine(0);
  primary.on_prepare(signed_prepare(sim, 1, pp));
  ASSERT_TRUE(primary.on_prepare(signed_prepare(sim, 2, pp)).commit);  // own commit: 1
  EXPECT_FALSE(primary.on_commit(signed_commit(sim, 1, pp)).directive);  // 2
  EXPECT_FALSE(primary.on_commit(signed_commit(sim, 1, pp)).directive);  // duplicate
  Effects fx = primary.on_commit(signed_commit(sim, 2, pp));            // 3
  ASSERT_TRUE(fx.directive);
  EXPECT_EQ(fx.directive->first_seq, 0u);
  EXPECT_EQ(fx.directive->last_seq, 2u);
  EXPECT_EQ(fx.directive->digest, pp.digest);
  EXPECT_FALSE(primary.on_commit(signed_commit(sim, 3, pp)).directive);  // exactly once
  EXPECT_EQ(primary.counters().committed, 1u);
}

TEST(Pbft, TwoCommitsAreBelowQuorum) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(1);
  backup.on_preprepare(pp);
  backup.on_prepare(signed_prepare(sim, 2, pp));  // prepared, own commit
  EXPECT_FALSE(backup.on_commit(signed_commit(sim, 2, pp)).directive);
  EXPECT_EQ(backup.instance(0)->phase, Phase::kPrepared);
}

TEST(Pbft, CommitsBeforePreparedDoNotCommit) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(1);
  backup.on_preprepare(pp);
  EXPECT_FALSE(backup.on_commit(signed_commit(sim, 0, pp)).directive);
  EXPECT_FALSE(backup.on_commit(signed_commit(sim, 2, pp)).directive);
  EXPECT_FALSE(backup.on_commit(signed_commit(sim, 3, pp)).directive);
  Effects fx = backup.on_prepare(signed_prepare(sim, 2, pp));
  EXPECT_TRUE(fx.commit);
  EXPECT_TRUE(fx.directive);
}

TEST(Pbft, VotesBeforePrePrepareAreBuffered) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(3);
  EXPECT_EQ(backup.on_prepare(signed_prepare(sim, 1, pp)).status, Status::kBuffered);
  EXPECT_EQ(backup.on_prepare(signed_prepare(sim, 1, pp)).status, Status::kDuplicate);
  EXPECT_EQ(backup.on_commit(signed_commit(sim, 0, pp)).status, Status::kBuffered);
  EXPECT_EQ(backup.on_commit(signed_commit(sim, 1, pp)).status, Status::kBuffered);
  EXPECT_FALSE(backup.on_prepare(signed_prepare(sim, 2, pp)).commit);
  Effects fx = backup.on_preprepare(pp);
  EXPECT_TRUE(fx.prepare);
  EXPECT_TRUE(fx.commit);
  EXPECT_TRUE(fx.directive);
}

TEST(Pbft, BufferedVotesForAnotherDigestAreIgnored) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  PrePrepare other = pp;
  other.digest.fill(0xab);
  Engine& backup = sim.engine(3);
  backup.on_prepare(signed_prepare(sim, 1, other));
  Effects fx = backup.on_preprepare(pp);
  EXPECT_FALSE(fx.commit);
  EXPECT_EQ(backup.instance(0)->prepare_senders.size(), 1u);
}

TEST(Pbft, BadSignaturesRejected) {
  PbftSim sim(4, 1);
  const PrePrepare pp = sim.propose(make_batch(0, 3));
  Engine& backup = sim.engine(1);
  backup.on_preprepare(pp);
  Prepare p = signed_prepare(sim, 2, pp);
  for (std::size_t i = 4; i < p.sig.bytes.size(); i += 4 + crypto::kMacTagSize) p.sig.bytes[i] ^= 1;
  EXPECT_EQ(backup.on_prepare(p).status, Status::kBadSignature);
  Prepare wrong_sender = signed_prepare(sim, 2, pp);
  wrong_sender.sender_id = 3;
  EXPECT_EQ(backup.on_prepare(wrong_sender).status, Status::kBadSignature);
  Commit c = signed_commit(sim, 2, pp);
  c.seq = 1;
  EXPECT_EQ(backup.on_commit(c).status, Status::kBadSignature);
  EXPECT_EQ(backup.counters().bad_signatures, 3u);
}

TEST(Pbft, SingleConsensusMessageCounts) {
  PbftSim sim(4, 1);
  sim.propose(make_batch(0, 100));
  sim.run_fifo();
  EXPECT_EQ(sim.broadcasts()[messages::Tag::kPrePrepare], 1);
  EXPECT_EQ(sim.broadcasts()[messages::Tag::kPrepare], 3);
  EXPECT_EQ(sim.broadcasts()[messages::Tag::kCommit], 4);
  for (NodeId r = 0; r < 4; ++r) EXPECT_EQ(sim.directive_count()[r], 1) << r;
}

TEST(Pbft, LiveWithOneSilentBackupAndAtF5OfSixteen) {
  {
    PbftSim sim(4, 1);
    sim.silence(3);
    sim.propose(make_batch(0, 10));
    sim.run_fifo();
    for (NodeId r = 0; r < 3; ++r) EXPECT_EQ(sim.directive_count()[r], 1);
  }
  {
    PbftSim sim(16, 5);
    for (NodeId r = 11; r < 16; ++r) sim.silence(r);
    sim.propose(make_batch(0, 10));
    sim.run_fifo();
    for (NodeId r = 0; r < 11; ++r) EXPECT_EQ(sim.directive_count()[r], 1);
  }
}

TEST(Pbft, ShuffledDeliveryManyInstancesAgree) {
  PbftSim sim(4, 1);
  std::mt19937_64 rng(11);
  for (SeqNum b = 0; b < 30; ++b) sim.propose(make_batch(b * 10, 10));
  sim.run_random(rng);
  for (NodeId r = 0; r < 4; ++r) {
    ASSERT_EQ(sim.committed()[r].size(), 30u);
    EXPECT_EQ(sim.committed()[r], sim.committed()[0]);
  }
}

TEST(Pbft, LaterBatchCommittingFirstIsHeldByExecutor) {
  PbftSim sim(4, 1);
  const PrePrepare first = sim.propose(make_batch(0, 5));
  const PrePrepare second = sim.propose(make_batch(5, 5));
  Engine& backup = sim.engine(1);
  pipeline::ExecutionQueueArray queues(pipeline::queue_count(2, 3, 1024), 0);
  backup.on_preprepare(second);
  backup.on_prepare(signed_prepare(sim, 2, second));
  backup.on_commit(signed_commit(sim, 0, second));
  Effects fx = backup.on_commit(signed_commit(sim, 2, second));
  ASSERT_TRUE(fx.directive);
  queues.push(*fx.directive);
  EXPECT_FALSE(queues.try_pop_next());
  backup.on_preprepare(first);
  backup.on_prepare(signed_prepare(sim, 2, first));
  backup.on_commit(signed_commit(sim, 0, first));
  fx = backup.on_commit(signed_commit(sim, 2, first));
  ASSERT_TRUE(fx.directive);
  queues.push(*fx.directive);
  EXPECT_EQ(queues.try_pop_next()->first_seq, 0u);
  EXPECT_EQ(queues.try_pop_next()->first_seq, 5u);
}

TEST(Pbft, WindowAndGarbageCollection) {
  PbftSim sim(4, 1);
  const auto ids = sim.replicas();
  ClusterConfig cfg{4, 1, 1};
  Engine backup(cfg, sim.auth(1), {}, EngineOptions{1000});
  auto far = make_preprepare(0, make_batch(1000, 5), sim.auth(0), crypto::Scheme::kMac, ids);
  EXPECT_EQ(backup.on_preprepare(far).status, Status::kWindowDrop);
  for (SeqNum s = 0; s < 300; s += 10) {
    backup.on_preprepare(make_preprepare(0, make_batch(s, 10), sim.auth(0), crypto::Scheme::kMac, ids));
  }
  EXPECT_EQ(backup.live_instances(), 30u);
  EXPECT_EQ(backup.on_stable_checkpoint(100), 0u);
  EXPECT_EQ(backup.on_stable_checkpoint(100), 0u);
  EXPECT_EQ(backup.on_stable_checkpoint(200), 10u);
  EXPECT_EQ(backup.live_instances(), 20u);
  auto old = make_preprepare(0, make_batch(50, 5), sim.auth(0), crypto::Scheme::kMac, ids);
  EXPECT_EQ(backup.on_preprepare(old).status, Status::kStale);
  EXPECT_EQ(backup.on_preprepare(far).status, Status::kAccepted);
}

TEST(Pbft, ClientSignatureFilter) {
  PbftSim sim(4, 1);
  auto batch = make_batch(0, 10, &sim.client());
  batch.requests[4].operations[0].value = -1;  // breaks that signature
  batch.requests[7].client_signature.bytes.clear();
  const std::size_t dropped =
      drop_unverified_requests(batch.requests, sim.auth(0), crypto::Scheme::kFastSig);
  EXPECT_EQ(dropped, 2u);
  EXPECT_EQ(batch.requests.size(), 8u);
}

TEST(Pbft, RacingBatchThreadsGetDisjointRanges) {
  PbftSim sim(4, 1);
  const auto ids = sim.replicas();
  pipeline::SequenceAssigner seq;
  std::mutex mu;
  std::vector<PrePrepare> made;
  std::vector<std::thread> threads;
  for (int t = 0; t < 2; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        const SeqNum first = seq.assign_range(100);
        auto pp = make_preprepare(0, make_batch(first, 100), sim.auth(0), crypto::Scheme::kMac, ids);
        std::lock_guard lock(mu);
        made.push_back(std::move(pp));
      }
    });
  }
  for (auto& t : threads) t.join();
  std::sort(made.begin(), made.end(), [](auto& a, auto& b) { return a.seq < b.seq; });
  for (std::size_t i = 0; i < made.size(); ++i) {
    EXPECT_EQ(made[i].seq, i * 100);
    EXPECT_EQ(made[i].batch.last_seq, i * 100 + 99);
  }
}

// Exhaustive over a byzantine node's strategies at n=4: which digest (or
// nothing) it sends each honest replica in every phase, under several
// delivery interleavings. No two honest replicas may commit different
// digests at one (view, seq).
enum class Choice { kNone, kA, kB };

TEST(PbftModel, NoConflictingCommitsUnderAnyByzantineStrategy) {
  const auto a_batch = make_batch(0, 2);
  const auto b_batch = make_batch(0, 2, nullptr, 1000);
  int strategies = 0, conflicts = 0, honest_primary_stalls = 0;
  for (NodeId byz : {NodeId{0}, NodeId{3}}) {
    // 3 receivers x (phase-1 choice, commit choice) -> 9^3 strategies.
    for (int code = 0; code < 729; ++code) {
      for (int interleaving = 0; interleaving < 3; ++interleaving) {
        PbftSim sim(4, 1);
        sim.mark_byzantine(byz);
        const auto ids = sim.replicas();
        const auto pp_a = make_preprepare(0, a_batch, sim.auth(0), crypto::Scheme::kMac, ids);
        const auto pp_b = make_preprepare(0, b_batch, sim.auth(0), crypto::Scheme::kMac, ids);
        auto pick = [&](Choice c) -> const PrePrepare* {
          return c == Choice::kA ? &pp_a : c == Choice::kB ? &pp_b : nullptr;
        };
        if (byz != 0) {
          sim.engine(0).on_preprepare(pp_a, true);
          sim.broadcast(0, pp_a);
        }
        int rest = code;
        for (NodeId to = 0; to < 4; ++to) {
          if (to == byz) continue;
          const auto first = static_cast<Choice>(rest % 3);
          const auto commit = static_cast<Choice>((rest / 3) % 3);
          rest /= 9;
          if (const PrePrepare* pp = pick(first)) {
            if (byz == 0) {
              sim.send(0, to, *pp);
            } else {
              sim.send(byz, to, signed_prepare(sim, byz, *pp));
            }
          }
          if (const PrePrepare* pp = pick(commit)) sim.send(byz, to, signed_commit(sim, byz, *pp));
        }
        std::mt19937_64 rng(static_cast<std::uint64_t>(code * 31 + interleaving));
        sim.run_random(rng);

        std::set<Digest> digests;
        for (auto& [replica, seqs] : sim.committed()) {
          if (replica == byz) continue;
          for (auto& [seq, d] : seqs) digests.insert(d);
        }
        if (digests.size() > 1) ++conflicts;
        if (byz != 0) {
          for (NodeId r = 0; r < 3; ++r) {
            if (!sim.committed()[r].contains(0)) ++honest_primary_stalls;
          }
        }
        ++strategies;
      }
    }
  }
  EXPECT_EQ(strategies, 2 * 729 * 3);
  EXPECT_EQ(conflicts, 0);
  // With an honest primary the three honest replicas always commit.
  EXPECT_EQ(honest_primary_stalls, 0);
}

}  // namespace
}  // namespace pipebft::pbft
