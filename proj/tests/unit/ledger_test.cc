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

#include <filesystem>
#include <random>
#include <sstream>

#include "pipebft/common/byte_io.hpp"
#include "pipebft/crypto/crypto.hpp"
#include "pipebft/ledger/blockchain.hpp"
#include "pipebft/ledger/metadata_log.hpp"
#include "pipebft/ledger/state_store.hpp"

namespace pipebft::ledger {
namespace {

Digest digest_for(std::uint64_t i) {
  ByteWriter w;
  w.u64(i);
  return crypto::hash(as_view(w.buffer()));
}

Blockchain build_chain(int blocks, std::uint32_t batch = 100) {
  Blockchain chain(0);
  for (int i = 0; i < blocks; ++i) {
    chain.append_block(chain.next_seq(), digest_for(i), 0, batch);
  }
  return chain;
}

TEST(Blockchain, FirstBlockLinksToHashOfPrimaryId) {
  Blockchain chain(0);
  const Block& b = chain.append_block(0, digest_for(0), 0, 100);
  EXPECT_EQ(chain.height(), 1u);
  ByteWriter id;
  id.u32(0);
  EXPECT_EQ(b.prev_hash, crypto::hash(as_view(id.buffer())));
  EXPECT_TRUE(validate_chain(chain));
}

TEST(Blockchain, EmptyAndSingleBlockChainsValidate) {
  EXPECT_TRUE(validate_chain(Blockchain(2)));
  EXPECT_TRUE(validate_chain(build_chain(1)));
}

TEST(Blockchain, AppendKeepsChainValid) {
  Blockchain chain(0);
  for (int i = 0; i < 10; ++i) {
    chain.append_block(chain.next_seq(), digest_for(i), 0, 1 + i);
    ASSERT_TRUE(validate_chain(chain));
    EXPECT_EQ(chain.blocks().back().prev_hash,
              i == 0 ? genesis_link(0) : hash_block(chain.blocks()[i - 1]));
  }
  EXPECT_EQ(chain.snapshot().height, 10u);
  EXPECT_EQ(chain.snapshot().head_hash, hash_block(chain.blocks().back()));
}

TEST(Blockchain, SequenceGapIsRejected) {
  Blockchain chain = build_chain(2);
  EXPECT_THROW(chain.append_block(chain.next_seq() + 1, digest_for(9), 0, 100), OutOfOrderAppend);
  EXPECT_THROW(chain.append_block(0, digest_for(9), 0, 100), OutOfOrderAppend);
  EXPECT_EQ(chain.height(), 2u);
}

TEST(Blockchain, TamperingAnyByteOfAnyBlockIsDetected) {
  const Blockchain reference = build_chain(10);
  for (std::size_t pos = 0; pos < reference.height(); ++pos) {
    for (int field = 0; field < 5; ++field) {
      Blockchain chain = build_chain(10);
      Block& b = chain.mutable_blocks_for_test()[pos];
      switch (field) {
        case 0: b.digest[pos % 32] ^= 0x01; break;
        case 1: b.prev_hash[7] ^= 0x80; break;
        case 2: b.seq += 1; break;
        case 3: b.view ^= 1; break;
        case 4: b.txn_count += 1; break;
      }
      EXPECT_FALSE(validate_chain(chain)) << "block " << pos << " field " << field;
    }
  }
}

TEST(Blockchain, DumpRoundTripsAndIsLineOriented) {
  const Blockchain chain = build_chain(5, 7);
  std::stringstream ss;
  write_chain_dump(chain, ss);
  const std::string text = ss.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_EQ(text.substr(0, 17), "0000000000000000 ");
  const auto blocks = read_chain_dump(ss);
  EXPECT_EQ(blocks, chain.blocks());
  EXPECT_TRUE(validate_chain(blocks, 0));
}

class StoreTest : public ::testing::TestWithParam<Backend> {
 protected:
  std::unique_ptr<StateStore> make(std::uint64_t active = 1000) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("pipebft_store_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter++) + ".sqlite");
    paths_.push_back(path);
    return make_state_store(GetParam(), active, path);
  }
  void TearDown() override {
    for (const auto& p : paths_) std::filesystem::remove(p);
  }
  std::vector<std::filesystem::path> paths_;
};

TEST_P(StoreTest, WriteThenRead) {
  auto store = make();
  const std::vector<messages::Operation> ops{{messages::OpKind::kWrite, 5, 9}};
  const auto results = store->apply_operations(ops);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0], initial_value(5));
  EXPECT_EQ(store->read(5), 9);
  EXPECT_EQ(store->read(6), initial_value(6));
}

TEST_P(StoreTest, ResultsAreReplacedValuesInOrder) {
  auto store = make();
  const std::vector<messages::Operation> ops{
      {messages::OpKind::kWrite, 3, 30}, {messages::OpKind::kWrite, 3, 31}, {messages::OpKind::kWrite, 4, 40}};
  EXPECT_EQ(store->apply_operations(ops), (std::vector<std::int64_t>{3, 30, 4}));
  EXPECT_EQ(store->read(3), 31);
}

TEST_P(StoreTest, OutOfRangeKeyRejectsWholeList) {
  auto store = make(100);
  const std::vector<messages::Operation> ops{{messages::OpKind::kWrite, 1, 7},
                                             {messages::OpKind::kWrite, 100, 7}};
  EXPECT_THROW(store->apply_operations(ops), KeyOutOfRange);
  EXPECT_EQ(store->read(1), initial_value(1));
}

TEST_P(StoreTest, SameStreamSameState) {
  auto a = make();
  auto b = make();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    std::vector<messages::Operation> ops;
    for (int k = 0; k < 3; ++k) {
      ops.push_back({messages::OpKind::kWrite, rng() % 1000, static_cast<std::int64_t>(rng())});
    }
    EXPECT_EQ(a->apply_operations(ops), b->apply_operations(ops));
  }
  EXPECT_EQ(a->modified_records(), b->modified_records());
}

INSTANTIATE_TEST_SUITE_P(Backends, StoreTest,
                         ::testing::Values(Backend::kInMemory, Backend::kFileBacked),
                         [](const auto& info) { return std::string(backend_name(info.param)); });

TEST(StoreEquivalence, FileBackedMatchesInMemory) {
  const auto path = std::filesystem::temp_directory_path() / "pipebft_equiv.sqlite";
  auto mem = make_state_store(Backend::kInMemory, kDefaultActiveSet);
  auto file = make_state_store(Backend::kFileBacked, kDefaultActiveSet, path);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 400; ++i) {
    std::vector<messages::Operation> ops;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k) {
      // Skewed toward a few hot keys so overwrites are common.
      const std::uint64_t key = (rng() % 4 == 0) ? rng() % 8 : rng() % kDefaultActiveSet;
      ops.push_back({messages::OpKind::kWrite, key, static_cast<std::int64_t>(rng() % 1000)});
    }
    ASSERT_EQ(mem->apply_operations(ops), file->apply_operations(ops));
  }
  EXPECT_EQ(mem->modified_records(), file->modified_records());
  file.reset();
  std::filesystem::remove(path);
}

TEST(MetadataLog, PrunesBelowPreviousCheckpoint) {
  MetadataLog<int> log;
  for (SeqNum s = 0; s < 250; ++s) log[s] = static_cast<int>(s);
  EXPECT_EQ(log.prune_below(100), 0u);  // no earlier checkpoint yet
  EXPECT_EQ(log.size(), 250u);
  EXPECT_EQ(log.prune_below(200), 100u);
  EXPECT_FALSE(log.contains(99));
  EXPECT_TRUE(log.contains(100));
  EXPECT_EQ(log.prune_below(200), 0u);  // idempotent
  EXPECT_EQ(log.size(), 150u);
}

TEST(MetadataLog, ReleaseCallbackSeesEveryPrunedEntry) {
  std::vector<SeqNum> released;
  MetadataLog<int> log([&](SeqNum s, int&) { released.push_back(s); });
  for (SeqNum s = 0; s < 30; ++s) log[s] = 0;
  log.prune_below(10);
  log.prune_below(20);
  EXPECT_EQ(released.size(), 10u);
  EXPECT_EQ(released.back(), 9u);
}

}  // namespace
}  // namespace pipebft::ledger
