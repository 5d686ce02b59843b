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

#include <iosfwd>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "pipebft/common/types.hpp"

namespace pipebft::ledger {

// B_i = {k, d, v, H(B_{i-1})} plus the number of transactions in the batch.
struct Block {
  SeqNum seq = 0;  // first transaction sequence of the batch
  Digest digest{};
  ViewNum view = 0;
  Digest prev_hash{};
  std::uint32_t txn_count = 0;

  Bytes encode() const;
  bool operator==(const Block&) const = default;
};

Digest hash_block(const Block& block);

// Link stored in the first block: the hash of the first primary's identifier.
Digest genesis_link(NodeId first_primary);

class OutOfOrderAppend : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ChainSnapshot {
  std::uint64_t height = 0;
  Digest head_hash{};
};

// Append-only hash chain. Written by a single thread (the executor); any
// thread may call snapshot().
class Blockchain {
 public:
  explicit Blockchain(NodeId first_primary);

  // Throws OutOfOrderAppend unless seq == next_seq().
  const Block& append_block(SeqNum seq, const Digest& digest, ViewNum view, std::uint32_t txn_count);

  std::uint64_t height() const { return blocks_.size(); }
  SeqNum next_seq() const { return next_seq_; }
  NodeId first_primary() const { return first_primary_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& mutable_blocks_for_test() { return blocks_; }

  // Hash of the newest block, recorded at append time; genesis_link() when
  // empty.
  const Digest& head_hash() const { return head_hash_; }
  ChainSnapshot snapshot() const;

 private:
  NodeId first_primary_;
  std::vector<Block> blocks_;
  SeqNum next_seq_ = 0;
  Digest head_hash_{};
  std::unique_ptr<std::mutex> snapshot_mu_ = std::make_unique<std::mutex>();
  ChainSnapshot snapshot_;
};

// True iff the first block links to the genesis identifier, every later block
// links to the hash of its predecessor, sequence ranges are contiguous from 0
// and the recorded head hash matches the last block.
bool validate_chain(const Blockchain& chain);
bool validate_chain(std::span<const Block> blocks, NodeId first_primary);

// One block per line: seq digest view prev_hash txn_count, all lowercase hex
// (seq/view 16 digits, txn_count 8 digits, hashes 64 digits).
void write_chain_dump(const Blockchain& chain, std::ostream& out);
void write_chain_dump(std::span<const Block> blocks, std::ostream& out);
std::vector<Block> read_chain_dump(std::istream& in);

}  // namespace pipebft::ledger
