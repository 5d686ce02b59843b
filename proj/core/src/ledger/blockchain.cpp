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

#include "pipebft/ledger/blockchain.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pipebft/common/byte_io.hpp"
#include "pipebft/crypto/crypto.hpp"

namespace pipebft::ledger {

Bytes Block::encode() const {
  ByteWriter w;
  w.reserve(8 + 32 + 8 + 32 + 4);
  w.u64(seq);
  w.digest(digest);
  w.u64(view);
  w.digest(prev_hash);
  w.u32(txn_count);
  return w.take();
}

Digest hash_block(const Block& block) { return crypto::hash(as_view(block.encode())); }

Digest genesis_link(NodeId first_primary) {
  ByteWriter w;
  w.u32(first_primary);
  return crypto::hash(as_view(w.buffer()));
}

Blockchain::Blockchain(NodeId first_primary)
    : first_primary_(first_primary), head_hash_(genesis_link(first_primary)) {
  snapshot_.head_hash = head_hash_;
}

const Block& Blockchain::append_block(SeqNum seq, const Digest& digest, ViewNum view,
                                      std::uint32_t txn_count) {
  if (seq != next_seq_) {
    throw OutOfOrderAppend("append at seq " + std::to_string(seq) + ", expected " +
                           std::to_string(next_seq_));
  }
  if (txn_count == 0) throw OutOfOrderAppend("block with no transactions");
  Block b{seq, digest, view, head_hash_, txn_count};
  head_hash_ = hash_block(b);
  next_seq_ = seq + txn_count;
  blocks_.push_back(b);
  std::lock_guard lock(*snapshot_mu_);
  snapshot_ = {blocks_.size(), head_hash_};
  return blocks_.back();
}

ChainSnapshot Blockchain::snapshot() const {
  std::lock_guard lock(*snapshot_mu_);
  return snapshot_;
}

bool validate_chain(std::span<const Block> blocks, NodeId first_primary) {
  Digest expected_link = genesis_link(first_primary);
  SeqNum expected_seq = 0;
  for (const Block& b : blocks) {
    if (b.prev_hash != expected_link || b.seq != expected_seq || b.txn_count == 0) return false;
    expected_link = hash_block(b);
    expected_seq = b.seq + b.txn_count;
  }
  return true;
}

bool validate_chain(const Blockchain& chain) {
  if (!validate_chain(chain.blocks(), chain.first_primary())) return false;
  const Digest head =
      chain.blocks().empty() ? genesis_link(chain.first_primary()) : hash_block(chain.blocks().back());
  return head == chain.head_hash();
}

void write_chain_dump(std::span<const Block> blocks, std::ostream& out) {
  char num[24];
  for (const Block& b : blocks) {
    std::snprintf(num, sizeof num, "%016llx", static_cast<unsigned long long>(b.seq));
    out << num << ' ' << to_hex(b.digest) << ' ';
    std::snprintf(num, sizeof num, "%016llx", static_cast<unsigned long long>(b.view));
    out << num << ' ' << to_hex(b.prev_hash) << ' ';
    std::snprintf(num, sizeof num, "%08x", b.txn_count);
    out << num << '\n';
  }
}

void write_chain_dump(const Blockchain& chain, std::ostream& out) {
  write_chain_dump(chain.blocks(), out);
}

std::vector<Block> read_chain_dump(std::istream& in) {
  std::vector<Block> blocks;
  std::string line;
  auto to_digest = [](const std::string& hex) {
    const Bytes raw = from_hex(hex);
    if (raw.size() != 32) throw std::invalid_argument("bad digest in chain dump");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.begin());
    return d;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string seq, digest, view, prev, count;
    if (!(fields >> seq >> digest >> view >> prev >> count)) {
      throw std::invalid_argument("bad chain dump line: " + line);
    }
    Block b;
    b.seq = std::stoull(seq, nullptr, 16);
    b.digest = to_digest(digest);
    b.view = std::stoull(view, nullptr, 16);
    b.prev_hash = to_digest(prev);
    b.txn_count = static_cast<std::uint32_t>(std::stoul(count, nullptr, 16));
    blocks.push_back(b);
  }
  return blocks;
}

}  // namespace pipebft::ledger
