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

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "pipebft/common/types.hpp"

namespace pipebft::crypto {

// Authentication schemes in increasing per-message cost. kMac is only valid
// between replicas (and replica to client); clients always sign.
enum class Scheme : std::uint8_t {
  kNone = 0,
  kMac = 1,       // AES-128-CMAC, one tag per receiver
  kFastSig = 2,   // Ed25519
  kSlowSig = 3,   // RSA-2048 / SHA-256, PKCS#1 v1.5
};

std::string_view scheme_name(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct Signature {
  Scheme scheme = Scheme::kNone;
  Bytes bytes;

  bool operator==(const Signature&) const = default;
};

struct SchemeConfig {
  Scheme client = Scheme::kFastSig;
  Scheme replica = Scheme::kMac;

  // Speculative responses are bundled into commit certificates that other
  // replicas must check, so a pairwise MAC cannot be used for them.
  Scheme speculative_response() const {
    return replica == Scheme::kMac ? Scheme::kFastSig : replica;
  }

  bool needs_rsa() const { return client == Scheme::kSlowSig || replica == Scheme::kSlowSig; }

  // Throws std::invalid_argument for combinations that cannot work, e.g. a
  // client MAC (clients have no pairwise keys with every verifier).
  void validate() const;

  bool operator==(const SchemeConfig&) const = default;
};

class MissingKey : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Digest hash(ByteView bytes);

inline constexpr std::size_t kMacKeySize = 16;
inline constexpr std::size_t kMacTagSize = 16;

struct IdentityKeys {
  NodeId id = 0;
  Bytes ed25519_public;
  Bytes ed25519_private;
  Bytes rsa_public;   // DER SubjectPublicKeyInfo, empty when not provisioned
  Bytes rsa_private;  // DER PKCS#8, empty when not provisioned
};

// Static key material for a whole cluster: one record per identity and one
// symmetric key per unordered identity pair. Serialized as JSON with hex
// fields (see README, "Key file").
class KeyStore {
 public:
  static KeyStore generate(std::span<const NodeId> ids, bool with_rsa);
  static KeyStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const IdentityKeys* identity(NodeId id) const;
  const Bytes* mac_key(NodeId a, NodeId b) const;

  // Copy restricted to what `self` is entitled to: its own private keys,
  // everyone's public keys and only the MAC keys it shares.
  KeyStore restricted_to(NodeId self) const;

  const std::map<NodeId, IdentityKeys>& identities() const { return identities_; }

 private:
  static std::pair<NodeId, NodeId> pair_key(NodeId a, NodeId b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  std::map<NodeId, IdentityKeys> identities_;
  std::map<std::pair<NodeId, NodeId>, Bytes> mac_keys_;
};

// Signs as one identity and verifies anyone's messages. Immutable after
// construction; sign/verify may be called from any number of threads.
class Authenticator {
 public:
  Authenticator(NodeId self, const KeyStore& keys);
  ~Authenticator();
  Authenticator(const Authenticator&) = delete;
  Authenticator& operator=(const Authenticator&) = delete;

  NodeId self() const { return self_; }

  // Point-to-point signature for `receiver`.
  Signature sign(NodeId receiver, ByteView bytes, Scheme scheme) const;

  // Broadcast signature. For kMac this is a vector with one tag per receiver.
  Signature sign(std::span<const NodeId> receivers, ByteView bytes, Scheme scheme) const;

  // True iff `sig` was produced by `sender` over `bytes` under `expected`.
  // A MAC is checked for `receiver`; verifying a MAC addressed to a pair this
  // identity holds no key for throws MissingKey.
  bool verify(NodeId sender, NodeId receiver, ByteView bytes, const Signature& sig,
              Scheme expected) const;

  bool verify(NodeId sender, ByteView bytes, const Signature& sig, Scheme expected) const {
    return verify(sender, self_, bytes, sig, expected);
  }

 private:
  struct Impl;
  NodeId self_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pipebft::crypto
