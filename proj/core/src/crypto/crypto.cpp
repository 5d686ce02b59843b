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

#include "pipebft/crypto/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/x509.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "pipebft/common/byte_io.hpp"

namespace pipebft::crypto {
namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct MacCtxDeleter {
  void operator()(EVP_MAC_CTX* p) const { EVP_MAC_CTX_free(p); }
};
struct MacDeleter {
  void operator()(EVP_MAC* p) const { EVP_MAC_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using MacCtxPtr = std::unique_ptr<EVP_MAC_CTX, MacCtxDeleter>;
using MacPtr = std::unique_ptr<EVP_MAC, MacDeleter>;

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw CryptoError("RAND_bytes failed");
  return out;
}

PkeyPtr ed25519_public(const Bytes& raw) {
  PkeyPtr key{EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, raw.data(), raw.size())};
  if (!key) throw CryptoError("bad ed25519 public key");
  return key;
}

PkeyPtr ed25519_private(const Bytes& raw) {
  PkeyPtr key{EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, raw.data(), raw.size())};
  if (!key) throw CryptoError("bad ed25519 private key");
  return key;
}

PkeyPtr rsa_public(const Bytes& der) {
  const unsigned char* p = der.data();
  PkeyPtr key{d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()))};
  if (!key) throw CryptoError("bad rsa public key");
  return key;
}

PkeyPtr rsa_private(const Bytes& der) {
  const unsigned char* p = der.data();
  PkeyPtr key{d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size()))};
  if (!key) throw CryptoError("bad rsa private key");
  return key;
}

Bytes digest_sign(EVP_PKEY* key, const EVP_MD* md, ByteView bytes) {
  MdCtxPtr ctx{EVP_MD_CTX_new()};
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, md, nullptr, key) != 1) {
    throw CryptoError("DigestSignInit failed");
  }
  std::size_t len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &len, bytes.data(), bytes.size()) != 1) {
    throw CryptoError("DigestSign sizing failed");
  }
  Bytes sig(len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, bytes.data(), bytes.size()) != 1) {
    throw CryptoError("DigestSign failed");
  }
  sig.resize(len);
  return sig;
}

bool digest_verify(EVP_PKEY* key, const EVP_MD* md, ByteView bytes, const Bytes& sig) {
  MdCtxPtr ctx{EVP_MD_CTX_new()};
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, md, nullptr, key) != 1) return false;
  return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), bytes.data(), bytes.size()) == 1;
}

Bytes der_public(EVP_PKEY* key) {
  unsigned char* buf = nullptr;
  const int len = i2d_PUBKEY(key, &buf);
  if (len <= 0) throw CryptoError("i2d_PUBKEY failed");
  Bytes out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

Bytes der_private(EVP_PKEY* key) {
  unsigned char* buf = nullptr;
  const int len = i2d_PrivateKey(key, &buf);
  if (len <= 0) throw CryptoError("i2d_PrivateKey failed");
  Bytes out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

}  // namespace

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kNone: return "none";
    case Scheme::kMac: return "mac";
    case Scheme::kFastSig: return "ed25519";
    case Scheme::kSlowSig: return "rsa";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "none" || name == "nosig") return Scheme::kNone;
  if (name == "mac" || name == "cmac") return Scheme::kMac;
  if (name == "ed25519" || name == "ds_fast") return Scheme::kFastSig;
  if (name == "rsa" || name == "ds_slow") return Scheme::kSlowSig;
  throw std::invalid_argument("unknown signature scheme: " + std::string(name));
}

void SchemeConfig::validate() const {
  if (client == Scheme::kMac) {
    throw std::invalid_argument("clients cannot authenticate requests with a MAC");
  }
}

Digest hash(ByteView bytes) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw CryptoError("sha256 failed");
  }
  return out;
}

// ---------------------------------------------------------------------------
// KeyStore

KeyStore KeyStore::generate(std::span<const NodeId> ids, bool with_rsa) {
  KeyStore ks;
  for (NodeId id : ids) {
    IdentityKeys keys;
    keys.id = id;
    {
      EVP_PKEY* raw = nullptr;
      EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr);
      if (!ctx || EVP_PKEY_keygen_init(ctx) != 1 || EVP_PKEY_keygen(ctx, &raw) != 1) {
        EVP_PKEY_CTX_free(ctx);
        throw CryptoError("ed25519 keygen failed");
      }
      EVP_PKEY_CTX_free(ctx);
      PkeyPtr key{raw};
      std::size_t len = 32;
      keys.ed25519_public.resize(len);
      keys.ed25519_private.resize(len);
      EVP_PKEY_get_raw_public_key(key.get(), keys.ed25519_public.data(), &len);
      len = 32;
      EVP_PKEY_get_raw_private_key(key.get(), keys.ed25519_private.data(), &len);
    }
    if (with_rsa) {
      PkeyPtr key{EVP_RSA_gen(2048)};
      if (!key) throw CryptoError("rsa keygen failed");
      keys.rsa_public = der_public(key.get());
      keys.rsa_private = der_private(key.get());
    }
    ks.identities_.emplace(id, std::move(keys));
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      ks.mac_keys_.emplace(pair_key(ids[i], ids[j]), random_bytes(kMacKeySize));
    }
  }
  return ks;
}

const IdentityKeys* KeyStore::identity(NodeId id) const {
  auto it = identities_.find(id);
  return it == identities_.end() ? nullptr : &it->second;
}

const Bytes* KeyStore::mac_key(NodeId a, NodeId b) const {
  auto it = mac_keys_.find(pair_key(a, b));
  return it == mac_keys_.end() ? nullptr : &it->second;
}

KeyStore KeyStore::restricted_to(NodeId self) const {
  KeyStore out;
  for (const auto& [id, keys] : identities_) {
    IdentityKeys copy = keys;
    if (id != self) {
      copy.ed25519_private.clear();
      copy.rsa_private.clear();
    }
    out.identities_.emplace(id, std::move(copy));
  }
  for (const auto& [pair, key] : mac_keys_) {
    if (pair.first == self || pair.second == self) out.mac_keys_.emplace(pair, key);
  }
  return out;
}

void KeyStore::save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["format"] = "pipebft-keys-v1";
  auto& ids = doc["identities"] = nlohmann::json::array();
  for (const auto& [id, k] : identities_) {
    ids.push_back({{"id", id},
                   {"ed25519_public", to_hex(as_view(k.ed25519_public))},
                   {"ed25519_private", to_hex(as_view(k.ed25519_private))},
                   {"rsa_public", to_hex(as_view(k.rsa_public))},
                   {"rsa_private", to_hex(as_view(k.rsa_private))}});
  }
  auto& macs = doc["mac_keys"] = nlohmann::json::array();
  for (const auto& [pair, key] : mac_keys_) {
    macs.push_back({{"a", pair.first}, {"b", pair.second}, {"key", to_hex(as_view(key))}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write key file " + path.string());
  out << doc.dump(1) << '\n';
}

KeyStore KeyStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read key file " + path.string());
  const nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.value("format", "") != "pipebft-keys-v1") {
    throw std::runtime_error("unrecognized key file format in " + path.string());
  }
  KeyStore ks;
  for (const auto& rec : doc.at("identities")) {
    IdentityKeys k;
    k.id = rec.at("id").get<NodeId>();
    k.ed25519_public = from_hex(rec.at("ed25519_public").get<std::string>());
    k.ed25519_private = from_hex(rec.value("ed25519_private", ""));
    k.rsa_public = from_hex(rec.value("rsa_public", ""));
    k.rsa_private = from_hex(rec.value("rsa_private", ""));
    ks.identities_.emplace(k.id, std::move(k));
  }
  for (const auto& rec : doc.at("mac_keys")) {
    ks.mac_keys_.emplace(pair_key(rec.at("a").get<NodeId>(), rec.at("b").get<NodeId>()),
                         from_hex(rec.at("key").get<std::string>()));
  }
  return ks;
}

// ---------------------------------------------------------------------------
// Authenticator

struct Authenticator::Impl {
  PkeyPtr ed_private;
  PkeyPtr rsa_private;
  std::map<NodeId, PkeyPtr> ed_public;
  std::map<NodeId, PkeyPtr> rsa_public;
  MacPtr cmac;
  // Keyed CMAC contexts, duplicated per call so the key schedule runs once.
  std::map<NodeId, MacCtxPtr> mac_templates;

  Bytes mac_tag(NodeId peer, ByteView bytes) const {
    auto it = mac_templates.find(peer);
    if (it == mac_templates.end()) {
      throw MissingKey("no MAC key shared with identity " + std::to_string(peer));
    }
    MacCtxPtr ctx{EVP_MAC_CTX_dup(it->second.get())};
    if (!ctx || EVP_MAC_update(ctx.get(), bytes.data(), bytes.size()) != 1) {
      throw CryptoError("cmac update failed");
    }
    Bytes tag(kMacTagSize);
    std::size_t len = 0;
    if (EVP_MAC_final(ctx.get(), tag.data(), &len, tag.size()) != 1) {
      throw CryptoError("cmac final failed");
    }
    tag.resize(len);
    return tag;
  }
};

Authenticator::Authenticator(NodeId self, const KeyStore& keys)
    : self_(self), impl_(std::make_unique<Impl>()) {
  for (const auto& [id, k] : keys.identities()) {
    if (!k.ed25519_public.empty()) impl_->ed_public.emplace(id, ed25519_public(k.ed25519_public));
    if (!k.rsa_public.empty()) impl_->rsa_public.emplace(id, rsa_public(k.rsa_public));
    if (id == self) {
      if (!k.ed25519_private.empty()) impl_->ed_private = ed25519_private(k.ed25519_private);
      if (!k.rsa_private.empty()) impl_->rsa_private = rsa_private(k.rsa_private);
    }
  }
  impl_->cmac.reset(EVP_MAC_fetch(nullptr, "CMAC", nullptr));
  if (!impl_->cmac) throw CryptoError("CMAC unavailable");
  char cipher[] = "AES-128-CBC";
  OSSL_PARAM params[] = {OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_CIPHER, cipher, 0),
                         OSSL_PARAM_construct_end()};
  for (const auto& [id, k] : keys.identities()) {
    if (id == self) continue;
    const Bytes* key = keys.mac_key(self, id);
    if (key == nullptr) continue;
    MacCtxPtr ctx{EVP_MAC_CTX_new(impl_->cmac.get())};
    if (!ctx || EVP_MAC_init(ctx.get(), key->data(), key->size(), params) != 1) {
      throw CryptoError("cmac init failed");
    }
    impl_->mac_templates.emplace(id, std::move(ctx));
  }
}

Authenticator::~Authenticator() = default;

Signature Authenticator::sign(NodeId receiver, ByteView bytes, Scheme scheme) const {
  return sign(std::span<const NodeId>(&receiver, 1), bytes, scheme);
}

Signature Authenticator::sign(std::span<const NodeId> receivers, ByteView bytes,
                              Scheme scheme) const {
  Signature sig;
  sig.scheme = scheme;
  switch (scheme) {
    case Scheme::kNone:
      break;
    case Scheme::kMac: {
      ByteWriter w;
      w.reserve(receivers.size() * (4 + kMacTagSize));
      for (NodeId r : receivers) {
        if (r == self_) continue;
        w.u32(r);
        w.raw(as_view(impl_->mac_tag(r, bytes)));
      }
      sig.bytes = w.take();
      break;
    }
    case Scheme::kFastSig:
      if (!impl_->ed_private) throw MissingKey("no ed25519 private key for " + std::to_string(self_));
      sig.bytes = digest_sign(impl_->ed_private.get(), nullptr, bytes);
      break;
    case Scheme::kSlowSig:
      if (!impl_->rsa_private) throw MissingKey("no rsa private key for " + std::to_string(self_));
      sig.bytes = digest_sign(impl_->rsa_private.get(), EVP_sha256(), bytes);
      break;
  }
  return sig;
}

bool Authenticator::verify(NodeId sender, NodeId receiver, ByteView bytes, const Signature& sig,
                           Scheme expected) const {
  if (expected == Scheme::kNone) return true;
  if (sig.scheme != expected) return false;
  switch (expected) {
    case Scheme::kNone:
      return true;
    case Scheme::kMac: {
      if (receiver != self_ && sender != self_) {
        throw MissingKey("MAC between " + std::to_string(sender) + " and " +
                         std::to_string(receiver) + " is not verifiable here");
      }
      const NodeId peer = receiver == self_ ? sender : receiver;
      constexpr std::size_t kEntry = 4 + kMacTagSize;
      if (sig.bytes.size() % kEntry != 0) return false;
      for (std::size_t off = 0; off < sig.bytes.size(); off += kEntry) {
        ByteReader r(ByteView(sig.bytes).subspan(off, 4));
        if (r.u32() != receiver) continue;
        const Bytes tag = impl_->mac_tag(peer, bytes);
        return CRYPTO_memcmp(tag.data(), sig.bytes.data() + off + 4, kMacTagSize) == 0;
      }
      return false;
    }
    case Scheme::kFastSig: {
      auto it = impl_->ed_public.find(sender);
      if (it == impl_->ed_public.end()) throw MissingKey("no ed25519 key for " + std::to_string(sender));
      return digest_verify(it->second.get(), nullptr, bytes, sig.bytes);
    }
    case Scheme::kSlowSig: {
      auto it = impl_->rsa_public.find(sender);
      if (it == impl_->rsa_public.end()) throw MissingKey("no rsa key for " + std::to_string(sender));
      return digest_verify(it->second.get(), EVP_sha256(), bytes, sig.bytes);
    }
  }
  return false;
}

}  // namespace pipebft::crypto
