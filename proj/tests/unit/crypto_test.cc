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

#include "pipebft/crypto/crypto.hpp"

namespace pipebft::crypto {
namespace {

class CryptoTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const std::vector<NodeId> ids{0, 1, 2, 3, 10};
    keys_ = new KeyStore(KeyStore::generate(ids, /*with_rsa=*/true));
  }
  static void TearDownTestSuite() {
    delete keys_;
    keys_ = nullptr;
  }

  static Bytes payload(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
  }

  static KeyStore* keys_;
};

KeyStore* CryptoTest::keys_ = nullptr;

TEST_F(CryptoTest, SignThenVerifyEveryScheme) {
  Authenticator alice(0, *keys_);
  Authenticator bob(1, *keys_);
  const Bytes msg = payload(100, 1);
  for (Scheme s : {Scheme::kNone, Scheme::kMac, Scheme::kFastSig, Scheme::kSlowSig}) {
    const Signature sig = alice.sign(1, msg, s);
    EXPECT_TRUE(bob.verify(0, msg, sig, s)) << scheme_name(s);
  }
}

TEST_F(CryptoTest, NoSigIsEmptyAndAlwaysVerifies) {
  Authenticator alice(0, *keys_);
  Authenticator bob(1, *keys_);
  const Signature sig = alice.sign(1, payload(10, 2), Scheme::kNone);
  EXPECT_TRUE(sig.bytes.empty());
  EXPECT_TRUE(bob.verify(0, payload(10, 3), Signature{}, Scheme::kNone));
}

TEST_F(CryptoTest, TamperedPayloadFails) {
  Authenticator alice(0, *keys_);
  Authenticator bob(1, *keys_);
  std::mt19937_64 rng(4);
  for (Scheme s : {Scheme::kMac, Scheme::kFastSig, Scheme::kSlowSig}) {
    for (int trial = 0; trial < 20; ++trial) {
      Bytes msg = payload(64 + trial, rng());
      const Signature sig = alice.sign(1, msg, s);
      msg[rng() % msg.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      EXPECT_FALSE(bob.verify(0, msg, sig, s)) << scheme_name(s);
    }
  }
}

TEST_F(CryptoTest, WrongSenderFails) {
  const Bytes msg = payload(40, 5);
  for (Scheme s : {Scheme::kMac, Scheme::kFastSig, Scheme::kSlowSig}) {
    for (NodeId signer : {0u, 1u, 2u}) {
      Authenticator a(signer, *keys_);
      const Signature sig = a.sign(3, msg, s);
      Authenticator verifier(3, *keys_);
      for (NodeId claimed : {0u, 1u, 2u}) {
        EXPECT_EQ(verifier.verify(claimed, msg, sig, s), claimed == signer)
            << scheme_name(s) << " signer " << signer << " claimed " << claimed;
      }
    }
  }
}

TEST_F(CryptoTest, SchemeMismatchFails) {
  Authenticator alice(0, *keys_);
  Authenticator bob(1, *keys_);
  const Bytes msg = payload(30, 6);
  EXPECT_FALSE(bob.verify(0, msg, alice.sign(1, msg, Scheme::kNone), Scheme::kFastSig));
  EXPECT_FALSE(bob.verify(0, msg, alice.sign(1, msg, Scheme::kMac), Scheme::kFastSig));
}

TEST_F(CryptoTest, MacVectorCoversEachReceiver) {
  Authenticator primary(0, *keys_);
  const std::vector<NodeId> group{1, 2, 3};
  const Bytes msg = payload(50, 7);
  const Signature sig = primary.sign(group, msg, Scheme::kMac);
  EXPECT_EQ(sig.bytes.size(), group.size() * (4 + kMacTagSize));
  for (NodeId r : group) {
    Authenticator receiver(r, keys_->restricted_to(r));
    EXPECT_TRUE(receiver.verify(0, msg, sig, Scheme::kMac));
  }
  // A receiver left out of the vector rejects it.
  Authenticator outsider(10, *keys_);
  EXPECT_FALSE(outsider.verify(0, msg, sig, Scheme::kMac));
}

TEST_F(CryptoTest, ThirdPartyCannotCheckMac) {
  const KeyStore own = keys_->restricted_to(2);
  Authenticator third(2, own);
  Authenticator alice(0, *keys_);
  const Bytes msg = payload(20, 8);
  const Signature sig = alice.sign(1, msg, Scheme::kMac);
  EXPECT_THROW(third.verify(0, 1, msg, sig, Scheme::kMac), MissingKey);
}

TEST_F(CryptoTest, SignaturesAreVerifiableByAnyone) {
  // Non-repudiation: a replica holding only public keys can check a client.
  Authenticator client(10, *keys_);
  const Bytes msg = payload(70, 9);
  const Signature sig = client.sign(0, msg, Scheme::kFastSig);
  for (NodeId r : {0u, 1u, 2u, 3u}) {
    Authenticator replica(r, keys_->restricted_to(r));
    EXPECT_TRUE(replica.verify(10, msg, sig, Scheme::kFastSig));
  }
}

TEST_F(CryptoTest, SigningWithoutPrivateKeyThrows) {
  KeyStore pub_only = keys_->restricted_to(2);
  Authenticator impostor(0, pub_only);
  EXPECT_THROW(impostor.sign(1, payload(4, 1), Scheme::kFastSig), MissingKey);
  EXPECT_THROW(impostor.sign(1, payload(4, 1), Scheme::kMac), MissingKey);
}

TEST_F(CryptoTest, KeyFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "pipebft_keys_test.json";
  keys_->save(path);
  const KeyStore loaded = KeyStore::load(path);
  std::filesystem::remove(path);
  Authenticator signer(0, *keys_);
  Authenticator verifier(3, loaded);
  const Bytes msg = payload(33, 10);
  for (Scheme s : {Scheme::kMac, Scheme::kFastSig, Scheme::kSlowSig}) {
    EXPECT_TRUE(verifier.verify(0, msg, signer.sign(3, msg, s), s));
  }
}

TEST(Hash, EmptyInputMatchesReferenceVector) {
  EXPECT_EQ(to_hex(hash({})), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  const Digest d = hash(ByteView(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()));
  EXPECT_EQ(to_hex(d), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, DeterministicAndBitSensitive) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    Bytes b(1 + rng() % 200);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    const Digest d = hash(b);
    EXPECT_EQ(hash(b), d);
    b[rng() % b.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    const Digest flipped = hash(b);
    int differing_bits = 0;
    for (std::size_t k = 0; k < d.size(); ++k) differing_bits += __builtin_popcount(d[k] ^ flipped[k]);
    // Avalanche: about half of 256 bits change; 64 is far below any plausible draw.
    EXPECT_GT(differing_bits, 64);
  }
}

TEST(SchemeConfig, DefaultsAndValidation) {
  SchemeConfig cfg;
  EXPECT_EQ(cfg.client, Scheme::kFastSig);
  EXPECT_EQ(cfg.replica, Scheme::kMac);
  EXPECT_EQ(cfg.speculative_response(), Scheme::kFastSig);
  EXPECT_NO_THROW(cfg.validate());
  cfg.client = Scheme::kMac;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_scheme("ds_slow"), Scheme::kSlowSig);
  EXPECT_THROW(parse_scheme("dsa"), std::invalid_argument);
}

}  // namespace
}  // namespace pipebft::crypto
