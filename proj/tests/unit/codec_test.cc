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

#include <set>

#include "generators.hpp"
#include "pipebft/messages/messages.hpp"

namespace pipebft::messages {
namespace {

using testing::Gen;

TEST(Codec, RoundTripRandomMessages) {
  Gen gen(1);
  for (int i = 0; i < 2000; ++i) {
    const Message m = gen.message();
    const Bytes frame = encode_message(m);
    const Message back = decode_message(frame);
    ASSERT_EQ(back, m) << "iteration " << i;
    ASSERT_EQ(encode_message(back), frame);
  }
}

TEST(Codec, FrameHeaderIsBigEndianLengthThenTag) {
  const Message m = Prepare{0, 7, Digest{}, 2, Signature{}};
  const Bytes frame = encode_message(m);
  ASSERT_GE(frame.size(), kFrameHeaderSize);
  const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                            (std::uint32_t{frame[2]} << 8) | frame[3];
  EXPECT_EQ(len, frame.size() - 4);
  EXPECT_EQ(frame[4], static_cast<std::uint8_t>(Tag::kPrepare));
  EXPECT_EQ(std::get<Prepare>(decode_message(frame)).seq, 7u);
}

TEST(Codec, IdenticalFieldsGiveIdenticalBytes) {
  Gen a(9), b(9);
  const PrePrepare p1{3, 100, a.digest(), a.batch(), a.signature()};
  const PrePrepare p2{3, 100, b.digest(), b.batch(), b.signature()};
  EXPECT_EQ(encode_message(p1), encode_message(p2));
}

TEST(Codec, EncodingIsInjective) {
  Gen gen(2);
  std::set<Bytes> seen;
  std::vector<Message> msgs;
  for (int i = 0; i < 1500; ++i) msgs.push_back(gen.message());
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    for (std::size_t j = i + 1; j < msgs.size(); ++j) {
      if (msgs[i] != msgs[j]) ASSERT_NE(encode_message(msgs[i]), encode_message(msgs[j]));
    }
  }
}

TEST(Codec, EmptyInputIsMalformed) {
  EXPECT_THROW(decode_message(Bytes{}), MalformedFrame);
}

TEST(Codec, TruncatedFramesAreMalformed) {
  Gen gen(3);
  for (int i = 0; i < 200; ++i) {
    const Bytes frame = encode_message(gen.message());
    for (std::size_t cut = 0; cut < frame.size(); cut += 1 + frame.size() / 17) {
      ByteView prefix(frame.data(), cut);
      EXPECT_THROW(decode_message(prefix), MalformedFrame);
    }
  }
}

TEST(Codec, UnrecognizedTagIsRejected) {
  Bytes frame = encode_message(Hello{4});
  frame[4] = 200;
  EXPECT_THROW(decode_message(frame), UnknownTag);
}

TEST(Codec, FlippedTagNeverYieldsAMessage) {
  Gen gen(4);
  for (int i = 0; i < 300; ++i) {
    const Message m = gen.message();
    const Bytes frame = encode_message(m);
    for (int t = 0; t < 256; ++t) {
      if (t == frame[4]) continue;
      Bytes mutated = frame;
      mutated[4] = static_cast<std::uint8_t>(t);
      EXPECT_THROW(decode_message(mutated), MalformedFrame)
          << "tag " << int{frame[4]} << " -> " << t;
    }
  }
}

TEST(Codec, SingleByteMutationsDecodeCanonicallyOrFail) {
  Gen gen(5);
  for (int i = 0; i < 300; ++i) {
    const Bytes frame = encode_message(gen.message());
    for (int k = 0; k < 20; ++k) {
      Bytes mutated = frame;
      const std::size_t pos = gen.below(static_cast<std::uint32_t>(frame.size()));
      mutated[pos] ^= static_cast<std::uint8_t>(1 + gen.below(255));
      try {
        const Message m = decode_message(mutated);
        // Anything that parses must be exactly the message those bytes encode.
        EXPECT_EQ(encode_message(m), mutated);
      } catch (const MalformedFrame&) {
      }
    }
  }
}

TEST(BatchDigest, DeterministicAnd32Bytes) {
  Gen gen(6);
  const RequestBatch b = gen.batch();
  EXPECT_EQ(digest_of_batch(b), digest_of_batch(b));
  EXPECT_EQ(digest_of_batch(b).size(), 32u);
}

TEST(BatchDigest, DiffersWhenAnOperationValueChanges) {
  Gen gen(7);
  for (int i = 0; i < 200; ++i) {
    RequestBatch b = gen.batch();
    const Digest before = digest_of_batch(b);
    auto& req = b.requests[gen.below(static_cast<std::uint32_t>(b.requests.size()))];
    req.operations[gen.below(static_cast<std::uint32_t>(req.operations.size()))].value ^=
        static_cast<std::int64_t>(1 + gen.below(1000));
    EXPECT_NE(digest_of_batch(b), before);
  }
}

TEST(BatchDigest, DependsOnEveryEncodedByte) {
  Gen gen(8);
  const RequestBatch b = gen.batch(3);
  const Bytes enc = encode_batch(b);
  const Digest reference = digest_of_batch(b);
  // Of all single-byte mutations, the ones that still decode to a batch must
  // change the digest.
  int checked = 0;
  for (std::size_t pos = 0; pos < enc.size(); ++pos) {
    Bytes mutated = enc;
    mutated[pos] ^= 0x01;
    // Re-wrap as a PrePrepare body so the batch parser is reused.
    PrePrepare pp{0, 0, Digest{}, b, Signature{}};
    Bytes frame = encode_message(pp);
    const std::size_t batch_offset = kFrameHeaderSize + 1 + 8 + 8 + 32;
    std::copy(mutated.begin(), mutated.end(), frame.begin() + batch_offset);
    try {
      const auto decoded = std::get<PrePrepare>(decode_message(frame));
      EXPECT_NE(digest_of_batch(decoded.batch), reference) << "byte " << pos;
      ++checked;
    } catch (const MalformedFrame&) {
    }
  }
  EXPECT_GT(checked, static_cast<int>(enc.size() / 2));
}

TEST(BatchDigest, EmptyBatchRejected) {
  EXPECT_THROW(digest_of_batch(RequestBatch{}), std::invalid_argument);
}

}  // namespace
}  // namespace pipebft::messages
