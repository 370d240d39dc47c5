// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "canary/tokenization.h"

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "canary/error.h"
#include "canary/rng.h"
#include "test_util.h"

namespace canary {
namespace {

Vocabulary MakeVocab(std::vector<std::string> tokens) {
  return Vocabulary(std::move(tokens));
}

TEST(VocabularyTest, AssignsIdsByLineOrder) {
  testing::TempDir dir;
  testing::WriteFile(dir / "v.txt", "a\nb\nc\n");
  const Vocabulary vocab = LoadVocabulary(dir / "v.txt");
  EXPECT_EQ(vocab.size(), 3u);
  EXPECT_EQ(vocab.Find("b"), TokenId{1});
  EXPECT_EQ(vocab.token(2), "c");
  EXPECT_FALSE(vocab.unknown_id().has_value());
}

TEST(VocabularyTest, RejectsDuplicateNamingTheLine) {
  testing::TempDir dir;
  testing::WriteFile(dir / "v.txt", "a\nb\na\n");
  try {
    LoadVocabulary(dir / "v.txt");
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

TEST(VocabularyTest, RejectsEmptyAndTinyFiles) {
  testing::TempDir dir;
  testing::WriteFile(dir / "empty.txt", "");
  EXPECT_THROW(LoadVocabulary(dir / "empty.txt"), Error);
  testing::WriteFile(dir / "one.txt", "a\n");
  EXPECT_THROW(LoadVocabulary(dir / "one.txt"), Error);
  EXPECT_THROW(LoadVocabulary(dir / "missing.txt"), Error);
}

TEST(VocabularyTest, SaveLoadRoundTripKeepsSpacesAndEscapes) {
  testing::TempDir dir;
  const Vocabulary vocab =
      MakeVocab({"<unk>", " the", "a\\b", "\n", "\t", "x", " "});
  SaveVocabulary(vocab, dir / "v.txt");
  const Vocabulary loaded = LoadVocabulary(dir / "v.txt");
  EXPECT_EQ(loaded, vocab);
  EXPECT_EQ(loaded.Fingerprint(), vocab.Fingerprint());
  EXPECT_EQ(loaded.unknown_id(), TokenId{0});
}

TEST(VocabularyTest, AcceptsCrlfFiles) {
  const Vocabulary vocab = ParseVocabulary("a\r\nb\r\n");
  EXPECT_EQ(vocab.token(0), "a");
  EXPECT_EQ(vocab.token(1), "b");
}

TEST(EncodeTest, EmptyTextIsEmptySequence) {
  const Vocabulary vocab = MakeVocab({"<unk>", "a"});
  EXPECT_TRUE(Encode("", vocab).empty());
}

TEST(EncodeTest, PrefersLongestMatch) {
  const Vocabulary vocab = MakeVocab({"<unk>", "ab", "a", "b"});
  EXPECT_EQ(Encode("ab", vocab).ids, (std::vector<TokenId>{1}));
  EXPECT_EQ(Encode("aab", vocab).ids, (std::vector<TokenId>{2, 1}));
  EXPECT_EQ(Encode("ba", vocab).ids, (std::vector<TokenId>{3, 2}));
}

TEST(EncodeTest, UnknownSpansCollapseToOneToken) {
  const Vocabulary vocab = MakeVocab({"<unk>", "a", " "});
  const TokenSequence seq = Encode("a xyz a", vocab);
  EXPECT_EQ(seq.ids, (std::vector<TokenId>{1, 2, 0, 2, 1}));
  EXPECT_EQ(Decode(seq, vocab), "a <unk> a");
  // Multi-byte characters are consumed whole.
  EXPECT_EQ(Encode("\xc3\xa9" "a", vocab).ids, (std::vector<TokenId>{0, 1}));
}

TEST(EncodeTest, UnknownWithoutUnkEntryIsRejected) {
  const Vocabulary vocab = MakeVocab({"a", "b"});
  EXPECT_THROW(Encode("abc", vocab), Error);
}

TEST(DecodeTest, ConcatenatesAndChecksBounds) {
  const Vocabulary vocab = MakeVocab({"a", "b"});
  EXPECT_EQ(Decode(TokenSequence{}, vocab), "");
  EXPECT_EQ(Decode(TokenSequence{{0, 1}}, vocab), "ab");
  EXPECT_THROW(Decode(TokenSequence{{2}}, vocab), Error);
}

// Property: texts spelled from vocabulary tokens round-trip exactly, and
// encoding is deterministic.
TEST(EncodeTest, RoundTripProperty) {
  const Vocabulary vocab = MakeVocab(
      {"<unk>", " the", " th", "e", " ", "t", "h", "the", "cat", "c", "a",
       ",", ".", " cat", "at"});
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const std::size_t n = rng.NextBelow(30);
    for (std::size_t i = 0; i < n; ++i) {
      text += vocab.token(1 + static_cast<TokenId>(rng.NextBelow(vocab.size() - 1)));
    }
    const TokenSequence seq = Encode(text, vocab);
    EXPECT_EQ(Decode(seq, vocab), text);
    EXPECT_EQ(Encode(text, vocab), seq);
  }
}

TEST(BuildVocabularyTest, CoversCharactersAndFrequentWords) {
  const std::vector<std::string> texts = {"the cat sat", "the dog"};
  const Vocabulary vocab = BuildVocabulary(texts, 0);
  EXPECT_EQ(vocab.unknown_id(), TokenId{0});
  EXPECT_TRUE(vocab.Find(" the").has_value());
  EXPECT_TRUE(vocab.Find("the").has_value());
  EXPECT_TRUE(vocab.Find("Q").has_value());
  EXPECT_LT(*vocab.Find(" the"), *vocab.Find(" dog"));
  const std::string text = "the cat sat, the dog!";
  EXPECT_EQ(Decode(Encode(text, vocab), vocab), text);
  EXPECT_EQ(Encode(" the cat", vocab).size(), 2u);
}

}  // namespace
}  // namespace canary
