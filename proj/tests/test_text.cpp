#include <gtest/gtest.h>

#include "lesanet/text.hpp"

using namespace lesanet;
using Tokens = std::vector<std::string>;

TEST(Tokenize, LowercasesAndStripsPlurals) {
  EXPECT_EQ(tokenize_normalize("Nodules in the right lung."), (Tokens{"nodule", "in", "the", "right", "lung"}));
}

TEST(Tokenize, EmptySentence) { EXPECT_TRUE(tokenize_normalize("").empty()); }

TEST(Tokenize, BookmarksSurviveVerbatim) {
  EXPECT_EQ(tokenize_normalize("enlarging BOOKMARK mass"), (Tokens{"enlarge", "BOOKMARK", "mass"}));
  EXPECT_EQ(tokenize_normalize("see OTHER_BMK."), (Tokens{"see", "OTHER_BMK"}));
}

TEST(Tokenize, DelimitersKeptOnRequest) {
  EXPECT_EQ(tokenize("a, b; c", true), (Tokens{"a", ",", "b", ";", "c"}));
  EXPECT_EQ(tokenize("a, b; c", false), (Tokens{"a", "b", "c"}));
}

TEST(Lemmatize, SuffixTable) {
  EXPECT_EQ(lemmatize("masses"), "mass");
  EXPECT_EQ(lemmatize("opacities"), "opacity");
  EXPECT_EQ(lemmatize("lobes"), "lobe");
  EXPECT_EQ(lemmatize("enlarging"), "enlarge");
  EXPECT_EQ(lemmatize("enhancing"), "enhance");
  EXPECT_EQ(lemmatize("metastases"), "metastasis");
  EXPECT_EQ(lemmatize("pancreas"), "pancreas");
  EXPECT_EQ(lemmatize("is"), "is");
  EXPECT_EQ(lemmatize("bus"), "bus");
}

TEST(Lemmatize, ShortWordsUntouched) {
  EXPECT_EQ(lemmatize("as"), "as");
  EXPECT_EQ(lemmatize("ring"), "ring");
}

TEST(NormalizePhrase, MatchesTokenizer) {
  EXPECT_EQ(normalize_phrase("Ground-Glass Opacities"), "ground glass opacity");
}
