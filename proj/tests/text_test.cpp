#include "lowres/text.hpp"

#include <gtest/gtest.h>

#include "testutil.hpp"

using namespace lowres;
using testutil::TempDir;

namespace {

TEST(Tokenize, SplitsPunctuationAndDigitHyphens) {
  EXPECT_EQ(tokenize("2006-07"), "2006 - 07");
  EXPECT_EQ(tokenize(""), "");
  EXPECT_EQ(tokenize("Hello, world!"), "Hello , world !");
  EXPECT_EQ(tokenize("well-known plan"), "well-known plan");
  EXPECT_EQ(tokenize("don't stop"), "don't stop");
  EXPECT_EQ(tokenize("(see 3.14)"), "( see 3 . 14 )");
  EXPECT_EQ(tokenize("wait..."), "wait ...");
  EXPECT_EQ(tokenize("a  b\tc"), "a b\tc");  // only spaces collapse
}

TEST(Tokenize, KeepsMultibyteUtf8Intact) {
  EXPECT_EQ(tokenize("caf\xc3\xa9."), "caf\xc3\xa9 .");
}

TEST(Detokenize, ReattachesPunctuation) {
  EXPECT_EQ(detokenize("Hello , world !"), "Hello, world!");
  EXPECT_EQ(detokenize("2006 - 07"), "2006-07");
  EXPECT_EQ(detokenize("( see )"), "(see)");
  EXPECT_EQ(detokenize("he said \" yes \" ."), "he said \"yes\".");
  EXPECT_EQ(detokenize(""), "");
}

// Round-trip over a generated thousand-sentence prose-like fixture.
TEST(Tokenize, RoundTripFixture) {
  static const std::vector<std::string> words = {
      "the",  "house", "was",   "far",    "habari", "safari", "moja",
      "kesho", "river", "stone", "well-known", "don't", "mountain", "green"};
  static const std::vector<std::string> finals = {".", "!", "?", "..."};
  Rng rng(2024);
  std::size_t checked = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> toks;
    const std::size_t len = 4 + rng.below(10);
    for (std::size_t t = 0; t < len; ++t) {
      std::string w = words[rng.below(words.size())];
      if (rng.below(8) == 0) w += ",";
      toks.push_back(w);
    }
    if (rng.below(4) == 0)
      toks.push_back(std::to_string(1900 + rng.below(100)) + "-" +
                     std::to_string(10 + rng.below(80)));
    std::string sentence = join(toks) + finals[rng.below(finals.size())];
    EXPECT_EQ(detokenize(tokenize(sentence)), sentence) << sentence;
    ++checked;
  }
  EXPECT_EQ(checked, 1000u);
}

TEST(ReverseTokens, ReversesOrder) {
  EXPECT_EQ(reverse_tokens("a b c d"), "d c b a");
  EXPECT_EQ(reverse_tokens(""), "");
  EXPECT_EQ(reverse_tokens("solo"), "solo");
}

TEST(Truecase, ApplyUsesDominantCasing) {
  const Corpus c = make_mono({
      "said the man",
      "into the river",
      "visit USA now",
      "more USA news",
  });
  const TruecaseModel m = truecase_train(c);
  EXPECT_EQ(truecase("The house", m, TruecaseMode::apply), "the house");
  EXPECT_EQ(truecase("USA stays", m, TruecaseMode::apply), "USA stays");
  EXPECT_EQ(truecase("Unknown word", m, TruecaseMode::apply), "Unknown word");
}

TEST(Truecase, RevertUppercasesFirstCharacter) {
  TruecaseModel m;
  EXPECT_EQ(truecase("the house", m, TruecaseMode::revert), "The house");
  EXPECT_EQ(truecase("", m, TruecaseMode::revert), "");
}

TEST(Truecase, RoundTripOnTitleCasedFixture) {
  std::vector<std::string> lines;
  for (int i = 0; i < 50; ++i) {
    lines.push_back("saw the dog again");
    lines.push_back("near the old bridge");
  }
  const TruecaseModel m = truecase_train(make_mono(lines));
  for (const std::string s : {"The dog barks", "The bridge holds"}) {
    const std::string applied = truecase(s, m, TruecaseMode::apply);
    EXPECT_EQ(applied[0], std::tolower(s[0]));
    EXPECT_EQ(truecase(applied, m, TruecaseMode::revert), s);
  }
}

TEST(Truecase, EmptyModelPassesThrough) {
  TruecaseModel m;
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(truecase("The house", m, TruecaseMode::apply), "The house");
}

TEST(Truecase, FileRoundTrip) {
  TempDir dir;
  const TruecaseModel m =
      truecase_train(make_mono({"ask the iPhone", "use the iPhone"}));
  save_truecase(m, dir.file("tc"));
  const TruecaseModel back = load_truecase(dir.file("tc"));
  EXPECT_EQ(back.table, m.table);
  EXPECT_EQ(back.table.at("iphone").first, "iPhone");
}

TEST(Bpe, FirstMergeIsHandDerived) {
  // "low low lower": (l,o) and (o,w) both occur 3 times; the tie breaks
  // lexicographically to (l,o).
  const BpeModel m = learn_bpe(make_mono({"low low lower"}), 1);
  ASSERT_EQ(m.merges.size(), 1u);
  EXPECT_EQ(m.merges[0], (std::pair<std::string, std::string>("l", "o")));
}

TEST(Bpe, SaturationKeepsFewerMerges) {
  const BpeModel m = learn_bpe(make_mono({"ab ab"}), 50);
  EXPECT_LT(m.merges.size(), 50u);
  EXPECT_TRUE(m.saturated());
  EXPECT_EQ(m.requested, 50u);
}

TEST(Bpe, DefaultMergeBudget) { EXPECT_EQ(kDefaultBpeMerges, 32000u); }

TEST(Bpe, HyphenatedNumberSegmentation) {
  // A model that has learned "2006" and "07" but never merges across the
  // hyphen keeps those atoms separate.
  std::vector<std::string> lines(10, "2006 07 2006 07");
  const BpeModel m = learn_bpe(make_mono(lines), 5);
  EXPECT_EQ(apply_bpe("2006-07", m), "2006@@ -@@ 07");
  EXPECT_EQ(revert_bpe("2006@@ -@@ 07"), "2006-07");
}

TEST(Bpe, InVocabularyWordsPassThrough) {
  std::vector<std::string> lines(5, "habari yako habari");
  const BpeModel m = learn_bpe(make_mono(lines), 20);
  EXPECT_EQ(apply_bpe("habari yako", m), "habari yako");
}

TEST(Bpe, RoundTripProperty) {
  const Corpus train = testutil::toy_mono(300, 60, 17, true);
  const BpeModel m = learn_bpe(train, 40);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::string> toks;
    const std::size_t len = 1 + rng.below(8);
    for (std::size_t t = 0; t < len; ++t)
      toks.push_back(testutil::toy_src_word(rng.below(80)));
    const std::string s = join(toks);
    const std::string applied = apply_bpe(s, m);
    EXPECT_EQ(revert_bpe(applied), s);
    // markers and spaces aside, the character stream is untouched
    std::string squeezed;
    for (const char c : applied)
      if (c != ' ') squeezed += c;
    std::size_t pos;
    while ((pos = squeezed.find(m.marker)) != std::string::npos)
      squeezed.erase(pos, m.marker.size());
    std::string orig_squeezed;
    for (const char c : s)
      if (c != ' ') orig_squeezed += c;
    EXPECT_EQ(squeezed, orig_squeezed);
  }
}

TEST(Bpe, DeterministicModelFiles) {
  TempDir dir;
  const Corpus train = testutil::toy_mono(100, 30, 3, false);
  save_bpe(learn_bpe(train, 25), dir.file("a"));
  save_bpe(learn_bpe(train, 25), dir.file("b"));
  EXPECT_EQ(read_file(dir.file("a")), read_file(dir.file("b")));

  const BpeModel back = load_bpe(dir.file("a"));
  EXPECT_EQ(back.merges, learn_bpe(train, 25).merges);
  EXPECT_EQ(back.marker, "@@");
}

TEST(Bpe, ProtectedTokenNeverSplit) {
  const BpeModel m = learn_bpe(make_mono({"aa bb aa"}), 3, {"<BT>"});
  EXPECT_EQ(apply_bpe("<BT> aa", m), "<BT> aa");
}

TEST(Bpe, ErrorsOnBadInput) {
  EXPECT_THROW(learn_bpe(make_mono({}), 5), Error);
  EXPECT_THROW(learn_bpe(make_mono({"a"}), 0), Error);
}

}  // namespace
