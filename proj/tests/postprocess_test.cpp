#include "lowres/postprocess.hpp"

#include <gtest/gtest.h>

#include "lowres/augment.hpp"
#include "testutil.hpp"

using namespace lowres;

namespace {

TEST(StripTag, LeadingOccurrenceOnly) {
  EXPECT_EQ(strip_tag("<BT> habari", "<BT>"), "habari");
  EXPECT_EQ(strip_tag("habari", "<BT>"), "habari");
  EXPECT_EQ(strip_tag("x <BT> y", "<BT>"), "x <BT> y");
  EXPECT_EQ(strip_tag("<BT> <BT> y", "<BT>"), "<BT> y");
  EXPECT_EQ(strip_tag("<BT>", "<BT>"), "<BT>");  // no trailing space
}

TEST(StripTag, RoundTripWithTaggingFixture) {
  Corpus c = testutil::toy_parallel(1000, 80, 3);
  c.provenance = kProvSynthetic;
  const Corpus tagged = tag_back_translation(c, "<BT>");
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_EQ(strip_tag(tagged.pairs[i].src, "<BT>"), c.pairs[i].src);
}

TEST(NumberSpans, ExtractionSignature) {
  const auto spans = extract_number_spans("born 1999, season 2006-07 ok");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].surface, "1999");
  EXPECT_EQ(spans[0].digits, "1999");
  EXPECT_EQ(spans[1].surface, "2006-07");
  EXPECT_EQ(spans[1].digits, "200607");
  EXPECT_EQ(spans[1].runs, (std::vector<std::string>{"2006", "07"}));

  EXPECT_TRUE(extract_number_spans("no digits here").empty());
  const auto dotted = extract_number_spans("pi is 3.14159");
  ASSERT_EQ(dotted.size(), 1u);
  EXPECT_EQ(dotted[0].surface, "3.14159");

  // a single space joins digit runs; a word does not
  const auto spaced = extract_number_spans("in 2006 07 x");
  ASSERT_EQ(spaced.size(), 1u);
  EXPECT_EQ(spaced[0].digits, "200607");
  const auto worded = extract_number_spans("in 2006 at 07");
  ASSERT_EQ(worded.size(), 2u);
}

TEST(FixNumbers, SplitHyphenRangeRepairedByteExact) {
  const std::string src =
      "Msimu uliopita wa Siltala kwenye ligi ilikuwa 2006-07";
  const std::string hyp =
      "Siltala's previous season in the league was 2006 at 07";
  EXPECT_EQ(fix_numbers(src, hyp),
            "Siltala's previous season in the league was 2006-07");
}

TEST(FixNumbers, DeBpeLeftoverCollapses) {
  EXPECT_EQ(fix_numbers("alikuwa 2006-07", "it was 2006 -07"),
            "it was 2006-07");
}

TEST(FixNumbers, TrivialCases) {
  EXPECT_EQ(fix_numbers("src 123", "no digits"), "no digits");
  EXPECT_EQ(fix_numbers("born 1999", "born 1999"), "born 1999");
  EXPECT_EQ(fix_numbers("no numbers", "hyp 42"), "hyp 42");
}

TEST(FixNumbers, SimilarityThreshold) {
  // lev("199","1999") = 1, sim = 0.75 -> repaired
  EXPECT_EQ(fix_numbers("born 1999", "born 199"), "born 1999");
  // lev("55","1999") = 4, sim = 0 -> left alone
  EXPECT_EQ(fix_numbers("born 1999", "costs 55"), "costs 55");
}

TEST(FixNumbers, RepairLogRecordsReplacement) {
  std::vector<RepairRecord> log;
  fix_numbers("year 2006-07", "year 2006 at 07", &log, 3);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].segment, 3u);
  EXPECT_EQ(log[0].original, "2006 at 07");
  EXPECT_EQ(log[0].replacement, "2006-07");
  EXPECT_DOUBLE_EQ(log[0].similarity, 1.0);
}

// 5,000 adversarial segments: random digit mutations, splits, and
// separator swaps against a numeric source.
TEST(FixNumbers, IdempotentAndNoNewDigitsOnAdversarialFixture) {
  Rng rng(2023);
  const std::vector<std::string> seps = {"-", "/", ".", ",", ":"};
  for (int i = 0; i < 5000; ++i) {
    // source with 1-3 number spans
    std::string src = "line";
    const std::size_t n_spans = 1 + rng.below(3);
    std::vector<std::string> src_numbers;
    for (std::size_t s = 0; s < n_spans; ++s) {
      std::string num = std::to_string(1000 + rng.below(9000));
      if (rng.below(2)) num += seps[rng.below(seps.size())] +
                               std::to_string(rng.below(100));
      src_numbers.push_back(num);
      src += " neno " + num;
    }
    // hypothesis: mangled copies
    std::string hyp = "word";
    for (const auto& num : src_numbers) {
      std::string h = num;
      switch (rng.below(4)) {
        case 0: break;  // exact
        case 1:         // digit mutation
          for (auto& c : h)
            if (c >= '0' && c <= '9' && rng.below(4) == 0)
              c = char('0' + rng.below(10));
          break;
        case 2: {  // split with inserted word
          const auto pos = h.find_first_of("-/.,:");
          if (pos != std::string::npos)
            h = h.substr(0, pos) + " at " + h.substr(pos + 1);
          break;
        }
        case 3:  // truncation
          h = h.substr(0, std::max<std::size_t>(1, h.size() / 2));
          break;
      }
      hyp += " and " + h;
    }
    const std::string fixed = fix_numbers(src, hyp);
    const std::string fixed_twice = fix_numbers(src, fixed);
    ASSERT_EQ(fixed_twice, fixed) << "src: " << src << "\nhyp: " << hyp;

    // every output span appears in the source or survived from the hyp
    std::set<std::string> allowed;
    for (const auto& s : extract_number_spans(src)) allowed.insert(s.digits);
    for (const auto& s : extract_number_spans(hyp)) allowed.insert(s.digits);
    for (const auto& s : extract_number_spans(fixed))
      ASSERT_TRUE(allowed.count(s.digits))
          << "introduced " << s.digits << "\nsrc: " << src << "\nhyp: " << hyp
          << "\nfixed: " << fixed;
  }
}

TEST(FixNumbers, NonNumericTextUntouched) {
  const std::string src = "ilikuwa 2006-07 na 42";
  const std::string hyp = "prefix words 2006 at 07 middle 41 suffix";
  const std::string fixed = fix_numbers(src, hyp);
  EXPECT_TRUE(fixed.find("prefix words ") == 0);
  EXPECT_NE(fixed.find(" middle "), std::string::npos);
  EXPECT_NE(fixed.find(" suffix"), std::string::npos);
}

TEST(Chain, ComposedStagesRepairSplitRange) {
  TruecaseModel tc;
  tc.table["siltala's"] = {"Siltala's", 5};
  const std::string src =
      "Msimu uliopita wa Siltala kwenye ligi ilikuwa 2006-07";
  // what a decoder emitting BPE pieces over tokenized text would produce
  const std::string hyp_bpe =
      "sil@@ tala's previous season in the league was 2006 at 07";
  ChainTrace trace;
  const std::string out = postprocess_chain(src, hyp_bpe, tc, &trace);
  EXPECT_EQ(trace.after_debpe,
            "siltala's previous season in the league was 2006 at 07");
  EXPECT_EQ(trace.after_detruecase,
            "Siltala's previous season in the league was 2006 at 07");
  EXPECT_EQ(out, "Siltala's previous season in the league was 2006-07");
  ASSERT_EQ(trace.repairs.size(), 1u);
}

TEST(Chain, CleanHypothesisIsIdentityAfterDeBpe) {
  TruecaseModel tc;
  const std::string src = "chanzo 1999";
  const std::string hyp = "The source says 1999 .";
  EXPECT_EQ(postprocess_chain(src, hyp, tc), "The source says 1999.");
}

TEST(Chain, DeterministicOverFixture) {
  TruecaseModel tc;
  tc.table["the"] = {"the", 10};
  Rng rng(7);
  for (int i = 0; i < 5000; ++i) {
    std::string src = "chanzo " + std::to_string(1900 + rng.below(120)) + "-" +
                      std::to_string(rng.below(100));
    std::string hyp = "the year was " + std::to_string(1900 + rng.below(120)) +
                      " at " + std::to_string(rng.below(100));
    const std::string a = postprocess_chain(src, hyp, tc);
    const std::string b = postprocess_chain(src, hyp, tc);
    ASSERT_EQ(a, b);
  }
}

}  // namespace
