#include "lowres/align.hpp"

#include <gtest/gtest.h>

#include "testutil.hpp"

using namespace lowres;
using testutil::TempDir;

namespace {

Corpus toy_de_en() {
  return make_parallel({{"das haus", "the house"}, {"das buch", "the book"}});
}

TEST(Align, ZeroIterationsGivesUniformTable) {
  const auto m = train_ibm(toy_de_en(), 1, 0);
  // "das" co-occurs with {the, house, book}
  EXPECT_NEAR(m.lexical.prob_tokens("das", "the"), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.lexical.prob_tokens("das", "house"), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.lexical.prob_tokens("haus", "the"), 0.5, 1e-12);
}

TEST(Align, ToyCorpusConvergesToHandRunEm) {
  const auto m = train_ibm(toy_de_en(), 1, 5);
  EXPECT_EQ(*m.lexical.argmax("das"), "the");
  EXPECT_EQ(*m.lexical.argmax("haus"), "house");
  EXPECT_EQ(*m.lexical.argmax("buch"), "book");
  // hand-run EM after 5 iterations
  EXPECT_NEAR(m.lexical.prob_tokens("das", "the"), 0.755608028, 1e-8);
  EXPECT_NEAR(m.lexical.prob_tokens("das", "house"), 0.122195986, 1e-8);
}

TEST(Align, LexicalRowsNormalizeEveryIteration) {
  for (int iters : {1, 3, 7}) {
    const auto m = train_ibm(testutil::toy_parallel(200, 30, 3), 1, iters);
    for (std::size_t s = 0; s < m.lexical.t.size(); ++s) {
      if (m.lexical.t[s].empty()) continue;
      double sum = 0.0;
      for (const auto& [ty, p] : m.lexical.t[s]) sum += p;
      ASSERT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Align, LogLikelihoodMonotoneOverTenIterations) {
  const auto corpus = testutil::toy_parallel(1000, 60, 13);
  const auto m1 = train_ibm(corpus, 1, 10);
  ASSERT_EQ(m1.training_loglik.size(), 10u);
  for (std::size_t i = 1; i < m1.training_loglik.size(); ++i)
    EXPECT_GE(m1.training_loglik[i], m1.training_loglik[i - 1] - 1e-9);

  const auto m2 = train_ibm(corpus, 2, 5);
  ASSERT_EQ(m2.training_loglik.size(), 10u);  // 5 model-1 + 5 model-2
  for (std::size_t i = 6; i < m2.training_loglik.size(); ++i)
    EXPECT_GE(m2.training_loglik[i], m2.training_loglik[i - 1] - 1e-9);
}

TEST(Align, DistortionRowsNormalize) {
  const auto m = train_ibm(testutil::toy_parallel(300, 40, 5), 2, 3);
  ASSERT_FALSE(m.distortion.empty());
  for (const auto& [key, row] : m.distortion) {
    double sum = 0.0;
    for (const double v : row) sum += v;
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Align, ViterbiOnToyModel) {
  const auto m = train_ibm(toy_de_en(), 1, 5);
  const auto a = viterbi_align(m, {"das haus", "the house"});
  ASSERT_EQ(a.size(), 2u);
  // t(the|null) and t(the|das) tie exactly by symmetry; smallest source
  // index wins, which is NULL
  EXPECT_EQ(a[0], 0);
  EXPECT_EQ(a[1], 2);  // house -> haus
  EXPECT_EQ(pharaoh_line(a), "1-1");

  EXPECT_TRUE(viterbi_align(m, {"das haus", ""}).empty());

  const auto b = viterbi_align(m, {"das", "the house book novel"});
  for (const int i : b) {
    EXPECT_GE(i, 0);
    EXPECT_LE(i, 1);
  }
}

TEST(Align, ScorePairSeparatesTrainedFromCrossed) {
  const auto m = train_ibm(toy_de_en(), 1, 5);
  EXPECT_GT(score_pair(m, {"das haus", "the house"}),
            score_pair(m, {"das haus", "the book"}));
  EXPECT_DOUBLE_EQ(score_pair(m, {"das haus", ""}), 0.0);
  EXPECT_GT(score_pair(m, {"das haus", "the house"}),
            score_pair(m, {"das haus", "the zzz"}));
}

TEST(Align, ComplexityNearZeroOnDeterministicCorpus) {
  // bijective lexicon, equal lengths: every source token maps to exactly
  // one target token, so EM drives the Viterbi cross-entropy toward 0
  const auto corpus = testutil::toy_parallel(400, 25, 19);
  const auto m = train_ibm(corpus, 1, 10);
  EXPECT_LT(corpus_complexity(m, corpus), 0.2);
}

TEST(Align, DistilledBeatsNoisyComplexity) {
  const auto corpus = testutil::toy_parallel(500, 30, 23);
  // noisy variant: 20% of targets replaced by random other-vocab tokens
  Corpus noisy = corpus;
  Rng rng(99);
  for (auto& p : noisy.pairs) {
    auto toks = split_ws(p.tgt);
    for (auto& t : toks)
      if (rng.below(5) == 0)
        t = testutil::toy_tgt_word(100 + rng.below(50));
    p.tgt = join(toks);
  }
  const auto m_clean = train_ibm(corpus, 1, 7);
  const auto m_noisy = train_ibm(noisy, 1, 7);
  const double c_clean = corpus_complexity(m_clean, corpus);
  const double c_noisy = corpus_complexity(m_noisy, noisy);
  EXPECT_LT(c_clean, c_noisy);
  EXPECT_GE(c_noisy - c_clean, 0.1 * c_noisy);  // >=10% margin
}

TEST(Align, ModelFileRoundTrip) {
  TempDir dir;
  const auto corpus = testutil::toy_parallel(100, 20, 31);
  const auto m = train_ibm(corpus, 2, 3);
  save_alignment_model(m, dir.file("m"));
  const auto back = load_alignment_model(dir.file("m"));
  EXPECT_EQ(back.model_kind, 2);
  for (const auto& p : {SentencePair{"sw1 sw2", "en1 en2"},
                        SentencePair{"sw3", "en9 en3"}})
    EXPECT_NEAR(score_pair(m, p), score_pair(back, p), 1e-12);

  save_alignment_model(back, dir.file("m2"));
  EXPECT_EQ(read_file(dir.file("m")), read_file(dir.file("m2")));
}

TEST(Align, Errors) {
  EXPECT_THROW(train_ibm(make_parallel({}), 1, 5), Error);
  EXPECT_THROW(train_ibm(make_mono({"a"}), 1, 5), Error);
  EXPECT_THROW(train_ibm(toy_de_en(), 3, 5), Error);
  const auto m = train_ibm(toy_de_en(), 1, 1);
  EXPECT_THROW(corpus_complexity(m, make_parallel({})), Error);
}

}  // namespace
