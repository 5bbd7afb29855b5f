#include "lowres/selftrain.hpp"

#include <gtest/gtest.h>

#include "testutil.hpp"

using namespace lowres;
using testutil::TempDir;

namespace {

std::size_t ledger_count(const nlohmann::json& ledger, const std::string& name) {
  for (const auto& row : ledger.at("rows"))
    if (row.at("name") == name) return row.at("count").get<std::size_t>();
  throw std::runtime_error("no ledger row " + name);
}

TEST(Translator, IdentityPairs) {
  IdentityTranslator t;
  const Corpus out = generate_synthetic(t, make_mono({"a", "b"}),
                                        TeacherDirection::src_to_tgt);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.pairs[0], (SentencePair{"a", "a"}));
  EXPECT_EQ(out.pairs[1], (SentencePair{"b", "b"}));
  EXPECT_TRUE(out.provenance & kProvSynthetic);
  EXPECT_FALSE(out.provenance & kProvAuthentic);
}

TEST(Translator, BackwardTeacherFillsSourceSide) {
  IdentityTranslator t;
  const Corpus out = generate_synthetic(t, make_mono({"tgt sentence"}),
                                        TeacherDirection::tgt_to_src);
  EXPECT_EQ(out.pairs[0].tgt, "tgt sentence");
}

TEST(Translator, DictionaryMatchesLexicalArgmax) {
  const Corpus parallel = testutil::toy_parallel(400, 30, 3);
  const auto model = train_ibm(parallel, 1, 5);
  DictionaryTranslator dict(model.lexical);
  const auto out = dict.translate({"sw1 sw2 oov_token", ""});
  ASSERT_EQ(out.size(), 2u);
  const auto toks = split_ws(out[0]);
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[0], *model.lexical.argmax("sw1"));
  EXPECT_EQ(toks[1], *model.lexical.argmax("sw2"));
  EXPECT_EQ(toks[2], "oov_token");  // OOV passes through
  EXPECT_EQ(out[1], "");
}

TEST(Translator, CommandCountChecked) {
  CommandTranslator ok("cat");
  const auto out = ok.translate({"one", "two"});
  EXPECT_EQ(out, (std::vector<std::string>{"one", "two"}));

  CommandTranslator bad("head -n 1");
  EXPECT_THROW(bad.translate({"one", "two"}), Error);
}

TEST(Translator, SpecParsing) {
  EXPECT_NE(dynamic_cast<IdentityTranslator*>(make_translator("identity").get()),
            nullptr);
  EXPECT_NE(dynamic_cast<CommandTranslator*>(make_translator("cmd:cat").get()),
            nullptr);
  EXPECT_THROW(make_translator("nonsense"), Error);
}

TEST(Round, Round1LedgerArithmetic) {
  // 1/100 of the full-scale plan: parallel 24,000, mono 4,000 + 44,000
  RoundInputs in;
  in.parallel = testutil::toy_parallel(24000, 200, 5, 3, 6);
  in.mono_src = testutil::toy_mono(4000, 200, 6, true, 3, 6);
  in.mono_tgt = testutil::toy_mono(44000, 200, 7, false, 3, 6);
  IdentityTranslator fwd, bwd;
  const RoundPlan plan{1, 4};
  const auto res = run_round(plan, in, fwd, bwd);

  EXPECT_EQ(ledger_count(res.ledger, "synthetic_parallel"), 96000u);
  EXPECT_EQ(ledger_count(res.ledger, "authentic_parallel"), 24000u);
  EXPECT_EQ(ledger_count(res.ledger, "authentic_upsampled"), 96000u);
  EXPECT_EQ(ledger_count(res.ledger, "combined"), 192000u);
  EXPECT_EQ(res.combined.size(), 192000u);
}

TEST(Round, Round2LedgerArithmetic) {
  RoundInputs in;
  in.parallel = testutil::toy_parallel(24000, 200, 5, 3, 6);
  in.previous = testutil::toy_parallel(192000, 200, 8, 3, 6);
  IdentityTranslator fwd, bwd;
  const RoundPlan plan{2, 5};
  const auto res = run_round(plan, in, fwd, bwd);

  EXPECT_EQ(ledger_count(res.ledger, "refined_parallel"), 192000u);
  EXPECT_EQ(ledger_count(res.ledger, "concat_previous_refined"), 384000u);
  EXPECT_EQ(ledger_count(res.ledger, "authentic_upsampled"), 120000u);
  EXPECT_EQ(ledger_count(res.ledger, "combined"), 504000u);
}

TEST(Round, FullScaleRecurrence) {
  // The full-scale ledger follows the same arithmetic the round code
  // implements: synthetic 9.6M; combined 19.2M; refined 19.2M; 38.4M;
  // 12.0M; 50.4M.
  const std::size_t parallel = 2'400'000, mono_src = 400'000,
                    mono_tgt = 4'400'000;
  const std::size_t synthetic = 2 * parallel + mono_src + mono_tgt;
  EXPECT_EQ(synthetic, 9'600'000u);
  const std::size_t combined1 = synthetic + 4 * parallel;
  EXPECT_EQ(combined1, 19'200'000u);
  const std::size_t refined = combined1;
  EXPECT_EQ(refined + combined1, 38'400'000u);
  EXPECT_EQ(5 * parallel, 12'000'000u);
  EXPECT_EQ(refined + combined1 + 5 * parallel, 50'400'000u);
}

TEST(Round, SyntheticNeverFlaggedAuthentic) {
  RoundInputs in;
  in.parallel = testutil::toy_parallel(100, 20, 5);
  in.mono_src = testutil::toy_mono(10, 20, 6, true);
  in.mono_tgt = testutil::toy_mono(10, 20, 7, false);
  IdentityTranslator fwd, bwd;
  const auto res = run_round({1, 4}, in, fwd, bwd);
  // combined = synthetic block then authentic block; the synthetic prefix
  // must be taggable, i.e. flagged synthetic
  Corpus synthetic_part;
  synthetic_part.kind = CorpusKind::parallel;
  synthetic_part.provenance = kProvSynthetic;
  synthetic_part.pairs.assign(res.combined.pairs.begin(),
                              res.combined.pairs.begin() + 220);
  EXPECT_NO_THROW(tag_back_translation(synthetic_part));
}

TEST(Round, DeterministicRerun) {
  RoundInputs in;
  in.parallel = testutil::toy_parallel(500, 40, 5);
  in.mono_src = testutil::toy_mono(100, 40, 6, true);
  in.mono_tgt = testutil::toy_mono(100, 40, 7, false);
  const auto model = train_ibm(in.parallel, 1, 3);
  const auto back = train_ibm(swap_directions(in.parallel), 1, 3);
  DictionaryTranslator fwd(model.lexical), bwd(back.lexical);
  const auto a = run_round({1, 4}, in, fwd, bwd);
  const auto b = run_round({1, 4}, in, fwd, bwd);
  EXPECT_EQ(a.combined.pairs, b.combined.pairs);
}

TEST(Round, Errors) {
  RoundInputs in;
  in.parallel = testutil::toy_parallel(10, 5, 1);
  IdentityTranslator t;
  EXPECT_THROW(run_round({3, 4}, in, t, t), Error);
  EXPECT_THROW(run_round({1, 0}, in, t, t), Error);
}

TEST(Transductive, PairsAndFlag) {
  IdentityTranslator t;
  const Corpus sources = testutil::toy_mono(5000, 50, 9, true);
  const Corpus out = build_transductive(t, sources);
  EXPECT_EQ(out.size(), 5000u);
  EXPECT_TRUE(out.provenance & kProvTransductive);
  EXPECT_TRUE(out.provenance & kProvSynthetic);
  for (std::size_t i = 0; i < 50; ++i)
    EXPECT_EQ(out.pairs[i], (SentencePair{sources.lines[i], sources.lines[i]}));
  EXPECT_THROW(build_transductive(t, make_mono({})), Error);
}

TEST(Transductive, ScheduleEntryIsOpenEnded) {
  const auto stage = transductive_schedule_stage("trans.tsv");
  EXPECT_EQ(stage.dataset, "trans.tsv");
  EXPECT_FALSE(stage.steps.has_value());
  EXPECT_EQ(stage.direction, "forward");
}

}  // namespace
