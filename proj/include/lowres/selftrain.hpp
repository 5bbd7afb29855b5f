#pragma once

#include <cstdio>
#include <cstdlib>
#include <memory>

#include <unistd.h>

#include <json.hpp>

#include "lowres/align.hpp"
#include "lowres/augment.hpp"
#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// Pluggable translators. A teacher consumes a batch of sentences and must
// return exactly one translation per input, in order.
// ---------------------------------------------------------------------------

enum class TeacherDirection { src_to_tgt, tgt_to_src };

inline std::string direction_name(TeacherDirection d) {
  return d == TeacherDirection::src_to_tgt ? "src->tgt" : "tgt->src";
}

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::vector<std::string> translate(
      const std::vector<std::string>& batch) = 0;
  virtual std::string describe() const = 0;
};

class IdentityTranslator : public Translator {
 public:
  std::vector<std::string> translate(
      const std::vector<std::string>& batch) override {
    return batch;
  }
  std::string describe() const override { return "identity"; }
};

// Token-wise argmax lookup in a trained lexical table; out-of-vocabulary
// tokens pass through unchanged. Deterministic, the toolkit's toy teacher.
class DictionaryTranslator : public Translator {
 public:
  explicit DictionaryTranslator(LexicalTable table, std::string name = "dict")
      : table_(std::move(table)), name_(std::move(name)) {}

  std::vector<std::string> translate(
      const std::vector<std::string>& batch) override {
    std::vector<std::string> out;
    out.reserve(batch.size());
    for (const auto& line : batch) {
      std::vector<std::string> toks = split_ws(line);
      for (auto& t : toks)
        if (auto best = table_.argmax(t)) t = *best;
      out.push_back(join(toks));
    }
    return out;
  }
  std::string describe() const override { return name_; }

  const LexicalTable& table() const { return table_; }

 private:
  LexicalTable table_;
  std::string name_;
};

// External command plug-in: sentences go to the command's standard input,
// one translation per line is expected on standard output (count-checked).
class CommandTranslator : public Translator {
 public:
  explicit CommandTranslator(std::string command)
      : command_(std::move(command)) {}

  std::vector<std::string> translate(
      const std::vector<std::string>& batch) override {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path();
    const std::string tag =
        std::to_string(std::uint64_t(::getpid())) + "." +
        std::to_string(counter_++);
    const std::string in_path = (dir / ("lowres.xlate." + tag + ".in")).string();
    const std::string out_path = (dir / ("lowres.xlate." + tag + ".out")).string();
    write_lines(in_path, batch);
    const std::string cmd = command_ + " < " + in_path + " > " + out_path;
    const int rc = std::system(cmd.c_str());
    if (rc != 0) fail("translator command failed (exit ", rc, "): ", command_);
    auto out = read_lines(out_path);
    fs::remove(in_path);
    fs::remove(out_path);
    if (out.size() != batch.size())
      fail("translator returned ", out.size(), " lines for ", batch.size(),
           " inputs: ", command_);
    return out;
  }
  std::string describe() const override { return "cmd:" + command_; }

 private:
  std::string command_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic data generation and round orchestration
// ---------------------------------------------------------------------------

// Pairs are always oriented src->tgt: a forward teacher's outputs become
// target sides, a backward teacher's outputs become source sides
// (back-translation).
inline Corpus generate_synthetic(Translator& t, const Corpus& mono,
                                 TeacherDirection dir) {
  require_mono(mono, "generate_synthetic");
  const auto translations = t.translate(mono.lines);
  if (translations.size() != mono.lines.size())
    fail("generate_synthetic: translator returned ", translations.size(),
         " lines for ", mono.lines.size(), " inputs");
  Corpus out;
  out.kind = CorpusKind::parallel;
  out.provenance = kProvSynthetic;
  out.pairs.reserve(mono.lines.size());
  for (std::size_t i = 0; i < mono.lines.size(); ++i) {
    if (dir == TeacherDirection::src_to_tgt)
      out.pairs.push_back({mono.lines[i], translations[i]});
    else
      out.pairs.push_back({translations[i], mono.lines[i]});
  }
  return out;
}

struct RoundPlan {
  int round = 1;               // 1 or 2
  std::size_t upsample_factor = 4;
};

struct RoundInputs {
  Corpus parallel;  // authentic parallel data (round 1 and 2)
  Corpus mono_src;  // round 1
  Corpus mono_tgt;  // round 1
  Corpus previous;  // round 2: the previous round's combined corpus
};

struct RoundResult {
  Corpus combined;
  nlohmann::json ledger;
};

// Round 1: synthetic data from all four sources (both parallel sides plus
// both mono corpora), then authentic data upsampled to match and
// concatenated. Round 2: target sides of the previous combined corpus are
// regenerated with the forward teacher ("refined"), concatenated with the
// previous data, and topped up with upsampled authentic data. The ledger
// records every intermediate count.
inline RoundResult run_round(const RoundPlan& plan, const RoundInputs& in,
                             Translator& fwd, Translator& bwd) {
  if (plan.upsample_factor < 1) fail("run_round: upsample factor must be >= 1");
  require_parallel(in.parallel, "run_round");
  RoundResult res;
  nlohmann::json rows = nlohmann::json::array();
  const auto row = [&rows](const std::string& name, std::size_t count) {
    rows.push_back({{"name", name}, {"count", count}});
  };

  if (plan.round == 1) {
    std::vector<std::string> src_side, tgt_side;
    for (const auto& p : in.parallel.pairs) {
      src_side.push_back(p.src);
      tgt_side.push_back(p.tgt);
    }
    require_mono(in.mono_src, "run_round: mono_src");
    require_mono(in.mono_tgt, "run_round: mono_tgt");

    const Corpus from_par_src = generate_synthetic(
        fwd, make_mono(std::move(src_side)), TeacherDirection::src_to_tgt);
    const Corpus from_par_tgt = generate_synthetic(
        bwd, make_mono(std::move(tgt_side)), TeacherDirection::tgt_to_src);
    const Corpus from_mono_src =
        generate_synthetic(fwd, in.mono_src, TeacherDirection::src_to_tgt);
    const Corpus from_mono_tgt =
        generate_synthetic(bwd, in.mono_tgt, TeacherDirection::tgt_to_src);

    Corpus synthetic = concat(concat(from_par_src, from_par_tgt),
                              concat(from_mono_src, from_mono_tgt));
    row("synthetic_from_parallel_src", from_par_src.size());
    row("synthetic_from_parallel_tgt", from_par_tgt.size());
    row("synthetic_from_mono_src", from_mono_src.size());
    row("synthetic_from_mono_tgt", from_mono_tgt.size());
    row("synthetic_parallel", synthetic.size());

    Corpus authentic = in.parallel;
    authentic.provenance |= kProvAuthentic;
    row("authentic_parallel", authentic.size());
    const Corpus upsampled = upsample(authentic, plan.upsample_factor);
    row("authentic_upsampled", upsampled.size());

    res.combined = concat(synthetic, upsampled);
    row("combined", res.combined.size());
  } else if (plan.round == 2) {
    require_parallel(in.previous, "run_round: previous");
    std::vector<std::string> prev_src;
    prev_src.reserve(in.previous.pairs.size());
    for (const auto& p : in.previous.pairs) prev_src.push_back(p.src);
    Corpus refined = generate_synthetic(fwd, make_mono(std::move(prev_src)),
                                        TeacherDirection::src_to_tgt);
    row("refined_parallel", refined.size());

    const Corpus merged = concat(in.previous, refined);
    row("concat_previous_refined", merged.size());

    Corpus authentic = in.parallel;
    authentic.provenance |= kProvAuthentic;
    const Corpus upsampled = upsample(authentic, plan.upsample_factor);
    row("authentic_upsampled", upsampled.size());

    res.combined = concat(merged, upsampled);
    row("combined", res.combined.size());
  } else {
    fail("run_round: round must be 1 or 2");
  }

  res.ledger = {{"round", plan.round},
                {"upsample_factor", plan.upsample_factor},
                {"forward_teacher", fwd.describe()},
                {"backward_teacher", bwd.describe()},
                {"rows", rows}};
  return res;
}

// Synthetic pairs built from actual validation/test source sentences; the
// result is meant to be appended to a fine-tuning schedule.
inline Corpus build_transductive(Translator& t, const Corpus& test_sources) {
  require_mono(test_sources, "build_transductive");
  if (test_sources.lines.empty())
    fail("build_transductive: empty source corpus");
  Corpus out =
      generate_synthetic(t, test_sources, TeacherDirection::src_to_tgt);
  out.provenance |= kProvTransductive;
  return out;
}

inline ScheduleStage transductive_schedule_stage(const std::string& dataset) {
  return {dataset, std::nullopt, "forward"};
}

// Parses a translator spec: "identity", "dict:<alignment model file>", or
// "cmd:<shell command>".
inline std::unique_ptr<Translator> make_translator(const std::string& spec) {
  if (spec == "identity") return std::make_unique<IdentityTranslator>();
  if (starts_with(spec, "dict:")) {
    const std::string path = spec.substr(5);
    return std::make_unique<DictionaryTranslator>(
        load_alignment_model(path).lexical, "dict:" + path);
  }
  if (starts_with(spec, "cmd:"))
    return std::make_unique<CommandTranslator>(spec.substr(4));
  fail("unknown translator spec: '", spec,
       "' (expected identity | dict:<model> | cmd:<command>)");
}

}  // namespace lowres
