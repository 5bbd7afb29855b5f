#pragma once

#include <map>
#include <set>

#include <json.hpp>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

namespace lowres {

// Reserved source-side tag for synthetic data; excluded from BPE merges
// and LM vocabularies.
constexpr const char* kBtTag = "<BT>";

// ---------------------------------------------------------------------------
// Noise injection: remove, replace, or nearby-swap a uniformly chosen word.
// Degenerate cases: swap on a single-token sentence or on an equal-token
// neighbor pair falls back to replace at the same position; remove on a
// single-token sentence leaves an empty sentence (the pair is kept).
// ---------------------------------------------------------------------------

enum class NoiseOp { remove, replace, swap_nearby };

inline std::string noise_op_name(NoiseOp op) {
  switch (op) {
    case NoiseOp::remove: return "remove";
    case NoiseOp::replace: return "replace";
    case NoiseOp::swap_nearby: return "swap_nearby";
  }
  return "?";
}

struct NoiseSpec {
  std::vector<NoiseOp> operations = {NoiseOp::remove, NoiseOp::replace,
                                     NoiseOp::swap_nearby};
  int edits_per_sentence = 1;
  std::vector<std::string> replacement_pool;  // sorted unique tokens
  std::uint64_t seed = 0;

  void validate() const {
    if (operations.empty()) fail("NoiseSpec: operations must be non-empty");
    if (edits_per_sentence < 1) fail("NoiseSpec: edits_per_sentence >= 1");
  }
};

struct NoiseReport {
  std::map<std::string, std::uint64_t> op_counts;
  std::vector<std::uint64_t> position_histogram;
  std::uint64_t seed = 0;

  void record(NoiseOp op, std::size_t pos) {
    ++op_counts[noise_op_name(op)];
    if (position_histogram.size() <= pos) position_histogram.resize(pos + 1);
    ++position_histogram[pos];
  }

  nlohmann::json to_json() const {
    return {{"op_counts", op_counts},
            {"positions", position_histogram},
            {"seed", seed}};
  }
};

// Sorted unique whitespace tokens of a mono corpus or of one parallel side.
inline std::vector<std::string> build_vocab(const std::vector<std::string>& lines) {
  std::set<std::string> vocab;
  for (const auto& l : lines)
    for (const auto& t : split_ws(l)) vocab.insert(t);
  return {vocab.begin(), vocab.end()};
}

// Draw order is fixed (operation, position, replacement) so a seed fully
// determines the outcome.
inline std::string apply_noise(const std::string& sentence,
                               const NoiseSpec& spec, Rng& rng,
                               NoiseReport* report = nullptr) {
  spec.validate();
  auto toks = split_ws(sentence);
  for (int edit = 0; edit < spec.edits_per_sentence; ++edit) {
    if (toks.empty()) break;
    NoiseOp op = spec.operations[rng.below(spec.operations.size())];
    const std::size_t pos = rng.below(toks.size());

    if (op == NoiseOp::swap_nearby) {
      const std::size_t other = pos + 1 < toks.size() ? pos + 1 : pos - 1;
      if (toks.size() == 1 || toks[pos] == toks[other]) {
        op = NoiseOp::replace;  // degenerate swap
      } else {
        std::swap(toks[pos], toks[other]);
        if (report) report->record(op, pos);
        continue;
      }
    }
    if (op == NoiseOp::remove) {
      toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(pos));
      if (report) report->record(op, pos);
      continue;
    }
    // replace: uniform over the pool, re-picked deterministically when the
    // draw equals the original token
    if (spec.replacement_pool.empty())
      fail("apply_noise: replace selected but replacement pool is empty");
    std::size_t ri = rng.below(spec.replacement_pool.size());
    for (std::size_t probe = 0;
         spec.replacement_pool[ri] == toks[pos] &&
         probe < spec.replacement_pool.size();
         ++probe)
      ri = (ri + 1) % spec.replacement_pool.size();
    toks[pos] = spec.replacement_pool[ri];
    if (report) report->record(NoiseOp::replace, pos);
  }
  return join(toks);
}

// ---------------------------------------------------------------------------
// Dataset builders
// ---------------------------------------------------------------------------

// Original pairs followed by the direction-swapped copy: 2N entries, both
// (x, y) and (y, x) present for every input pair.
inline Corpus build_bidirectional(const Corpus& b) {
  require_parallel(b, "build_bidirectional");
  return concat(b, swap_directions(b));
}

// {(noised(x), x)} for every source followed by {(noised(y), y)} for every
// target: 2N pairs mapping a corrupted sentence back to its clean form.
// Replacement pools are the corpus's own per-side vocabularies unless the
// spec supplies one. Per-sentence RNG streams are derived from
// (spec.seed, block index), so results are order-independent.
inline Corpus build_denoising(const Corpus& b, const NoiseSpec& spec,
                              NoiseReport* report = nullptr) {
  require_parallel(b, "build_denoising");
  spec.validate();
  if (report) report->seed = spec.seed;

  NoiseSpec src_spec = spec, tgt_spec = spec;
  if (spec.replacement_pool.empty()) {
    std::vector<std::string> src_lines, tgt_lines;
    src_lines.reserve(b.pairs.size());
    for (const auto& p : b.pairs) {
      src_lines.push_back(p.src);
      tgt_lines.push_back(p.tgt);
    }
    src_spec.replacement_pool = build_vocab(src_lines);
    tgt_spec.replacement_pool = build_vocab(tgt_lines);
  }

  Corpus out;
  out.kind = CorpusKind::parallel;
  out.provenance = b.provenance | kProvNoised;
  out.seed = spec.seed;
  out.pairs.reserve(2 * b.pairs.size());
  const std::size_t n = b.pairs.size();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    out.pairs.push_back({apply_noise(b.pairs[i].src, src_spec, rng, report),
                         b.pairs[i].src});
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, n + i));
    out.pairs.push_back({apply_noise(b.pairs[i].tgt, tgt_spec, rng, report),
                         b.pairs[i].tgt});
  }
  return out;
}

// Prepends the tag to every source. Only corpora flagged synthetic may be
// tagged; tagging authentic data is a pipeline bug.
inline Corpus tag_back_translation(const Corpus& c,
                                   const std::string& tag = kBtTag) {
  require_parallel(c, "tag_back_translation");
  if (!(c.provenance & kProvSynthetic))
    fail("tag_back_translation: corpus is not flagged synthetic");
  Corpus out = c;
  for (auto& p : out.pairs) p.src = tag + " " + p.src;
  out.provenance |= kProvTagged;
  return out;
}

// ---------------------------------------------------------------------------
// Training schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { BiPT, DPT, Combined };

inline ScheduleKind schedule_kind_from(const std::string& s) {
  if (s == "bipt" || s == "BiPT") return ScheduleKind::BiPT;
  if (s == "dpt" || s == "DPT") return ScheduleKind::DPT;
  if (s == "combined" || s == "Combined") return ScheduleKind::Combined;
  fail("unknown schedule kind: ", s);
}

struct ScheduleStage {
  std::string dataset;
  std::optional<std::uint64_t> steps;  // nullopt = open-ended
  std::string direction;
};

struct TrainingSchedule {
  std::vector<ScheduleStage> stages;
  std::optional<std::uint64_t> total_steps;
  bool open_ended = false;
};

struct ScheduleDatasets {
  std::string forward;        // required direction corpus
  std::string bidirectional;  // forward + swapped copy
  std::string denoising;      // source/target denoising pairs
};

// BiPT: a third of the steps on the bidirectional corpus, the remainder on
// the forward corpus. DPT: same split with the denoising corpus first.
// Combined: denoising, then bidirectional, then forward, all open-ended.
// Integer rounding: earlier stages round down, the last absorbs the
// remainder, so non-open step counts sum exactly to total_steps.
inline TrainingSchedule build_schedule(ScheduleKind kind,
                                       std::uint64_t total_steps,
                                       const ScheduleDatasets& ds) {
  const auto need = [](const std::string& ref, const char* what) {
    if (ref.empty()) fail("build_schedule: missing ", what, " dataset");
    return ref;
  };
  TrainingSchedule sched;
  if (kind == ScheduleKind::Combined) {
    sched.open_ended = true;
    sched.stages = {
        {need(ds.denoising, "denoising"), std::nullopt, "denoising"},
        {need(ds.bidirectional, "bidirectional"), std::nullopt, "bidirectional"},
        {need(ds.forward, "forward"), std::nullopt, "forward"},
    };
    return sched;
  }
  if (total_steps == 0) fail("build_schedule: total_steps must be positive");
  sched.total_steps = total_steps;
  const std::uint64_t first = total_steps / 3;
  const std::string& pre = kind == ScheduleKind::BiPT
                               ? need(ds.bidirectional, "bidirectional")
                               : need(ds.denoising, "denoising");
  sched.stages = {
      {pre, first, kind == ScheduleKind::BiPT ? "bidirectional" : "denoising"},
      {need(ds.forward, "forward"), total_steps - first, "forward"},
  };
  return sched;
}

inline nlohmann::json schedule_to_json(const TrainingSchedule& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& st : s.stages) {
    nlohmann::json e;
    e["dataset"] = st.dataset;
    if (st.steps)
      e["steps"] = *st.steps;
    else
      e["steps"] = "open";
    e["direction"] = st.direction;
    arr.push_back(e);
  }
  return arr;
}

inline TrainingSchedule schedule_from_json(const nlohmann::json& arr) {
  TrainingSchedule s;
  for (const auto& e : arr) {
    ScheduleStage st;
    st.dataset = e.at("dataset").get<std::string>();
    if (e.at("steps").is_string()) {
      st.steps = std::nullopt;
      s.open_ended = true;
    } else {
      st.steps = e.at("steps").get<std::uint64_t>();
    }
    st.direction = e.value("direction", "");
    s.stages.push_back(st);
  }
  return s;
}

inline void save_schedule(const TrainingSchedule& s, const std::string& path) {
  write_file(path, schedule_to_json(s).dump(2) + "\n");
}

inline TrainingSchedule load_schedule(const std::string& path) {
  return schedule_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace lowres
