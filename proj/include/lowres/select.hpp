#pragma once

#include <numeric>

#include <json.hpp>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"
#include "lowres/lm.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// In-domain selection: rule filters first, then Moore-Lewis cross-entropy
// difference ranking (optionally rank-summed over several LM pairs), then
// top-K. Lower score = more in-domain.
// ---------------------------------------------------------------------------

struct FilterSpec {
  double max_illegal_char_ratio = 0.0;
  std::size_t min_words = 1;
  std::size_t max_words = 250;

  void validate() const {
    if (min_words > max_words)
      fail("FilterSpec: min_words > max_words");
    if (max_illegal_char_ratio < 0.0 || max_illegal_char_ratio > 1.0)
      fail("FilterSpec: illegal char ratio outside [0,1]");
  }
};

// Illegal characters: control codes Cc except tab, surrogates / malformed
// UTF-8, private use planes, and U+FFFD. Ratio over code points.
inline double illegal_char_ratio(std::string_view s) {
  std::size_t illegal = 0, total = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const char32_t cp = utf8_decode(s, i);
    ++total;
    const bool bad =
        cp == kBadCodepoint || cp == 0xFFFD ||
        (cp < 0x20 && cp != 0x09) || (cp >= 0x7F && cp <= 0x9F) ||
        (cp >= 0xE000 && cp <= 0xF8FF) ||
        (cp >= 0xF0000 && cp <= 0xFFFFD) ||
        (cp >= 0x100000 && cp <= 0x10FFFD);
    if (bad) ++illegal;
  }
  return total == 0 ? 0.0 : double(illegal) / double(total);
}

struct FilterReport {
  std::uint64_t kept = 0;
  std::uint64_t removed_illegal_chars = 0;
  std::uint64_t removed_word_count = 0;

  nlohmann::json to_json() const {
    return {{"kept", kept},
            {"removed", {{"illegal_chars", removed_illegal_chars},
                         {"word_count", removed_word_count}}}};
  }
};

// Order-preserving; a sentence is charged to the first rule it fails
// (illegal characters before word count). Idempotent.
inline std::pair<Corpus, FilterReport> rule_filter(const Corpus& c,
                                                   const FilterSpec& spec) {
  require_mono(c, "rule_filter");
  spec.validate();
  Corpus out;
  out.kind = CorpusKind::mono;
  out.provenance = c.provenance;
  out.seed = c.seed;
  FilterReport report;
  for (const auto& line : c.lines) {
    if (illegal_char_ratio(line) > spec.max_illegal_char_ratio) {
      ++report.removed_illegal_chars;
      continue;
    }
    const std::size_t words = split_ws(line).size();
    if (words < spec.min_words || words > spec.max_words) {
      ++report.removed_word_count;
      continue;
    }
    out.lines.push_back(line);
    ++report.kept;
  }
  return {std::move(out), report};
}

// Per-word cross-entropy under the in-domain model minus the same under
// the general model, in nats. Models must share order and smoothing.
inline double moore_lewis_score(const std::string& sentence,
                                const NgramModel& lm_in,
                                const NgramModel& lm_gen) {
  if (!lm_in.config.compatible_with(lm_gen.config))
    fail("moore_lewis_score: model configs differ (order/smoothing)");
  return cross_entropy(lm_in, sentence) - cross_entropy(lm_gen, sentence);
}

struct ScoredSentence {
  std::string sentence;
  double ml_score = 0.0;
  std::size_t source_index = 0;
  std::vector<double> slot_scores;  // one per LM pair when several are used
};

struct LmSlot {
  const NgramModel* lm_in = nullptr;
  const NgramModel* lm_gen = nullptr;
};

// Scores every line against each slot. With one slot the combined key is
// the Moore-Lewis score itself; with several, slots combine by rank sum
// (weight-free).
inline std::vector<ScoredSentence> score_corpus(
    const Corpus& c, const std::vector<LmSlot>& slots, unsigned threads = 1) {
  require_mono(c, "score_corpus");
  if (slots.empty()) fail("score_corpus: need at least one LM slot");
  std::vector<ScoredSentence> scored(c.lines.size());
  parallel_for(c.lines.size(), threads, [&](std::size_t i) {
    scored[i].sentence = c.lines[i];
    scored[i].source_index = i;
    for (const auto& slot : slots)
      scored[i].slot_scores.push_back(
          moore_lewis_score(c.lines[i], *slot.lm_in, *slot.lm_gen));
    scored[i].ml_score = scored[i].slot_scores[0];
  });
  return scored;
}

// Ascending order of the combined key; ties break on original index, so
// output is deterministic regardless of thread count.
inline void rank_scored(std::vector<ScoredSentence>& scored) {
  if (scored.empty()) return;
  const std::size_t n_slots = scored[0].slot_scores.size();
  if (n_slots <= 1) {
    std::sort(scored.begin(), scored.end(),
              [](const ScoredSentence& a, const ScoredSentence& b) {
                if (a.ml_score != b.ml_score) return a.ml_score < b.ml_score;
                return a.source_index < b.source_index;
              });
    return;
  }
  std::vector<std::uint64_t> rank_sum(scored.size(), 0);
  std::vector<std::size_t> order(scored.size());
  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scored[a].slot_scores[slot] != scored[b].slot_scores[slot])
        return scored[a].slot_scores[slot] < scored[b].slot_scores[slot];
      return scored[a].source_index < scored[b].source_index;
    });
    for (std::size_t r = 0; r < order.size(); ++r) rank_sum[order[r]] += r;
  }
  std::vector<std::size_t> idx(scored.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (rank_sum[a] != rank_sum[b]) return rank_sum[a] < rank_sum[b];
    return scored[a].source_index < scored[b].source_index;
  });
  std::vector<ScoredSentence> out;
  out.reserve(scored.size());
  for (const std::size_t i : idx) out.push_back(std::move(scored[i]));
  scored = std::move(out);
}

inline Corpus select_topk(const Corpus& c, const NgramModel& lm_in,
                          const NgramModel& lm_gen, const FilterSpec& spec,
                          std::size_t k, unsigned threads = 1,
                          std::vector<ScoredSentence>* scored_out = nullptr) {
  auto [filtered, report] = rule_filter(c, spec);
  (void)report;
  if (k > filtered.size())
    fail("select_topk: k=", k, " exceeds filtered size; achievable maximum is ",
         filtered.size());
  auto scored = score_corpus(filtered, {{&lm_in, &lm_gen}}, threads);
  rank_scored(scored);
  Corpus out;
  out.kind = CorpusKind::mono;
  out.provenance = c.provenance;
  for (std::size_t i = 0; i < k; ++i) out.lines.push_back(scored[i].sentence);
  if (scored_out) *scored_out = std::move(scored);
  return out;
}

// Scored dump rows: `<ml_score>\t<rank>\t<sentence>`.
inline std::string scored_dump(const std::vector<ScoredSentence>& scored) {
  std::string buf;
  for (std::size_t r = 0; r < scored.size(); ++r) {
    buf += fmt_double(scored[r].ml_score);
    buf += '\t';
    buf += std::to_string(r);
    buf += '\t';
    buf += scored[r].sentence;
    buf += '\n';
  }
  return buf;
}

}  // namespace lowres
