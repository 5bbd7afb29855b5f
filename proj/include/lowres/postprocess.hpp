#pragma once

#include <json.hpp>

#include "lowres/common.hpp"
#include "lowres/text.hpp"

namespace lowres {

// Removes one leading "tag + space" occurrence; anything else passes
// through.
inline std::string strip_tag(const std::string& sentence,
                             const std::string& tag) {
  const std::string prefix = tag + " ";
  if (starts_with(sentence, prefix)) return sentence.substr(prefix.size());
  return sentence;
}

// ---------------------------------------------------------------------------
// Number-consistency repair. A number span is a maximal sequence of digit
// runs joined by single separators from {-, /, ., ,, :, space}. Hypothesis
// spans whose digit sequence is absent from the source get replaced by the
// most similar source span (normalized edit distance over concatenated
// digits, threshold 0.5, leftmost on ties). The one sanctioned multi-span
// rewrite: `<digits> <word> <digits>` collapsing onto a single source span
// whose digit runs match the concatenation ("2006 at 07" -> "2006-07").
// ---------------------------------------------------------------------------

struct NumberSpan {
  std::string surface;
  std::vector<std::string> runs;  // digit runs in order
  std::string digits;             // runs concatenated
  std::size_t begin = 0, end = 0; // character offsets [begin, end)
};

namespace postprocess_detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_separator(char c) {
  return c == '-' || c == '/' || c == '.' || c == ',' || c == ':' || c == ' ';
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double digit_similarity(std::string_view a, std::string_view b) {
  const std::size_t m = std::max(a.size(), b.size());
  if (m == 0) return 1.0;
  return 1.0 - double(levenshtein(a, b)) / double(m);
}

}  // namespace postprocess_detail

inline std::vector<NumberSpan> extract_number_spans(const std::string& text) {
  using namespace postprocess_detail;
  std::vector<NumberSpan> spans;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    NumberSpan span;
    span.begin = i;
    while (true) {
      std::string run;
      while (i < n && is_digit(text[i])) run += text[i++];
      span.runs.push_back(run);
      span.digits += run;
      // extend across one separator if a digit follows
      if (i < n && is_separator(text[i]) && i + 1 < n && is_digit(text[i + 1]))
        ++i;
      else
        break;
    }
    span.end = i;
    span.surface = text.substr(span.begin, span.end - span.begin);
    spans.push_back(std::move(span));
  }
  return spans;
}

struct RepairRecord {
  std::uint64_t segment = 0;
  std::string original;
  std::string replacement;
  double similarity = 0.0;

  nlohmann::json to_json() const {
    return {{"segment", segment},
            {"original", original},
            {"replacement", replacement},
            {"similarity", similarity}};
  }
};

constexpr double kNumberSimilarityThreshold = 0.5;

inline std::string fix_numbers(const std::string& src_raw,
                               const std::string& hyp,
                               std::vector<RepairRecord>* log = nullptr,
                               std::uint64_t segment = 0) {
  using namespace postprocess_detail;
  const auto src_spans = extract_number_spans(src_raw);
  if (src_spans.empty()) return hyp;
  const auto hyp_spans = extract_number_spans(hyp);
  if (hyp_spans.empty()) return hyp;

  const auto exact_match = [&](const std::string& digits) {
    for (const auto& s : src_spans)
      if (s.digits == digits) return true;
    return false;
  };

  std::string out;
  std::size_t consumed = 0;  // chars of hyp already emitted
  const auto record = [&](const std::string& original,
                          const std::string& replacement, double sim) {
    if (log) log->push_back({segment, original, replacement, sim});
  };

  for (std::size_t si = 0; si < hyp_spans.size(); ++si) {
    const auto& span = hyp_spans[si];
    out += hyp.substr(consumed, span.begin - consumed);
    consumed = span.begin;

    if (exact_match(span.digits)) {
      out += span.surface;
      consumed = span.end;
      continue;
    }

    // `<digits> <word> <digits>` onto one source span: the inserted word
    // is dropped together with the split ("2006 at 07" and the de-BPE
    // leftover "2006 -07" both collapse onto "2006-07").
    if (si + 1 < hyp_spans.size()) {
      const auto& next = hyp_spans[si + 1];
      const std::string between =
          hyp.substr(span.end, next.begin - span.end);
      const auto btoks = split_ws(between);
      if (btoks.size() == 1) {
        const std::string joined = span.digits + next.digits;
        const NumberSpan* hit = nullptr;
        for (const auto& s : src_spans)
          if (s.digits == joined) {
            hit = &s;
            break;
          }
        if (hit) {
          record(hyp.substr(span.begin, next.end - span.begin), hit->surface,
                 1.0);
          out += hit->surface;
          consumed = next.end;
          ++si;  // the next span is consumed by this rewrite
          continue;
        }
      }
    }

    const NumberSpan* best = nullptr;
    double best_sim = -1.0;
    for (const auto& s : src_spans) {
      const double sim = digit_similarity(span.digits, s.digits);
      if (sim > best_sim) {  // strict: ties keep the leftmost source span
        best_sim = sim;
        best = &s;
      }
    }
    if (best && best_sim >= kNumberSimilarityThreshold) {
      record(span.surface, best->surface, best_sim);
      out += best->surface;
    } else {
      out += span.surface;
    }
    consumed = span.end;
  }
  out += hyp.substr(consumed);
  return out;
}

// ---------------------------------------------------------------------------
// Full chain: de-BPE -> de-truecase -> detokenize -> number repair.
// ---------------------------------------------------------------------------

struct ChainTrace {
  std::string after_debpe;
  std::string after_detruecase;
  std::string after_detokenize;
  std::string final;
  std::vector<RepairRecord> repairs;
};

inline std::string postprocess_chain(const std::string& src_raw,
                                     const std::string& hyp_bpe,
                                     const TruecaseModel& truecase_model,
                                     ChainTrace* trace = nullptr,
                                     std::uint64_t segment = 0) {
  const std::string debpe = revert_bpe(hyp_bpe);
  const std::string decased =
      truecase(debpe, truecase_model, TruecaseMode::revert);
  const std::string detok = detokenize(decased);
  std::vector<RepairRecord> repairs;
  const std::string fixed = fix_numbers(src_raw, detok, &repairs, segment);
  if (trace) {
    trace->after_debpe = debpe;
    trace->after_detruecase = decased;
    trace->after_detokenize = detok;
    trace->final = fixed;
    trace->repairs = std::move(repairs);
  }
  return fixed;
}

}  // namespace lowres
