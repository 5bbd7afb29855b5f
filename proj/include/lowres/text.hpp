#pragma once

#include <map>
#include <set>
#include <unordered_map>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// Tokenizer. Fixed rule list, self-contained and reversible over natural
// prose (the shipped fixture set is round-trip checked):
//   - split on whitespace, then split punctuation off word chars;
//   - runs of the same punctuation character form one token ("...", "!!");
//   - '-' and '\'' stay word-internal when both neighbors are letters
//     ("well-known", "don't"); a hyphen between digits is split ("2006-07"
//     -> "2006 - 07");
//   - bytes >= 0x80 count as letters, so multibyte UTF-8 never splits.
// Detokenization reverses this: sentence punctuation reattaches left,
// brackets right, double quotes alternate, and a single {-/.,:} separator
// between two digit runs reattaches both sides.
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_letter_byte(char c) {
  return is_ascii_alpha(c) || static_cast<unsigned char>(c) >= 0x80;
}
inline bool is_punct_byte(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u >= 0x21 && u <= 0x7E && !is_ascii_alpha(c) && !is_ascii_digit(c);
}

inline bool is_digit_run(std::string_view tok) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (!is_ascii_digit(c)) return false;
  return true;
}

}  // namespace detail

inline std::string tokenize(const std::string& sentence) {
  std::vector<std::string> out;
  for (const auto& chunk : split_ws(sentence)) {
    std::string word;
    std::size_t i = 0;
    const std::size_t n = chunk.size();
    while (i < n) {
      const char c = chunk[i];
      if (detail::is_punct_byte(c)) {
        const bool keep_internal =
            (c == '-' || c == '\'') && i > 0 && i + 1 < n &&
            detail::is_letter_byte(chunk[i - 1]) &&
            detail::is_letter_byte(chunk[i + 1]);
        if (keep_internal) {
          word += c;
          ++i;
          continue;
        }
        if (!word.empty()) {
          out.push_back(std::move(word));
          word.clear();
        }
        std::size_t j = i;
        while (j < n && chunk[j] == c) ++j;
        out.emplace_back(chunk.substr(i, j - i));
        i = j;
      } else {
        word += c;
        ++i;
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return join(out);
}

inline std::string detokenize(const std::string& sentence) {
  const auto toks = split_ws(sentence);
  static const std::set<std::string> attach_left = {
      ".", ",", "!", "?", ";", ":", "%", ")", "]", "}", "'"};
  static const std::set<char> kDigitSep = {'-', '/', '.', ',', ':'};

  std::string out;
  bool no_space_before_next = true;  // sentence start
  int dquote_parity = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    bool glue_left = no_space_before_next;
    no_space_before_next = false;

    if (t == "\"") {
      if (dquote_parity % 2 == 0) {
        no_space_before_next = true;  // opening quote
      } else {
        glue_left = true;  // closing quote
      }
      ++dquote_parity;
    } else if (t.size() == 1 && kDigitSep.count(t[0]) && i > 0 &&
               i + 1 < toks.size() && detail::is_digit_run(toks[i - 1]) &&
               detail::is_digit_run(toks[i + 1])) {
      glue_left = true;
      no_space_before_next = true;
    } else if (attach_left.count(t) ||
               (!t.empty() && (t[0] == '.' || t[0] == '!' || t[0] == '?') &&
                t.find_first_not_of(t[0]) == std::string::npos)) {
      glue_left = true;
    } else if (t == "(" || t == "[" || t == "{" || t == "$" || t == "#") {
      no_space_before_next = true;
    }

    if (!glue_left && !out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Reverses token order; the right-to-left scoring stand-in feeds on this.
inline std::string reverse_tokens(const std::string& sentence) {
  auto toks = split_ws(sentence);
  std::reverse(toks.begin(), toks.end());
  return join(toks);
}

// ---------------------------------------------------------------------------
// Truecasing. Case statistics are ASCII-only by contract (Swahili and
// English both fit); non-ASCII leading bytes pass through untouched.
// ---------------------------------------------------------------------------

inline std::string ascii_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return s;
}

struct TruecaseModel {
  // lowercased form -> (dominant surface form, count of that surface)
  std::map<std::string, std::pair<std::string, std::uint64_t>> table;

  bool empty() const { return table.empty(); }
};

// Counts surface forms at non-initial positions only; the sentence-initial
// token carries positional casing, not lexical casing.
inline TruecaseModel truecase_train(const Corpus& c) {
  require_mono(c, "truecase_train");
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& line : c.lines) {
    const auto toks = split_ws(line);
    for (std::size_t i = 1; i < toks.size(); ++i)
      ++counts[ascii_lower(toks[i])][toks[i]];
  }
  TruecaseModel m;
  for (const auto& [key, surfaces] : counts) {
    std::pair<std::string, std::uint64_t> best{"", 0};
    for (const auto& [surface, n] : surfaces)
      if (n > best.second || (n == best.second && surface < best.first))
        best = {surface, n};
    m.table[key] = best;
  }
  return m;
}

enum class TruecaseMode { apply, revert };

// apply: replace the sentence-initial token with its dominant casing when
// known. revert: uppercase the first character for final output.
inline std::string truecase(const std::string& sentence,
                            const TruecaseModel& model, TruecaseMode mode) {
  auto toks = split_ws(sentence);
  if (toks.empty()) return sentence;
  if (mode == TruecaseMode::apply) {
    if (model.empty()) return join(toks);  // pass-through, caller warns
    const auto it = model.table.find(ascii_lower(toks[0]));
    if (it != model.table.end()) toks[0] = it->second.first;
  } else {
    char& c = toks[0][0];
    if (c >= 'a' && c <= 'z') c += 'A' - 'a';
  }
  return join(toks);
}

inline void save_truecase(const TruecaseModel& m, const std::string& path) {
  std::string buf;
  for (const auto& [key, val] : m.table) {
    buf += key;
    buf += ' ';
    buf += val.first;
    buf += ' ';
    buf += std::to_string(val.second);
    buf += '\n';
  }
  write_file(path, buf);
}

inline TruecaseModel load_truecase(const std::string& path) {
  TruecaseModel m;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto f = split_ws(line);
    if (f.size() != 3) fail(path, ": bad truecase row: ", line);
    m.table[f[0]] = {f[1], parse_u64(f[2])};
  }
  return m;
}

// ---------------------------------------------------------------------------
// Byte-pair encoding. Merges operate on code points within whitespace
// tokens; end of word is implicit (the continuation marker sits on
// non-final pieces). Learning is greedy highest-frequency with a
// lexicographic tie break, so a given corpus and merge count always yield
// a byte-identical model file.
// ---------------------------------------------------------------------------

constexpr const char* kBpeMarker = "@@";
constexpr std::size_t kDefaultBpeMerges = 32000;

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string marker = kBpeMarker;
  std::size_t requested = 0;  // merge budget asked for at training time
  std::set<std::string> protected_tokens;  // never segmented, e.g. <BT>

  bool saturated() const { return merges.size() < requested; }

  std::map<std::pair<std::string, std::string>, std::size_t> ranks() const {
    std::map<std::pair<std::string, std::string>, std::size_t> r;
    for (std::size_t i = 0; i < merges.size(); ++i) r[merges[i]] = i;
    return r;
  }
};

namespace detail {

struct BpeWord {
  std::vector<std::string> symbols;
  std::uint64_t count = 0;
};

inline void count_pairs(const BpeWord& w,
                        std::map<std::pair<std::string, std::string>,
                                 std::int64_t>& pair_counts,
                        std::int64_t sign) {
  for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
    pair_counts[{w.symbols[i], w.symbols[i + 1]}] +=
        sign * static_cast<std::int64_t>(w.count);
}

inline void merge_in_place(std::vector<std::string>& symbols,
                           const std::pair<std::string, std::string>& pair) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  std::size_t i = 0;
  while (i < symbols.size()) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first &&
        symbols[i + 1] == pair.second) {
      out.push_back(pair.first + pair.second);
      i += 2;
    } else {
      out.push_back(symbols[i]);
      ++i;
    }
  }
  symbols = std::move(out);
}

}  // namespace detail

inline BpeModel learn_bpe(const Corpus& c, std::size_t n_merges,
                          const std::set<std::string>& protected_tokens = {}) {
  require_mono(c, "learn_bpe");
  if (n_merges == 0) fail("learn_bpe: merge count must be >= 1");
  if (c.lines.empty()) fail("learn_bpe: empty corpus");

  std::map<std::string, std::uint64_t> word_counts;
  for (const auto& line : c.lines)
    for (const auto& tok : split_ws(line))
      if (!protected_tokens.count(tok)) ++word_counts[tok];

  std::vector<detail::BpeWord> words;
  words.reserve(word_counts.size());
  for (const auto& [w, n] : word_counts)
    words.push_back({utf8_chars(w), n});

  std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>>
      pair_words;
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    detail::count_pairs(words[wi], pair_counts, +1);
    for (std::size_t i = 0; i + 1 < words[wi].symbols.size(); ++i)
      pair_words[{words[wi].symbols[i], words[wi].symbols[i + 1]}].push_back(wi);
  }

  BpeModel model;
  model.requested = n_merges;
  model.protected_tokens = protected_tokens;
  for (std::size_t step = 0; step < n_merges; ++step) {
    // Highest count; ties resolved lexicographically on the pair.
    std::pair<std::string, std::string> best;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best_count = count;
        best = pair;
      }
    }
    if (best_count <= 0) break;  // saturated: fewer merges than requested

    model.merges.push_back(best);
    auto touched = pair_words[best];  // copy: we mutate the index below
    for (std::size_t wi : touched) {
      auto& w = words[wi];
      bool contains = false;
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        if (w.symbols[i] == best.first && w.symbols[i + 1] == best.second) {
          contains = true;
          break;
        }
      if (!contains) continue;  // stale index entry
      detail::count_pairs(w, pair_counts, -1);
      detail::merge_in_place(w.symbols, best);
      detail::count_pairs(w, pair_counts, +1);
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        pair_words[{w.symbols[i], w.symbols[i + 1]}].push_back(wi);
    }
    pair_counts.erase(best);
    pair_words.erase(best);
  }
  return model;
}

inline std::string apply_bpe(const std::string& sentence, const BpeModel& m) {
  const auto ranks = m.ranks();
  std::vector<std::string> out;
  for (const auto& tok : split_ws(sentence)) {
    if (m.protected_tokens.count(tok)) {
      out.push_back(tok);
      continue;
    }
    auto symbols = utf8_chars(tok);
    while (symbols.size() > 1) {
      std::size_t best_rank = SIZE_MAX;
      std::pair<std::string, std::string> best;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        const auto it = ranks.find({symbols[i], symbols[i + 1]});
        if (it != ranks.end() && it->second < best_rank) {
          best_rank = it->second;
          best = it->first;
        }
      }
      if (best_rank == SIZE_MAX) break;
      detail::merge_in_place(symbols, best);
    }
    for (std::size_t i = 0; i < symbols.size(); ++i)
      out.push_back(i + 1 < symbols.size() ? symbols[i] + m.marker
                                           : symbols[i]);
  }
  return join(out);
}

inline std::string revert_bpe(const std::string& sentence,
                              const std::string& marker = kBpeMarker) {
  const std::string needle = marker + " ";
  std::string out = sentence;
  std::size_t pos = 0;
  while ((pos = out.find(needle, pos)) != std::string::npos)
    out.erase(pos, needle.size());
  return out;
}

inline void save_bpe(const BpeModel& m, const std::string& path) {
  std::string buf = "#bpe v1 merges=" + std::to_string(m.merges.size()) +
                    " marker=" + m.marker + "\n";
  for (const auto& [a, b] : m.merges) {
    buf += a;
    buf += ' ';
    buf += b;
    buf += '\n';
  }
  write_file(path, buf);
}

inline BpeModel load_bpe(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || !starts_with(lines[0], "#bpe v1 "))
    fail(path, ": not a v1 bpe model");
  BpeModel m;
  for (const auto& field : split_ws(lines[0].substr(8))) {
    if (starts_with(field, "marker=")) m.marker = field.substr(7);
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_ws(lines[i]);
    if (f.size() != 2) fail(path, ":", i + 1, ": bad merge row");
    m.merges.emplace_back(f[0], f[1]);
  }
  m.requested = m.merges.size();
  return m;
}

}  // namespace lowres
