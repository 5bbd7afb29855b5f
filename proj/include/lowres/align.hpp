#pragma once

#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// IBM Model 1/2 word alignment trained by EM. Direction is p(target |
// source) with a NULL word always present on the source side. Model 2 adds
// absolute-position distortion tables bucketed by length pair and capped
// at position/length 100; longer sentences reuse the cap bucket.
// ---------------------------------------------------------------------------

constexpr const char* kNullToken = "<null>";
constexpr double kLexFloor = 1e-12;  // unseen lexical pairs
constexpr int kDistortionCap = 100;

struct LexicalTable {
  using Id = std::uint32_t;
  // id 0 on the source side is the NULL word.
  std::vector<std::string> src_tokens, tgt_tokens;
  std::unordered_map<std::string, Id> src_ids, tgt_ids;
  // t[src][tgt] = p(tgt | src); rows sum to 1.
  std::vector<std::unordered_map<Id, double>> t;

  double prob(Id s, Id ty) const {
    const auto& row = t[s];
    const auto it = row.find(ty);
    return it == row.end() ? kLexFloor : it->second;
  }

  // p(tgt_token | src_token) with floor for anything unseen.
  double prob_tokens(const std::string& s, const std::string& ty) const {
    const auto si = src_ids.find(s);
    const auto ti = tgt_ids.find(ty);
    if (si == src_ids.end() || ti == tgt_ids.end()) return kLexFloor;
    return prob(si->second, ti->second);
  }

  // Highest-probability translation of a source token, if any; ties break
  // toward the lexicographically smallest target token.
  std::optional<std::string> argmax(const std::string& src_token) const {
    const auto si = src_ids.find(src_token);
    if (si == src_ids.end()) return std::nullopt;
    const auto& row = t[si->second];
    if (row.empty()) return std::nullopt;
    Id best = 0;
    double best_p = -1.0;
    for (const auto& [ty, p] : row) {
      if (p > best_p ||
          (p == best_p && tgt_tokens[ty] < tgt_tokens[best]))
        best = ty, best_p = p;
    }
    return tgt_tokens[best];
  }
};

struct AlignmentModel {
  int model_kind = 1;  // 1 or 2
  LexicalTable lexical;
  // key packs (tgt_pos, l_src, l_tgt) after capping; value is a row over
  // source positions 0..min(l_src,cap) (0 = NULL) summing to 1.
  std::unordered_map<std::uint64_t, std::vector<double>> distortion;
  std::vector<double> training_loglik;  // one entry per EM iteration

  static std::uint64_t bucket_key(int tgt_pos, int l_src, int l_tgt) {
    const auto cap = [](int v) {
      return std::uint64_t(std::min(v, kDistortionCap));
    };
    return (cap(tgt_pos) << 32) | (cap(l_src) << 16) | cap(l_tgt);
  }

  double distortion_prob(int src_pos, int tgt_pos, int l_src, int l_tgt) const {
    if (model_kind == 1)
      return 1.0 / static_cast<double>(l_src + 1);
    const auto it = distortion.find(bucket_key(tgt_pos, l_src, l_tgt));
    if (it == distortion.end()) return 1.0 / static_cast<double>(l_src + 1);
    return it->second[std::min(src_pos, kDistortionCap)];
  }
};

namespace align_detail {

struct IdPair {
  std::vector<LexicalTable::Id> src;  // without NULL; positions 1..l map here
  std::vector<LexicalTable::Id> tgt;
};

inline std::vector<IdPair> intern(const Corpus& c, LexicalTable& table) {
  std::map<std::string, std::uint64_t> src_seen, tgt_seen;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      toks;
  toks.reserve(c.pairs.size());
  for (const auto& p : c.pairs) {
    toks.emplace_back(split_ws(p.src), split_ws(p.tgt));
    for (const auto& s : toks.back().first) ++src_seen[s];
    for (const auto& t : toks.back().second) ++tgt_seen[t];
  }
  table.src_tokens = {kNullToken};
  for (const auto& [s, n] : src_seen) {
    (void)n;
    table.src_tokens.push_back(s);
  }
  for (LexicalTable::Id i = 0; i < table.src_tokens.size(); ++i)
    table.src_ids[table.src_tokens[i]] = i;
  for (const auto& [t, n] : tgt_seen) {
    (void)n;
    table.tgt_tokens.push_back(t);
  }
  for (LexicalTable::Id i = 0; i < table.tgt_tokens.size(); ++i)
    table.tgt_ids[table.tgt_tokens[i]] = i;

  std::vector<IdPair> out;
  out.reserve(toks.size());
  for (const auto& [ss, ts] : toks) {
    IdPair ip;
    for (const auto& s : ss) ip.src.push_back(table.src_ids.at(s));
    for (const auto& t : ts) ip.tgt.push_back(table.tgt_ids.at(t));
    out.push_back(std::move(ip));
  }
  return out;
}

// Uniform over co-occurring target types (NULL co-occurs with every
// target token of its sentence pairs).
inline void init_uniform(const std::vector<IdPair>& pairs,
                         LexicalTable& table) {
  std::vector<std::set<LexicalTable::Id>> cooc(table.src_tokens.size());
  for (const auto& p : pairs) {
    for (const auto t : p.tgt) {
      cooc[0].insert(t);
      for (const auto s : p.src) cooc[s].insert(t);
    }
  }
  table.t.assign(table.src_tokens.size(), {});
  for (std::size_t s = 0; s < cooc.size(); ++s) {
    if (cooc[s].empty()) continue;
    const double u = 1.0 / static_cast<double>(cooc[s].size());
    for (const auto t : cooc[s]) table.t[s][t] = u;
  }
}

}  // namespace align_detail

// EM training. Model 2 runs a full Model 1 pass first (same iteration
// count) to initialize its lexical table, then re-estimates lexical and
// distortion parameters jointly. training_loglik records the data
// log-likelihood at each iteration; it is non-decreasing per model phase.
inline AlignmentModel train_ibm(const Corpus& c, int model_kind,
                                int em_iterations) {
  using Id = LexicalTable::Id;
  require_parallel(c, "train_ibm");
  if (c.pairs.empty()) fail("train_ibm: empty corpus");
  if (model_kind != 1 && model_kind != 2)
    fail("train_ibm: model_kind must be 1 or 2");
  if (em_iterations < 0) fail("train_ibm: negative iteration count");

  AlignmentModel m;
  m.model_kind = model_kind;
  const auto pairs = align_detail::intern(c, m.lexical);
  align_detail::init_uniform(pairs, m.lexical);

  // Model 1 phase.
  for (int it = 0; it < em_iterations; ++it) {
    std::vector<std::unordered_map<Id, double>> cnt(m.lexical.t.size());
    double ll = 0.0;
    for (const auto& p : pairs) {
      const double align_p = 1.0 / static_cast<double>(p.src.size() + 1);
      for (const auto y : p.tgt) {
        double denom = m.lexical.prob(0, y);
        for (const auto s : p.src) denom += m.lexical.prob(s, y);
        ll += std::log(denom * align_p);
        cnt[0][y] += m.lexical.prob(0, y) / denom;
        for (const auto s : p.src) cnt[s][y] += m.lexical.prob(s, y) / denom;
      }
    }
    m.training_loglik.push_back(ll);
    for (std::size_t s = 0; s < cnt.size(); ++s) {
      double z = 0.0;
      for (const auto& [y, v] : cnt[s]) z += v;
      if (z <= 0.0) continue;
      for (auto& [y, v] : cnt[s]) v /= z;
      m.lexical.t[s] = std::move(cnt[s]);
    }
  }

  if (model_kind == 2) {
    // Uniform distortion init over the buckets that occur.
    m.distortion.clear();
    for (const auto& p : pairs) {
      const int ls = int(p.src.size()), lt = int(p.tgt.size());
      for (int j = 0; j < lt; ++j) {
        auto& row = m.distortion[AlignmentModel::bucket_key(j, ls, lt)];
        if (row.empty())
          row.assign(std::min(ls, kDistortionCap) + 1,
                     1.0 / double(std::min(ls, kDistortionCap) + 1));
      }
    }
    for (int it = 0; it < em_iterations; ++it) {
      std::vector<std::unordered_map<Id, double>> cnt(m.lexical.t.size());
      std::unordered_map<std::uint64_t, std::vector<double>> dcnt;
      double ll = 0.0;
      for (const auto& p : pairs) {
        const int ls = int(p.src.size()), lt = int(p.tgt.size());
        for (int j = 0; j < lt; ++j) {
          const Id y = p.tgt[j];
          double denom = 0.0;
          std::vector<double> post(ls + 1);
          for (int i = 0; i <= ls; ++i) {
            const Id s = i == 0 ? 0 : p.src[i - 1];
            post[i] = m.lexical.prob(s, y) * m.distortion_prob(i, j, ls, lt);
            denom += post[i];
          }
          ll += std::log(denom);
          auto& drow = dcnt[AlignmentModel::bucket_key(j, ls, lt)];
          if (drow.empty()) drow.assign(std::min(ls, kDistortionCap) + 1, 0.0);
          for (int i = 0; i <= ls; ++i) {
            const Id s = i == 0 ? 0 : p.src[i - 1];
            const double g = post[i] / denom;
            cnt[s][y] += g;
            drow[std::min(i, kDistortionCap)] += g;
          }
        }
      }
      m.training_loglik.push_back(ll);
      for (std::size_t s = 0; s < cnt.size(); ++s) {
        double z = 0.0;
        for (const auto& [y, v] : cnt[s]) z += v;
        if (z <= 0.0) continue;
        for (auto& [y, v] : cnt[s]) v /= z;
        m.lexical.t[s] = std::move(cnt[s]);
      }
      for (auto& [key, row] : dcnt) {
        double z = 0.0;
        for (const double v : row) z += v;
        if (z <= 0.0) continue;
        for (double& v : row) v /= z;
        m.distortion[key] = std::move(row);
      }
    }
  }
  return m;
}

// Per-target-position argmax of t(y|x) * distortion; 0 = NULL, otherwise
// 1-based source position. Ties go to the smallest source index.
inline std::vector<int> viterbi_align(const AlignmentModel& m,
                                      const SentencePair& p) {
  const auto src = split_ws(p.src);
  const auto tgt = split_ws(p.tgt);
  const int ls = int(src.size()), lt = int(tgt.size());
  std::vector<int> out(tgt.size());
  for (int j = 0; j < lt; ++j) {
    int best = 0;
    double best_p = -1.0;
    for (int i = 0; i <= ls; ++i) {
      const double lex =
          m.lexical.prob_tokens(i == 0 ? kNullToken : src[i - 1], tgt[j]);
      const double sc = lex * m.distortion_prob(i, j, ls, lt);
      if (sc > best_p) {
        best_p = sc;
        best = i;
      }
    }
    out[j] = best;
  }
  return out;
}

inline std::string pharaoh_line(const std::vector<int>& alignment) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < alignment.size(); ++j)
    if (alignment[j] > 0)
      out.push_back(std::to_string(alignment[j] - 1) + "-" + std::to_string(j));
  return join(out);
}

// Length-normalized sum-over-alignments log p(target | source); empty
// target scores 0 by the empty-product convention.
inline double score_pair(const AlignmentModel& m, const SentencePair& p) {
  const auto src = split_ws(p.src);
  const auto tgt = split_ws(p.tgt);
  if (tgt.empty()) return 0.0;
  const int ls = int(src.size()), lt = int(tgt.size());
  double total = 0.0;
  for (int j = 0; j < lt; ++j) {
    double s = 0.0;
    for (int i = 0; i <= ls; ++i) {
      const double lex =
          m.lexical.prob_tokens(i == 0 ? kNullToken : src[i - 1], tgt[j]);
      s += lex * m.distortion_prob(i, j, ls, lt);
    }
    total += std::log(std::max(s, kLexFloor));
  }
  return total / static_cast<double>(lt);
}

// Mean negative log2 lexical probability of target tokens under the
// Viterbi alignment; lower means the target is more predictable from the
// source. This is the toolkit's data-complexity measure.
inline double corpus_complexity(const AlignmentModel& m, const Corpus& c) {
  require_parallel(c, "corpus_complexity");
  if (c.pairs.empty()) fail("corpus_complexity: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& p : c.pairs) {
    const auto src = split_ws(p.src);
    const auto tgt = split_ws(p.tgt);
    const auto a = viterbi_align(m, p);
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      const std::string& s = a[j] == 0 ? kNullToken : src[a[j] - 1];
      total -= std::log2(std::max(m.lexical.prob_tokens(s, tgt[j]), kLexFloor));
    }
    tokens += tgt.size();
  }
  if (tokens == 0) fail("corpus_complexity: no target tokens");
  return total / static_cast<double>(tokens);
}

// ---------------------------------------------------------------------------
// Serialization: sorted `<src> <tgt> <prob>` lexical rows plus distortion
// rows for Model 2.
// ---------------------------------------------------------------------------

inline void save_alignment_model(const AlignmentModel& m,
                                 const std::string& path) {
  std::string buf = "#align v1 kind=" + std::to_string(m.model_kind) +
                    " cap=" + std::to_string(kDistortionCap) + "\n";
  std::map<std::pair<std::string, std::string>, double> rows;
  for (std::size_t s = 0; s < m.lexical.t.size(); ++s)
    for (const auto& [ty, p] : m.lexical.t[s])
      rows[{m.lexical.src_tokens[s], m.lexical.tgt_tokens[ty]}] = p;
  buf += "#lexical " + std::to_string(rows.size()) + "\n";
  for (const auto& [key, p] : rows)
    buf += key.first + " " + key.second + " " + fmt_double(p) + "\n";

  std::map<std::uint64_t, const std::vector<double>*> drows;
  for (const auto& [key, row] : m.distortion) drows[key] = &row;
  buf += "#distortion " + std::to_string(drows.size()) + "\n";
  for (const auto& [key, row] : drows) {
    buf += std::to_string(key >> 32) + " " +
           std::to_string((key >> 16) & 0xFFFF) + " " +
           std::to_string(key & 0xFFFF);
    for (const double v : *row) buf += " " + fmt_double(v);
    buf += "\n";
  }
  write_file(path, buf);
}

inline AlignmentModel load_alignment_model(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || !starts_with(lines[0], "#align v1 "))
    fail(path, ": not a v1 alignment model");
  AlignmentModel m;
  for (const auto& field : split_ws(lines[0].substr(10)))
    if (starts_with(field, "kind=")) m.model_kind = int(parse_u64(field.substr(5)));

  std::size_t i = 1;
  if (i >= lines.size() || !starts_with(lines[i], "#lexical "))
    fail(path, ": missing lexical section");
  const std::size_t lex_rows = parse_u64(lines[i].substr(9));
  ++i;
  std::map<std::string, std::map<std::string, double>> by_src;
  for (std::size_t r = 0; r < lex_rows; ++r, ++i) {
    const auto f = split_ws(lines.at(i));
    if (f.size() != 3) fail(path, ":", i + 1, ": bad lexical row");
    by_src[f[0]][f[1]] = parse_double(f[2]);
  }
  auto& lex = m.lexical;
  lex.src_tokens = {kNullToken};
  for (const auto& [s, row] : by_src)
    if (s != kNullToken) lex.src_tokens.push_back(s);
  for (LexicalTable::Id id = 0; id < lex.src_tokens.size(); ++id)
    lex.src_ids[lex.src_tokens[id]] = id;
  std::set<std::string> tgts;
  for (const auto& [s, row] : by_src)
    for (const auto& [t, p] : row) tgts.insert(t);
  for (const auto& t : tgts) {
    lex.tgt_ids[t] = LexicalTable::Id(lex.tgt_tokens.size());
    lex.tgt_tokens.push_back(t);
  }
  lex.t.assign(lex.src_tokens.size(), {});
  for (const auto& [s, row] : by_src) {
    const auto sid = lex.src_ids.at(s);
    for (const auto& [t, p] : row) lex.t[sid][lex.tgt_ids.at(t)] = p;
  }

  if (i < lines.size() && starts_with(lines[i], "#distortion ")) {
    const std::size_t rows = parse_u64(lines[i].substr(12));
    ++i;
    for (std::size_t r = 0; r < rows; ++r, ++i) {
      const auto f = split_ws(lines.at(i));
      if (f.size() < 4) fail(path, ":", i + 1, ": bad distortion row");
      const auto key = AlignmentModel::bucket_key(
          int(parse_u64(f[0])), int(parse_u64(f[1])), int(parse_u64(f[2])));
      std::vector<double> row;
      for (std::size_t x = 3; x < f.size(); ++x)
        row.push_back(parse_double(f[x]));
      m.distortion[key] = std::move(row);
    }
  }
  return m;
}

}  // namespace lowres
