#pragma once

#include <cmath>
#include <cstring>
#include <set>
#include <map>
#include <span>
#include <unordered_map>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// Token n-gram language model with interpolated Kneser-Ney or additive
// smoothing. Natural-log convention throughout. The closed vocabulary is
// the training vocabulary plus <unk> and </s>; <s> only ever appears in
// contexts. For every observed context the conditional distribution over
// that closed vocabulary sums to one (the unit tests sample contexts and
// check this to 1e-9).
// ---------------------------------------------------------------------------

enum class Smoothing { add_k, kneser_ney };

inline std::string smoothing_name(Smoothing s) {
  return s == Smoothing::add_k ? "add_k" : "kneser_ney";
}

struct NgramConfig {
  int order = 5;
  Smoothing smoothing = Smoothing::kneser_ney;
  double discount = 0.75;        // Kneser-Ney
  double k = 1.0;                // additive constant for add_k
  std::uint64_t unk_threshold = 1;  // tokens with count <= this become <unk>
  std::set<std::string> excluded_tokens;  // forced to <unk>, e.g. <BT>

  bool compatible_with(const NgramConfig& o) const {
    return order == o.order && smoothing == o.smoothing &&
           discount == o.discount && k == o.k;
  }
};

namespace ngram_detail {

using Id = std::uint32_t;
constexpr Id kUnk = 0, kBos = 1, kEos = 2;

inline void key_push(std::string& key, Id id) {
  key.append(reinterpret_cast<const char*>(&id), sizeof(Id));
}

inline std::string make_key(std::span<const Id> ids) {
  std::string key;
  key.reserve(ids.size() * sizeof(Id));
  for (Id id : ids) key_push(key, id);
  return key;
}

inline std::vector<Id> key_ids(std::string_view key) {
  std::vector<Id> ids(key.size() / sizeof(Id));
  std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

}  // namespace ngram_detail

class NgramModel {
 public:
  using Id = ngram_detail::Id;

  NgramConfig config;
  std::vector<std::string> id_to_token;              // id order
  std::unordered_map<std::string, Id> token_to_id;
  // counts[k]: raw k-gram counts over <s>-padded, <unk>-mapped sentences,
  // one </s> per sentence. Index 0 unused.
  std::vector<std::unordered_map<std::string, std::uint64_t>> counts;

  // Number of predictable types: vocab minus <s>.
  std::size_t vocab_size() const { return id_to_token.size() - 1; }

  Id lookup(const std::string& token) const {
    const auto it = token_to_id.find(token);
    return it == token_to_id.end() ? ngram_detail::kUnk : it->second;
  }

  // Rebuilds the derived tables from raw counts (after training or load).
  void finalize() {
    const int n = config.order;
    ctx_total_.assign(n + 1, {});
    ctx_distinct_.assign(n + 1, {});
    cont_.assign(n + 1, {});
    cont_ctx_total_.assign(n + 1, {});
    cont_ctx_distinct_.assign(n + 1, {});

    for (int k = 1; k <= n; ++k) {
      for (const auto& [key, c] : counts[k]) {
        const std::string ctx(key.data(), key.size() - sizeof(Id));
        ctx_total_[k][ctx] += c;
        ctx_distinct_[k][ctx] += 1;
      }
    }
    // Continuation counts: for k < n, cont_[k][g] = |{v : c(v g) > 0}|.
    for (int k = 1; k < n; ++k) {
      for (const auto& [key, c] : counts[k + 1]) {
        (void)c;
        const std::string suffix(key.data() + sizeof(Id),
                                 key.size() - sizeof(Id));
        cont_[k][suffix] += 1;
      }
      for (const auto& [key, cc] : cont_[k]) {
        const std::string ctx(key.data(), key.size() - sizeof(Id));
        cont_ctx_total_[k][ctx] += cc;
        cont_ctx_distinct_[k][ctx] += 1;
      }
    }
    unigram_total_ = 0;
    for (const auto& [key, c] : counts[1]) {
      (void)key;
      unigram_total_ += c;
    }
  }

  // p(w | context), context length <= order-1, most recent token last.
  double prob(std::span<const Id> context, Id w) const {
    const int k = static_cast<int>(context.size()) + 1;
    if (k > config.order)
      return prob(context.subspan(context.size() - (config.order - 1)), w);
    return config.smoothing == Smoothing::kneser_ney ? prob_kn(context, w, k)
                                                     : prob_addk(context, w, k);
  }

  double logprob_ids(const std::vector<Id>& tokens) const {
    using namespace ngram_detail;
    const int n = config.order;
    std::vector<Id> seq(n - 1, kBos);
    seq.insert(seq.end(), tokens.begin(), tokens.end());
    seq.push_back(kEos);
    double total = 0.0;
    for (std::size_t t = n - 1; t < seq.size(); ++t) {
      const std::span<const Id> ctx(seq.data() + t - (n - 1),
                                    static_cast<std::size_t>(n - 1));
      total += std::log(prob(ctx, seq[t]));
    }
    return total;
  }

  std::vector<Id> map_tokens(const std::vector<std::string>& toks) const {
    std::vector<Id> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(lookup(t));
    return ids;
  }

 private:
  double prob_addk(std::span<const Id> context, Id w, int k) const {
    using namespace ngram_detail;
    const double add = config.k;
    const double v = static_cast<double>(vocab_size());
    if (k == 1) {
      if (unigram_total_ == 0) return 1.0 / v;
      const auto it = counts[1].find(make_key({&w, 1}));
      const double c = it == counts[1].end() ? 0.0 : double(it->second);
      return (c + add) / (double(unigram_total_) + add * v);
    }
    const std::string ctx_key = make_key(context);
    const auto tot = ctx_total_[k].find(ctx_key);
    if (tot == ctx_total_[k].end())
      return prob_addk(context.subspan(1), w, k - 1);
    std::string full = ctx_key;
    key_push(full, w);
    const auto it = counts[k].find(full);
    const double c = it == counts[k].end() ? 0.0 : double(it->second);
    return (c + add) / (double(tot->second) + add * v);
  }

  double prob_kn(std::span<const Id> context, Id w, int k) const {
    using namespace ngram_detail;
    const double d = config.discount;
    const double v = static_cast<double>(vocab_size());
    const int n = config.order;

    if (k == 1) {
      // Unigram level: continuation counts when a higher order exists,
      // raw counts for a pure unigram model; uniform base keeps every
      // probability strictly positive.
      const auto& table = n == 1 ? counts[1] : cont_[1];
      double den = 0.0, types = 0.0;
      if (n == 1) {
        den = double(unigram_total_);
        types = double(counts[1].size());
      } else {
        for (const auto& [key, c] : cont_[1]) {
          (void)key;
          den += double(c);
        }
        types = double(cont_[1].size());
      }
      if (den == 0.0) return 1.0 / v;
      const auto it = table.find(make_key({&w, 1}));
      const double num = it == table.end() ? 0.0 : double(it->second);
      return (std::max(num - d, 0.0) + d * types * (1.0 / v)) / den;
    }

    const std::string ctx_key = make_key(context);
    const bool top = k == n;
    const auto& gram_table = top ? counts[k] : cont_[k];
    const auto& total_table = top ? ctx_total_[k] : cont_ctx_total_[k];
    const auto& distinct_table = top ? ctx_distinct_[k] : cont_ctx_distinct_[k];

    const auto tot = total_table.find(ctx_key);
    if (tot == total_table.end() || tot->second == 0)
      return prob_kn(context.subspan(1), w, k - 1);
    std::string full = ctx_key;
    key_push(full, w);
    const auto it = gram_table.find(full);
    const double num = it == gram_table.end() ? 0.0 : double(it->second);
    const double distinct = double(distinct_table.at(ctx_key));
    const double lower = prob_kn(context.subspan(1), w, k - 1);
    return (std::max(num - d, 0.0) + d * distinct * lower) /
           double(tot->second);
  }

  // Derived tables, rebuilt by finalize().
  std::vector<std::unordered_map<std::string, std::uint64_t>> ctx_total_;
  std::vector<std::unordered_map<std::string, std::uint64_t>> ctx_distinct_;
  std::vector<std::unordered_map<std::string, std::uint64_t>> cont_;
  std::vector<std::unordered_map<std::string, std::uint64_t>> cont_ctx_total_;
  std::vector<std::unordered_map<std::string, std::uint64_t>> cont_ctx_distinct_;
  std::uint64_t unigram_total_ = 0;
};

inline NgramModel train_ngram(const Corpus& c, const NgramConfig& config) {
  using namespace ngram_detail;
  require_mono(c, "train_ngram");
  if (c.lines.empty()) fail("train_ngram: empty corpus");
  if (config.order < 1) fail("train_ngram: order must be >= 1");

  NgramModel m;
  m.config = config;

  std::map<std::string, std::uint64_t> raw;
  for (const auto& line : c.lines)
    for (const auto& tok : split_ws(line)) ++raw[tok];

  m.id_to_token = {"<unk>", "<s>", "</s>"};
  for (const auto& [tok, n] : raw) {
    if (n <= config.unk_threshold) continue;
    if (config.excluded_tokens.count(tok)) continue;
    if (tok == "<unk>" || tok == "<s>" || tok == "</s>") continue;
    m.id_to_token.push_back(tok);
  }
  for (Id i = 0; i < m.id_to_token.size(); ++i)
    m.token_to_id[m.id_to_token[i]] = i;

  const int n = config.order;
  m.counts.assign(n + 1, {});
  for (const auto& line : c.lines) {
    std::vector<Id> seq(n - 1, kBos);
    for (const auto& tok : split_ws(line)) seq.push_back(m.lookup(tok));
    seq.push_back(kEos);
    for (int k = 1; k <= n; ++k) {
      // First position predicting a real token is n-1 in the padded
      // sequence; k-grams end at or after it.
      for (std::size_t end = n; end <= seq.size(); ++end) {
        const std::span<const Id> gram(seq.data() + end - k,
                                       static_cast<std::size_t>(k));
        ++m.counts[k][make_key(gram)];
      }
    }
  }
  m.finalize();
  return m;
}

inline double logprob(const NgramModel& m, const std::string& sentence) {
  return m.logprob_ids(m.map_tokens(split_ws(sentence)));
}

// exp(-(total logprob) / (token count incl. one </s> per sentence))
inline double perplexity(const NgramModel& m, const Corpus& c) {
  require_mono(c, "perplexity");
  if (c.lines.empty()) fail("perplexity: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& line : c.lines) {
    const auto toks = split_ws(line);
    total += m.logprob_ids(m.map_tokens(toks));
    tokens += toks.size() + 1;
  }
  return std::exp(-total / static_cast<double>(tokens));
}

// Per-token cross-entropy in nats (token count includes </s>).
inline double cross_entropy(const NgramModel& m, const std::string& sentence) {
  const auto toks = split_ws(sentence);
  return -m.logprob_ids(m.map_tokens(toks)) /
         static_cast<double>(toks.size() + 1);
}

// ---------------------------------------------------------------------------
// Model file: versioned sorted-text n-gram count listing. Derived tables
// are rebuilt on load, so save/load round-trips bit-exactly and two
// trainings of the same corpus produce identical files.
// ---------------------------------------------------------------------------

inline void save_ngram(const NgramModel& m, const std::string& path) {
  std::string buf = "#ngram v1 order=" + std::to_string(m.config.order) +
                    " smoothing=" + smoothing_name(m.config.smoothing) +
                    " discount=" + fmt_double(m.config.discount) +
                    " k=" + fmt_double(m.config.k) +
                    " unk_threshold=" + std::to_string(m.config.unk_threshold) +
                    "\n";
  buf += "#vocab " + std::to_string(m.id_to_token.size()) + "\n";
  for (const auto& tok : m.id_to_token) {
    buf += tok;
    buf += '\n';
  }
  for (int k = 1; k <= m.config.order; ++k) {
    buf += "#counts " + std::to_string(k) + " " +
           std::to_string(m.counts[k].size()) + "\n";
    std::map<std::vector<std::string>, std::uint64_t> sorted;
    for (const auto& [key, c] : m.counts[k]) {
      std::vector<std::string> toks;
      for (auto id : ngram_detail::key_ids(key))
        toks.push_back(m.id_to_token[id]);
      sorted[std::move(toks)] = c;
    }
    for (const auto& [toks, c] : sorted) {
      buf += join(toks);
      buf += ' ';
      buf += std::to_string(c);
      buf += '\n';
    }
  }
  write_file(path, buf);
}

inline NgramModel load_ngram(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || !starts_with(lines[0], "#ngram v1 "))
    fail(path, ": not a v1 ngram model");
  NgramModel m;
  for (const auto& field : split_ws(lines[0].substr(10))) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "order") m.config.order = int(parse_u64(val));
    else if (key == "smoothing")
      m.config.smoothing = val == "add_k" ? Smoothing::add_k : Smoothing::kneser_ney;
    else if (key == "discount") m.config.discount = parse_double(val);
    else if (key == "k") m.config.k = parse_double(val);
    else if (key == "unk_threshold") m.config.unk_threshold = parse_u64(val);
  }
  std::size_t i = 1;
  if (i >= lines.size() || !starts_with(lines[i], "#vocab "))
    fail(path, ": missing vocab section");
  const std::size_t vocab_n = parse_u64(lines[i].substr(7));
  ++i;
  for (std::size_t v = 0; v < vocab_n; ++v, ++i) {
    if (i >= lines.size()) fail(path, ": truncated vocab");
    m.id_to_token.push_back(lines[i]);
    m.token_to_id[lines[i]] = static_cast<NgramModel::Id>(v);
  }
  m.counts.assign(m.config.order + 1, {});
  for (int k = 1; k <= m.config.order; ++k) {
    if (i >= lines.size() || !starts_with(lines[i], "#counts "))
      fail(path, ": missing counts section for order ", k);
    const auto head = split_ws(lines[i]);
    const std::size_t rows = parse_u64(head[2]);
    ++i;
    for (std::size_t r = 0; r < rows; ++r, ++i) {
      if (i >= lines.size()) fail(path, ": truncated counts");
      auto f = split_ws(lines[i]);
      if (f.size() != static_cast<std::size_t>(k) + 1)
        fail(path, ":", i + 1, ": bad ", k, "-gram row");
      std::vector<NgramModel::Id> ids;
      for (int t = 0; t < k; ++t) {
        const auto it = m.token_to_id.find(f[t]);
        if (it == m.token_to_id.end()) fail(path, ": unknown token ", f[t]);
        ids.push_back(it->second);
      }
      m.counts[k][ngram_detail::make_key(ids)] = parse_u64(f.back());
    }
  }
  m.finalize();
  return m;
}

}  // namespace lowres
