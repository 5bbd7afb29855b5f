#pragma once

#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "lowres/align.hpp"
#include "lowres/common.hpp"
#include "lowres/lm.hpp"
#include "lowres/text.hpp"

namespace lowres {

// ---------------------------------------------------------------------------
// BLEU. Corpus form: unsmoothed modified 4-gram precision, geometric mean,
// multiplied by the brevity penalty; any zero precision gives 0. Orders
// with no hypothesis n-grams at all (corpus shorter than n) drop out of
// the mean, so identity stays 100 on short corpora. Sentence form: p1
// unsmoothed (0 -> score 0), add-one smoothing on numerator and
// denominator for n >= 2. Scores in [0, 100].
// ---------------------------------------------------------------------------

constexpr int kBleuOrder = 4;

struct BleuStats {
  double score = 0.0;
  double precisions[kBleuOrder] = {0, 0, 0, 0};
  double brevity_penalty = 0.0;
  std::uint64_t hyp_length = 0;
  std::uint64_t ref_length = 0;

  nlohmann::json to_json() const {
    return {{"bleu", score},
            {"precisions", {precisions[0], precisions[1], precisions[2],
                            precisions[3]}},
            {"brevity_penalty", brevity_penalty},
            {"hyp_length", hyp_length},
            {"ref_length", ref_length}};
  }
};

namespace bleu_detail {

inline void count_matches(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref, int n,
                          std::uint64_t& match, std::uint64_t& total) {
  total += hyp.size() + 1 >= std::size_t(n) ? hyp.size() + 1 - n : 0;
  if (hyp.size() < std::size_t(n) || ref.size() < std::size_t(n)) return;
  std::map<std::string, std::uint64_t> ref_counts;
  for (std::size_t i = 0; i + n <= ref.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) key += ref[i + k] + "\x1f";
    ++ref_counts[key];
  }
  std::map<std::string, std::uint64_t> hyp_counts;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) key += hyp[i + k] + "\x1f";
    ++hyp_counts[key];
  }
  for (const auto& [key, c] : hyp_counts) {
    const auto it = ref_counts.find(key);
    if (it != ref_counts.end()) match += std::min(c, it->second);
  }
}

}  // namespace bleu_detail

inline BleuStats corpus_bleu_stats(const std::vector<std::string>& hyps,
                                   const std::vector<std::string>& refs) {
  if (refs.empty()) fail("corpus_bleu: empty reference set");
  if (hyps.size() != refs.size())
    fail("corpus_bleu: ", hyps.size(), " hypotheses vs ", refs.size(),
         " references");
  BleuStats st;
  std::uint64_t match[kBleuOrder] = {0}, total[kBleuOrder] = {0};
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = split_ws(hyps[i]);
    const auto r = split_ws(refs[i]);
    st.hyp_length += h.size();
    st.ref_length += r.size();
    for (int n = 1; n <= kBleuOrder; ++n)
      bleu_detail::count_matches(h, r, n, match[n - 1], total[n - 1]);
  }
  if (st.hyp_length == 0) return st;
  st.brevity_penalty =
      st.hyp_length >= st.ref_length
          ? 1.0
          : std::exp(1.0 - double(st.ref_length) / double(st.hyp_length));
  double logsum = 0.0;
  int orders = 0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (total[n] == 0) continue;  // corpus shorter than n: order drops out
    st.precisions[n] = double(match[n]) / double(total[n]);
    if (st.precisions[n] == 0.0) return st;  // score stays 0
    logsum += std::log(st.precisions[n]);
    ++orders;
  }
  st.score = 100.0 * st.brevity_penalty * std::exp(logsum / orders);
  return st;
}

inline double corpus_bleu(const std::vector<std::string>& hyps,
                          const std::vector<std::string>& refs) {
  return corpus_bleu_stats(hyps, refs).score;
}

inline double sentence_bleu(const std::string& hyp, const std::string& ref) {
  const auto h = split_ws(hyp);
  const auto r = split_ws(ref);
  if (h.empty()) return 0.0;
  double logsum = 0.0;
  for (int n = 1; n <= kBleuOrder; ++n) {
    std::uint64_t match = 0, total = 0;
    bleu_detail::count_matches(h, r, n, match, total);
    double p;
    if (n == 1) {
      if (match == 0) return 0.0;
      p = double(match) / double(total);
    } else {
      p = double(match + 1) / double(total + 1);
    }
    logsum += std::log(p);
  }
  const double bp = h.size() >= r.size()
                        ? 1.0
                        : std::exp(1.0 - double(r.size()) / double(h.size()));
  return 100.0 * bp * std::exp(logsum / kBleuOrder);
}

// ---------------------------------------------------------------------------
// N-best lists. File rows are
//   <segment_id> ||| <tokenized hypothesis> ||| <name=value ...> ||| <model_score>
// with ` ||| ` as the exact delimiter. Segment ids must be strictly
// increasing across the file; each list holds at most `beam` hypotheses.
// ---------------------------------------------------------------------------

struct Hypothesis {
  std::string tokens;
  double model_score = 0.0;
  std::map<std::string, double> features;
};

struct NBestList {
  std::uint64_t segment_id = 0;
  std::string source;
  std::vector<Hypothesis> hyps;
};

constexpr std::size_t kDefaultBeam = 10;

inline std::vector<NBestList> parse_nbest(const std::string& path,
                                          std::size_t beam = kDefaultBeam) {
  std::vector<NBestList> lists;
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto sep = line.find(" ||| ", pos);
      if (sep == std::string::npos) {
        fields.push_back(line.substr(pos));
        break;
      }
      fields.push_back(line.substr(pos, sep - pos));
      pos = sep + 5;
    }
    if (fields.size() != 4)
      fail(path, ":", ln + 1, ": expected 4 ` ||| `-separated fields, got ",
           fields.size());
    Hypothesis hyp;
    hyp.tokens = fields[1];
    for (const auto& kv : split_ws(fields[2])) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        fail(path, ":", ln + 1, ": bad feature '", kv, "'");
      hyp.features[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1));
    }
    hyp.model_score = parse_double(fields[3]);
    if (!std::isfinite(hyp.model_score))
      fail(path, ":", ln + 1, ": non-finite model score");

    const std::uint64_t seg = parse_u64(fields[0]);
    if (lists.empty() || lists.back().segment_id != seg) {
      if (!lists.empty() && seg <= lists.back().segment_id)
        fail(path, ":", ln + 1, ": segment ids must be strictly increasing");
      lists.push_back({seg, "", {}});
    }
    lists.back().hyps.push_back(std::move(hyp));
    if (lists.back().hyps.size() > beam)
      fail(path, ":", ln + 1, ": segment ", seg, " exceeds beam size ", beam);
  }
  return lists;
}

inline void write_nbest(const std::vector<NBestList>& lists,
                        const std::string& path) {
  std::string buf;
  for (const auto& nb : lists) {
    for (const auto& h : nb.hyps) {
      buf += std::to_string(nb.segment_id) + " ||| " + h.tokens + " ||| ";
      bool first = true;
      for (const auto& [name, value] : h.features) {
        if (!first) buf += ' ';
        buf += name + "=" + fmt_double(value);
        first = false;
      }
      buf += " ||| " + fmt_double(h.model_score) + "\n";
    }
  }
  write_file(path, buf);
}

// The i-th list pairs with the i-th line of the aligned source file.
inline void attach_sources(std::vector<NBestList>& lists,
                           const std::vector<std::string>& sources) {
  if (lists.size() != sources.size())
    fail("n-best file has ", lists.size(), " segments but ", sources.size(),
         " source lines");
  for (std::size_t i = 0; i < lists.size(); ++i) lists[i].source = sources[i];
}

// ---------------------------------------------------------------------------
// Feature extraction. LM features are per-token logprobs (token count plus
// end marker); alignment features are length-normalized score_pair values.
// The r2l slot scores the token-reversed hypothesis under an LM trained on
// token-reversed targets; t2s scores source given hypothesis under the
// reverse-direction alignment model. Computed names overwrite same-named
// supplied features; any other supplied features pass through untouched.
// ---------------------------------------------------------------------------

struct FeatureResources {
  const NgramModel* lm = nullptr;        // forward target LM
  const NgramModel* lm_r2l = nullptr;    // LM over token-reversed targets
  const AlignmentModel* align = nullptr;      // source -> target
  const AlignmentModel* align_t2s = nullptr;  // target -> source

  void require_all() const {
    if (!lm) fail("extract_features: missing resource 'lm'");
    if (!lm_r2l) fail("extract_features: missing resource 'r2l'");
    if (!align) fail("extract_features: missing resource 'align'");
    if (!align_t2s) fail("extract_features: missing resource 't2s'");
  }
};

inline void extract_features(NBestList& nb, const FeatureResources& res) {
  res.require_all();
  for (auto& h : nb.hyps) {
    const double len = double(split_ws(h.tokens).size());
    h.features["model_score"] = h.model_score;
    h.features["lm"] = logprob(*res.lm, h.tokens) / (len + 1.0);
    h.features["r2l"] =
        logprob(*res.lm_r2l, reverse_tokens(h.tokens)) / (len + 1.0);
    h.features["t2s"] = score_pair(*res.align_t2s, {h.tokens, nb.source});
    h.features["align"] = score_pair(*res.align, {nb.source, h.tokens});
    h.features["wordcount"] = len;
  }
}

inline void extract_features(std::vector<NBestList>& lists,
                             const FeatureResources& res,
                             unsigned threads = 1) {
  parallel_for(lists.size(), threads,
               [&](std::size_t i) { extract_features(lists[i], res); });
}

// ---------------------------------------------------------------------------
// k-best batch MIRA over n-best lists with hope/fear updates and weight
// averaging.
// ---------------------------------------------------------------------------

struct FeatureWeights {
  std::map<std::string, double> weights;
  double C = 0.01;
  int epochs = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;  // no segment ever produced an update

  double dot(const Hypothesis& h) const {
    double s = 0.0;
    for (const auto& [name, w] : weights) {
      const auto it = h.features.find(name);
      if (it == h.features.end())
        fail("feature-name mismatch: hypothesis lacks '", name, "'");
      s += w * it->second;
    }
    return s;
  }
};

inline void save_weights(const FeatureWeights& w, const std::string& path) {
  nlohmann::json j;
  for (const auto& [name, v] : w.weights) j[name] = v;
  write_file(path, j.dump(2) + "\n");
}

inline FeatureWeights load_weights(const std::string& path) {
  FeatureWeights w;
  const auto j = nlohmann::json::parse(read_file(path));
  for (const auto& [name, v] : j.items()) w.weights[name] = v.get<double>();
  return w;
}

// Per epoch, segments are visited in a seeded shuffled order. For each:
//   hope = argmax(w.phi + bleu), fear = argmax(w.phi - bleu)
// and when bleu(hope) > bleu(fear) the weights move by
//   eta * (phi(hope) - phi(fear)),
//   eta = min(C, loss / ||dphi||^2),
//   loss = max(0, (bleu(hope) - bleu(fear)) - w.(phi(hope) - phi(fear))).
// The returned weights are the average over all updates.
inline FeatureWeights train_mira(
    const std::vector<std::pair<NBestList, std::string>>& dev, double C,
    int epochs, std::uint64_t seed) {
  if (dev.empty()) fail("train_mira: empty dev set");
  if (C <= 0.0) fail("train_mira: C must be positive");
  if (epochs < 1) fail("train_mira: epochs must be >= 1");

  FeatureWeights out;
  out.C = C;
  out.epochs = epochs;
  out.seed = seed;
  for (const auto& [name, v] : dev.front().first.hyps.at(0).features) {
    (void)v;
    out.weights[name] = 0.0;
  }
  for (const auto& [nb, ref] : dev) {
    (void)ref;
    for (const auto& h : nb.hyps) {
      if (h.features.size() != out.weights.size())
        fail("train_mira: inconsistent feature names across dev set");
      for (const auto& [name, v] : h.features) {
        (void)v;
        if (!out.weights.count(name))
          fail("train_mira: inconsistent feature names across dev set ('",
               name, "')");
      }
    }
  }

  // Per-hypothesis sentence BLEU against the segment reference, computed
  // once.
  std::vector<std::vector<double>> bleus(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i)
    for (const auto& h : dev[i].first.hyps)
      bleus[i].push_back(sentence_bleu(h.tokens, dev[i].second));

  std::map<std::string, double> w = out.weights, w_sum = out.weights;
  std::uint64_t updates = 0;
  const auto dot = [&](const Hypothesis& h) {
    double s = 0.0;
    for (const auto& [name, wv] : w) s += wv * h.features.at(name);
    return s;
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order(dev.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, std::uint64_t(epoch)));
    rng.shuffle(order);
    for (const std::size_t si : order) {
      const auto& hyps = dev[si].first.hyps;
      std::size_t hope = 0, fear = 0;
      double hope_v = -HUGE_VAL, fear_v = -HUGE_VAL;
      for (std::size_t hi = 0; hi < hyps.size(); ++hi) {
        const double m = dot(hyps[hi]);
        if (m + bleus[si][hi] > hope_v) {
          hope_v = m + bleus[si][hi];
          hope = hi;
        }
        if (m - bleus[si][hi] > fear_v) {
          fear_v = m - bleus[si][hi];
          fear = hi;
        }
      }
      if (!(bleus[si][hope] > bleus[si][fear])) continue;

      std::map<std::string, double> dphi;
      double norm2 = 0.0, wdot = 0.0;
      for (const auto& [name, wv] : w) {
        const double d = hyps[hope].features.at(name) -
                         hyps[fear].features.at(name);
        dphi[name] = d;
        norm2 += d * d;
        wdot += wv * d;
      }
      if (norm2 == 0.0) continue;  // identical feature vectors, no direction
      const double loss =
          std::max(0.0, (bleus[si][hope] - bleus[si][fear]) - wdot);
      const double eta = std::min(C, loss / norm2);
      for (auto& [name, wv] : w) wv += eta * dphi[name];
      for (auto& [name, sv] : w_sum) sv += w[name];
      ++updates;
    }
  }

  if (updates == 0) {
    out.degenerate = true;  // e.g. all hypotheses tie on BLEU everywhere
    return out;
  }
  for (auto& [name, sv] : w_sum) out.weights[name] = sv / double(updates);
  return out;
}

// argmax of w.phi; ties go to the lowest hypothesis index.
inline std::size_t rerank_select(const NBestList& nb,
                                 const FeatureWeights& w) {
  if (nb.hyps.empty()) fail("rerank: empty n-best list");
  std::size_t best = 0;
  double best_v = w.dot(nb.hyps[0]);
  for (std::size_t i = 1; i < nb.hyps.size(); ++i) {
    const double v = w.dot(nb.hyps[i]);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

inline const Hypothesis& rerank(const NBestList& nb, const FeatureWeights& w) {
  return nb.hyps[rerank_select(nb, w)];
}

}  // namespace lowres
