// Generates the synthetic seed corpora used by the shipped pipeline
// configs and the acceptance suite. The bilingual text follows a bijective
// token lexicon (sw<i> <-> en<i>) so the dictionary teacher trained on it
// is exact and every downstream count is predictable.

#include <iostream>

#include <CLI11.hpp>

#include "lowres/common.hpp"
#include "lowres/corpus.hpp"

using namespace lowres;

namespace {

std::string make_line(Rng& rng, std::size_t vocab, const char* prefix,
                      std::size_t min_len, std::size_t max_len,
                      std::vector<std::size_t>* word_ids = nullptr) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::vector<std::string> toks;
  toks.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    const std::size_t w = rng.below(vocab);
    if (word_ids) word_ids->push_back(w);
    toks.push_back(prefix + std::to_string(w));
  }
  return join(toks);
}

// Seed corpora for the full-scale self-training plan at 1/scale:
// parallel 2.4M/scale pairs, source mono 0.4M/scale, target mono 4.4M/scale.
void make_table5(const std::string& dir, std::size_t scale, std::uint64_t seed) {
  const std::size_t n_parallel = 2'400'000 / scale;
  const std::size_t n_mono_src = 400'000 / scale;
  const std::size_t n_mono_tgt = 4'400'000 / scale;
  const std::size_t vocab = 600;

  Rng rng(seed);
  std::vector<SentencePair> pairs;
  pairs.reserve(n_parallel);
  for (std::size_t i = 0; i < n_parallel; ++i) {
    std::vector<std::size_t> ids;
    const std::string src = make_line(rng, vocab, "sw", 3, 9, &ids);
    std::vector<std::string> tgt;
    for (const std::size_t w : ids) tgt.push_back("en" + std::to_string(w));
    pairs.push_back({src, join(tgt)});
  }
  save_corpus(make_parallel(std::move(pairs), kProvAuthentic),
              dir + "/parallel.tsv");

  std::vector<std::string> mono_src, mono_tgt;
  mono_src.reserve(n_mono_src);
  for (std::size_t i = 0; i < n_mono_src; ++i)
    mono_src.push_back(make_line(rng, vocab, "sw", 3, 9));
  save_corpus(make_mono(std::move(mono_src)), dir + "/mono.src.txt");

  mono_tgt.reserve(n_mono_tgt);
  for (std::size_t i = 0; i < n_mono_tgt; ++i)
    mono_tgt.push_back(make_line(rng, vocab, "en", 3, 9));
  save_corpus(make_mono(std::move(mono_tgt)), dir + "/mono.tgt.txt");

  std::cout << "wrote " << n_parallel << " parallel pairs, " << n_mono_src
            << " + " << n_mono_tgt << " mono lines under " << dir << "\n";
}

// Upsampling fixture: a 38,928-line mono corpus whose 14x upsampling
// is checked exactly.
void make_upsample(const std::string& dir, std::uint64_t seed) {
  const std::size_t n = 38'928;
  Rng rng(seed);
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    lines.push_back(make_line(rng, 500, "sw", 3, 11));
  save_corpus(make_mono(std::move(lines)), dir + "/mono38928.txt");
  std::cout << "wrote " << n << " lines under " << dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate deterministic fixture corpora"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed)->capture_default_str();

  std::string out_dir = "fixtures";
  std::size_t scale = 100;

  auto* t5 = app.add_subcommand("table5", "self-training seed corpora");
  t5->add_option("--out", out_dir)->required();
  t5->add_option("--scale", scale)->capture_default_str();
  t5->callback([&] { make_table5(out_dir, scale, seed); });

  auto* up = app.add_subcommand("upsample", "38,928-line mono fixture");
  up->add_option("--out", out_dir)->required();
  up->callback([&] { make_upsample(out_dir, seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
