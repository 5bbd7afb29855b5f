// lowres: corpus-side machinery for low-resource MT experiments.
// Subcommand groups mirror the library modules; see README.md.

#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lowres/align.hpp"
#include "lowres/augment.hpp"
#include "lowres/corpus.hpp"
#include "lowres/lm.hpp"
#include "lowres/pipeline.hpp"
#include "lowres/postprocess.hpp"
#include "lowres/rerank.hpp"
#include "lowres/select.hpp"
#include "lowres/selftrain.hpp"
#include "lowres/text.hpp"

using namespace lowres;

namespace {

struct Global {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string manifest_path;  // optional command manifest
  std::vector<std::string> outputs;

  void note_output(const std::string& path) { outputs.push_back(path); }

  void write_command_manifest(const std::string& command) {
    if (manifest_path.empty()) return;
    nlohmann::json m;
    m["version"] = kToolkitVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["outputs"] = nlohmann::json::array();
    for (const auto& p : outputs)
      if (std::filesystem::exists(p)) m["outputs"].push_back(file_record(p));
    write_file(manifest_path, m.dump(2) + "\n");
  }
};

Global g;

void save_and_note(const Corpus& c, const std::string& path) {
  save_corpus(c, path);
  g.note_output(path);
}

NgramConfig make_lm_config(int order, const std::string& smoothing, double k,
                           double discount, std::uint64_t unk_threshold) {
  NgramConfig c;
  c.order = order;
  c.smoothing = smoothing == "add_k" ? Smoothing::add_k : Smoothing::kneser_ney;
  c.k = k;
  c.discount = discount;
  c.unk_threshold = unk_threshold;
  c.excluded_tokens = {kBtTag};
  return c;
}

// ---------------------------------------------------------------------- corpus

void register_corpus(CLI::App& app) {
  auto* grp = app.add_subcommand("corpus", "load, reshape, and split corpora");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("swap", "swap source and target sides");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] { save_and_note(swap_directions(load_corpus(*in)), *out); });
  }
  {
    auto* c = grp->add_subcommand("concat", "concatenate corpora in order");
    auto ins = std::make_shared<std::vector<std::string>>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *ins)->required()->expected(-2);
    c->add_option("--out", *out)->required();
    c->callback([=] {
      Corpus acc = load_corpus((*ins)[0]);
      for (std::size_t i = 1; i < ins->size(); ++i)
        acc = concat(acc, load_corpus((*ins)[i]));
      save_and_note(acc, *out);
    });
  }
  {
    auto* c = grp->add_subcommand("upsample", "repeat a corpus k times");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto factor = std::make_shared<std::size_t>(1);
    c->add_option("--in", *in)->required();
    c->add_option("--factor", *factor)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] { save_and_note(upsample(load_corpus(*in), *factor), *out); });
  }
  {
    auto* c = grp->add_subcommand("split", "seeded random train/valid/test split");
    auto in = std::make_shared<std::string>();
    auto outs = std::make_shared<std::array<std::string, 3>>();
    auto n_valid = std::make_shared<std::size_t>(0);
    auto n_test = std::make_shared<std::size_t>(0);
    c->add_option("--in", *in)->required();
    c->add_option("--n-valid", *n_valid)->required();
    c->add_option("--n-test", *n_test)->required();
    c->add_option("--out-train", (*outs)[0])->required();
    c->add_option("--out-valid", (*outs)[1])->required();
    c->add_option("--out-test", (*outs)[2])->required();
    c->callback([=] {
      const auto parts = split_random(load_corpus(*in), *n_valid, *n_test, g.seed);
      save_and_note(parts.train, (*outs)[0]);
      save_and_note(parts.valid, (*outs)[1]);
      save_and_note(parts.test, (*outs)[2]);
    });
  }
  {
    auto* c = grp->add_subcommand("dedup", "drop exact duplicate entries");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] { save_and_note(dedup(load_corpus(*in)), *out); });
  }
}

// ------------------------------------------------------------------------ text

void apply_per_line(const std::string& in, const std::string& out,
                    const std::function<std::string(const std::string&)>& fn) {
  Corpus c = load_corpus(in);
  for (auto& l : c.lines) l = fn(l);
  for (auto& p : c.pairs) {
    p.src = fn(p.src);
    p.tgt = fn(p.tgt);
  }
  save_and_note(c, out);
}

void register_text(CLI::App& app) {
  auto* grp = app.add_subcommand("text", "tokenization, truecasing, BPE");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("tokenize", "split punctuation off words");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      apply_per_line(*in, *out, [](const std::string& s) { return tokenize(s); });
    });
  }
  {
    auto* c = grp->add_subcommand("detokenize", "reattach punctuation");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      apply_per_line(*in, *out,
                     [](const std::string& s) { return detokenize(s); });
    });
  }
  {
    auto* c = grp->add_subcommand("truecase-train", "collect casing statistics");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--model", *model)->required();
    c->callback([=] {
      save_truecase(truecase_train(load_corpus(*in)), *model);
      g.note_output(*model);
    });
  }
  {
    auto* c = grp->add_subcommand("truecase", "apply or revert truecasing");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("apply");
    c->add_option("--in", *in)->required();
    c->add_option("--model", *model)->required();
    c->add_option("--mode", *mode)->check(CLI::IsMember({"apply", "revert"}));
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const TruecaseModel m = load_truecase(*model);
      if (m.empty())
        log_event({{"event", "warning"},
                   {"message", "empty truecase model: pass-through"}});
      const auto md = *mode == "apply" ? TruecaseMode::apply : TruecaseMode::revert;
      apply_per_line(*in, *out,
                     [&m, md](const std::string& s) { return truecase(s, m, md); });
    });
  }
  {
    auto* c = grp->add_subcommand("learn-bpe", "learn merge operations");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto merges = std::make_shared<std::size_t>(kDefaultBpeMerges);
    auto protect = std::make_shared<std::vector<std::string>>(
        std::vector<std::string>{kBtTag});
    c->add_option("--in", *in)->required();
    c->add_option("--merges", *merges)->capture_default_str();
    c->add_option("--protect", *protect, "tokens excluded from merging");
    c->add_option("--model", *model)->required();
    c->callback([=] {
      const std::set<std::string> prot(protect->begin(), protect->end());
      const BpeModel m = learn_bpe(load_corpus(*in), *merges, prot);
      if (m.saturated())
        log_event({{"event", "warning"},
                   {"message", "bpe saturated"},
                   {"requested", m.requested},
                   {"learned", m.merges.size()}});
      save_bpe(m, *model);
      g.note_output(*model);
    });
  }
  {
    auto* c = grp->add_subcommand("apply-bpe", "segment text with a model");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--model", *model)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      BpeModel m = load_bpe(*model);
      m.protected_tokens = {kBtTag};
      apply_per_line(*in, *out,
                     [&m](const std::string& s) { return apply_bpe(s, m); });
    });
  }
  {
    auto* c = grp->add_subcommand("revert-bpe", "undo segmentation markers");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      apply_per_line(*in, *out,
                     [](const std::string& s) { return revert_bpe(s); });
    });
  }
}

// --------------------------------------------------------------------- augment

void register_augment(CLI::App& app) {
  auto* grp = app.add_subcommand("augment", "pretraining dataset builders");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("bidir", "original plus swapped copy");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] { save_and_note(build_bidirectional(load_corpus(*in)), *out); });
  }
  {
    auto* c = grp->add_subcommand("denoise", "noised-to-clean pairs, both sides");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    auto ops = std::make_shared<std::vector<std::string>>(
        std::vector<std::string>{"remove", "replace", "swap_nearby"});
    auto edits = std::make_shared<int>(1);
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--ops", *ops, "subset of remove/replace/swap_nearby");
    c->add_option("--edits", *edits)->capture_default_str();
    c->add_option("--report", *report, "write a noise report JSON");
    c->callback([=] {
      NoiseSpec spec;
      spec.operations.clear();
      for (const auto& o : *ops) {
        if (o == "remove") spec.operations.push_back(NoiseOp::remove);
        else if (o == "replace") spec.operations.push_back(NoiseOp::replace);
        else if (o == "swap_nearby") spec.operations.push_back(NoiseOp::swap_nearby);
        else fail("unknown noise op: ", o);
      }
      spec.edits_per_sentence = *edits;
      spec.seed = g.seed;
      NoiseReport rep;
      save_and_note(build_denoising(load_corpus(*in), spec, &rep), *out);
      if (!report->empty()) {
        write_file(*report, rep.to_json().dump(2) + "\n");
        g.note_output(*report);
      }
    });
  }
  {
    auto* c = grp->add_subcommand("tag", "prepend the synthetic-data tag");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto tag = std::make_shared<std::string>(kBtTag);
    c->add_option("--in", *in)->required();
    c->add_option("--tag", *tag)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      save_and_note(
          tag_back_translation(load_corpus(*in, kProvSynthetic), *tag), *out);
    });
  }
  {
    auto* c = grp->add_subcommand("schedule", "emit a training schedule");
    auto kind = std::make_shared<std::string>();
    auto total = std::make_shared<std::uint64_t>(0);
    auto ds = std::make_shared<ScheduleDatasets>();
    auto out = std::make_shared<std::string>();
    c->add_option("--kind", *kind, "bipt | dpt | combined")->required();
    c->add_option("--total-steps", *total);
    c->add_option("--forward", ds->forward);
    c->add_option("--bidirectional", ds->bidirectional);
    c->add_option("--denoising", ds->denoising);
    c->add_option("--out", *out)->required();
    c->callback([=] {
      save_schedule(build_schedule(schedule_kind_from(*kind), *total, *ds), *out);
      g.note_output(*out);
    });
  }
}

// -------------------------------------------------------------------------- lm

void register_lm(CLI::App& app) {
  auto* grp = app.add_subcommand("lm", "n-gram language models");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("train", "train and save a model");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto order = std::make_shared<int>(5);
    auto smoothing = std::make_shared<std::string>("kneser_ney");
    auto k = std::make_shared<double>(1.0);
    auto discount = std::make_shared<double>(0.75);
    auto unk = std::make_shared<std::uint64_t>(1);
    auto reverse = std::make_shared<bool>(false);
    c->add_option("--in", *in)->required();
    c->add_option("--model", *model)->required();
    c->add_option("--order", *order)->capture_default_str();
    c->add_option("--smoothing", *smoothing)
        ->check(CLI::IsMember({"kneser_ney", "add_k"}))
        ->capture_default_str();
    c->add_option("--k", *k, "additive constant for add_k")
        ->capture_default_str();
    c->add_option("--discount", *discount, "Kneser-Ney discount")
        ->capture_default_str();
    c->add_option("--unk-threshold", *unk,
                  "tokens with count <= this become <unk>")
        ->capture_default_str();
    c->add_flag("--reverse", *reverse,
                "train on token-reversed lines (right-to-left model)");
    c->callback([=] {
      Corpus corpus = load_corpus(*in);
      if (*reverse)
        for (auto& l : corpus.lines) l = reverse_tokens(l);
      save_ngram(train_ngram(corpus, make_lm_config(*order, *smoothing, *k,
                                                    *discount, *unk)),
                 *model);
      g.note_output(*model);
    });
  }
  {
    auto* c = grp->add_subcommand("score", "per-line log-probabilities");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const NgramModel m = load_ngram(*model);
      const Corpus corpus = load_corpus(*in);
      std::string buf;
      for (const auto& l : corpus.lines)
        buf += fmt_double(logprob(m, l)) + "\t" + l + "\n";
      write_file(*out, buf);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("ppl", "corpus perplexity");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--in", *in)->required();
    c->callback([=] {
      const double ppl = perplexity(load_ngram(*model), load_corpus(*in));
      std::cout << nlohmann::json({{"perplexity", ppl}}).dump() << "\n";
    });
  }
}

// ---------------------------------------------------------------------- select

void filter_options(CLI::App* c, const std::shared_ptr<FilterSpec>& spec) {
  c->add_option("--max-illegal-ratio", spec->max_illegal_char_ratio)
      ->capture_default_str();
  c->add_option("--min-words", spec->min_words)->capture_default_str();
  c->add_option("--max-words", spec->max_words)->capture_default_str();
}

void register_select(CLI::App& app) {
  auto* grp = app.add_subcommand("select", "in-domain data selection");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("score", "Moore-Lewis scored dump");
    auto in = std::make_shared<std::string>();
    auto lm_in = std::make_shared<std::string>();
    auto lm_gen = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--lm-in", *lm_in)->required();
    c->add_option("--lm-gen", *lm_gen)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const NgramModel a = load_ngram(*lm_in), b = load_ngram(*lm_gen);
      auto scored = score_corpus(load_corpus(*in), {{&a, &b}}, g.threads);
      rank_scored(scored);
      write_file(*out, scored_dump(scored));
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("filter", "rule-based filtering");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    auto spec = std::make_shared<FilterSpec>();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--report", *report);
    filter_options(c, spec);
    c->callback([=] {
      const auto [kept, rep] = rule_filter(load_corpus(*in), *spec);
      save_and_note(kept, *out);
      if (!report->empty()) {
        write_file(*report, rep.to_json().dump(2) + "\n");
        g.note_output(*report);
      }
    });
  }
  {
    auto* c = grp->add_subcommand("topk", "filter, rank, and keep the top k");
    auto in = std::make_shared<std::string>();
    auto lm_in = std::make_shared<std::string>();
    auto lm_gen = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto dump = std::make_shared<std::string>();
    auto k = std::make_shared<std::size_t>(0);
    auto spec = std::make_shared<FilterSpec>();
    c->add_option("--in", *in)->required();
    c->add_option("--lm-in", *lm_in)->required();
    c->add_option("--lm-gen", *lm_gen)->required();
    c->add_option("--k", *k)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--dump", *dump, "also write the scored dump");
    filter_options(c, spec);
    c->callback([=] {
      const NgramModel a = load_ngram(*lm_in), b = load_ngram(*lm_gen);
      std::vector<ScoredSentence> scored;
      const Corpus sel = select_topk(load_corpus(*in), a, b, *spec, *k,
                                     g.threads, &scored);
      save_and_note(sel, *out);
      if (!dump->empty()) {
        write_file(*dump, scored_dump(scored));
        g.note_output(*dump);
      }
    });
  }
}

// ----------------------------------------------------------------------- align

void register_align(CLI::App& app) {
  auto* grp = app.add_subcommand("align", "IBM 1/2 alignment models");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("train", "EM-train an alignment model");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto model = std::make_shared<int>(1);
    auto iterations = std::make_shared<int>(5);
    c->add_option("--in", *in)->required();
    c->add_option("--model", *model, "1 or 2")->capture_default_str();
    c->add_option("--iterations", *iterations)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const auto m = train_ibm(load_corpus(*in), *model, *iterations);
      save_alignment_model(m, *out);
      g.note_output(*out);
      log_event({{"event", "em_loglik"}, {"values", m.training_loglik}});
    });
  }
  {
    auto* c = grp->add_subcommand("align", "Viterbi-align a parallel corpus");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const auto m = load_alignment_model(*model);
      const Corpus corpus = load_corpus(*in);
      require_parallel(corpus, "align");
      std::string buf;
      for (const auto& p : corpus.pairs)
        buf += pharaoh_line(viterbi_align(m, p)) + "\n";
      write_file(*out, buf);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("score", "length-normalized pair scores");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--in", *in)->required();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const auto m = load_alignment_model(*model);
      const Corpus corpus = load_corpus(*in);
      require_parallel(corpus, "score");
      std::string buf;
      for (const auto& p : corpus.pairs)
        buf += fmt_double(score_pair(m, p)) + "\n";
      write_file(*out, buf);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("complexity", "corpus complexity metric");
    auto in = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    c->add_option("--model", *model)->required();
    c->add_option("--in", *in)->required();
    c->callback([=] {
      const double v =
          corpus_complexity(load_alignment_model(*model), load_corpus(*in));
      std::cout << nlohmann::json({{"complexity", v}}).dump() << "\n";
    });
  }
}

// ---------------------------------------------------------------------- rerank

void register_rerank(CLI::App& app) {
  auto* grp = app.add_subcommand("rerank", "n-best feature reranking");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("features", "extract reranking features");
    auto nbest = std::make_shared<std::string>();
    auto src = std::make_shared<std::string>();
    auto lm_path = std::make_shared<std::string>();
    auto r2l_path = std::make_shared<std::string>();
    auto align_path = std::make_shared<std::string>();
    auto t2s_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto beam = std::make_shared<std::size_t>(kDefaultBeam);
    c->add_option("--nbest", *nbest)->required();
    c->add_option("--src", *src, "aligned source sentences")->required();
    c->add_option("--lm", *lm_path)->required();
    c->add_option("--r2l", *r2l_path)->required();
    c->add_option("--align", *align_path)->required();
    c->add_option("--t2s", *t2s_path)->required();
    c->add_option("--beam", *beam)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      auto lists = parse_nbest(*nbest, *beam);
      attach_sources(lists, read_lines(*src));
      const NgramModel lm_m = load_ngram(*lm_path);
      const NgramModel r2l_m = load_ngram(*r2l_path);
      const AlignmentModel al = load_alignment_model(*align_path);
      const AlignmentModel t2s = load_alignment_model(*t2s_path);
      FeatureResources res;
      res.lm = &lm_m;
      res.lm_r2l = &r2l_m;
      res.align = &al;
      res.align_t2s = &t2s;
      extract_features(lists, res, g.threads);
      write_nbest(lists, *out);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("mira", "k-best batch MIRA weight training");
    auto nbest = std::make_shared<std::string>();
    auto refs = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto C = std::make_shared<double>(0.01);
    auto epochs = std::make_shared<int>(5);
    auto beam = std::make_shared<std::size_t>(kDefaultBeam);
    c->add_option("--nbest", *nbest, "n-best file with features")->required();
    c->add_option("--refs", *refs, "tokenized references")->required();
    c->add_option("--C", *C)->capture_default_str();
    c->add_option("--epochs", *epochs)->capture_default_str();
    c->add_option("--beam", *beam)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const auto lists = parse_nbest(*nbest, *beam);
      const auto ref_lines = read_lines(*refs);
      if (lists.size() != ref_lines.size())
        fail("n-best has ", lists.size(), " segments, refs has ",
             ref_lines.size(), " lines");
      std::vector<std::pair<NBestList, std::string>> dev;
      for (std::size_t i = 0; i < lists.size(); ++i)
        dev.emplace_back(lists[i], ref_lines[i]);
      const FeatureWeights w = train_mira(dev, *C, *epochs, g.seed);
      if (w.degenerate)
        log_event({{"event", "warning"},
                   {"message", "mira made no updates; weights left at zero"}});
      save_weights(w, *out);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("select", "pick the argmax hypothesis");
    auto nbest = std::make_shared<std::string>();
    auto weights = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto beam = std::make_shared<std::size_t>(kDefaultBeam);
    c->add_option("--nbest", *nbest)->required();
    c->add_option("--weights", *weights)->required();
    c->add_option("--beam", *beam)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      const auto lists = parse_nbest(*nbest, *beam);
      const FeatureWeights w = load_weights(*weights);
      std::string buf;
      for (const auto& nb : lists) buf += rerank(nb, w).tokens + "\n";
      write_file(*out, buf);
      g.note_output(*out);
    });
  }
  {
    auto* c = grp->add_subcommand("bleu", "corpus BLEU evaluation");
    auto hyp = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    c->add_option("--hyp", *hyp)->required();
    c->add_option("--ref", *ref)->required();
    c->callback([=] {
      const auto st = corpus_bleu_stats(read_lines(*hyp), read_lines(*ref));
      std::cout << st.to_json().dump() << "\n";
    });
  }
}

// ------------------------------------------------------------------- selftrain

void register_selftrain(CLI::App& app) {
  auto* grp = app.add_subcommand("selftrain", "bidirectional self-training");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("synth", "synthetic pairs from mono data");
    auto in = std::make_shared<std::string>();
    auto translator = std::make_shared<std::string>();
    auto direction = std::make_shared<std::string>("forward");
    auto out = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--translator", *translator,
                  "identity | dict:<model> | cmd:<command>")->required();
    c->add_option("--direction", *direction)
        ->check(CLI::IsMember({"forward", "backward"}));
    c->add_option("--out", *out)->required();
    c->callback([=] {
      auto t = make_translator(*translator);
      const auto dir = *direction == "backward" ? TeacherDirection::tgt_to_src
                                                : TeacherDirection::src_to_tgt;
      save_and_note(generate_synthetic(*t, load_corpus(*in), dir), *out);
    });
  }
  {
    auto* c = grp->add_subcommand("round", "one self-training round");
    auto round = std::make_shared<int>(1);
    auto parallel = std::make_shared<std::string>();
    auto mono_src = std::make_shared<std::string>();
    auto mono_tgt = std::make_shared<std::string>();
    auto previous = std::make_shared<std::string>();
    auto factor = std::make_shared<std::size_t>(4);
    auto fwd = std::make_shared<std::string>();
    auto bwd = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto ledger = std::make_shared<std::string>();
    c->add_option("--round", *round, "1 or 2")->required();
    c->add_option("--parallel", *parallel)->required();
    c->add_option("--mono-src", *mono_src);
    c->add_option("--mono-tgt", *mono_tgt);
    c->add_option("--previous", *previous, "round-1 combined corpus");
    c->add_option("--factor", *factor)->capture_default_str();
    c->add_option("--fwd", *fwd)->required();
    c->add_option("--bwd", *bwd)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--ledger", *ledger, "write the count ledger JSON");
    c->callback([=] {
      RoundInputs in;
      in.parallel = load_corpus(*parallel, kProvAuthentic);
      if (*round == 1) {
        if (mono_src->empty() || mono_tgt->empty())
          fail("round 1 needs --mono-src and --mono-tgt");
        in.mono_src = load_corpus(*mono_src);
        in.mono_tgt = load_corpus(*mono_tgt);
      } else {
        if (previous->empty()) fail("round 2 needs --previous");
        in.previous = load_corpus(*previous);
      }
      auto f = make_translator(*fwd);
      auto b = make_translator(*bwd);
      const auto res = run_round({*round, *factor}, in, *f, *b);
      save_and_note(res.combined, *out);
      log_event({{"event", "round_ledger"}, {"ledger", res.ledger}});
      if (!ledger->empty()) {
        write_file(*ledger, res.ledger.dump(2) + "\n");
        g.note_output(*ledger);
      }
    });
  }
  {
    auto* c = grp->add_subcommand("transductive",
                                  "fine-tune set from test sources");
    auto in = std::make_shared<std::string>();
    auto translator = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto schedule = std::make_shared<std::string>();
    c->add_option("--in", *in)->required();
    c->add_option("--translator", *translator)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--schedule", *schedule,
                  "append a fine-tune stage to this schedule file");
    c->callback([=] {
      auto t = make_translator(*translator);
      save_and_note(build_transductive(*t, load_corpus(*in)), *out);
      if (!schedule->empty()) {
        TrainingSchedule sched;
        if (std::filesystem::exists(*schedule)) sched = load_schedule(*schedule);
        sched.stages.push_back(transductive_schedule_stage(*out));
        sched.open_ended = true;
        save_schedule(sched, *schedule);
        g.note_output(*schedule);
      }
    });
  }
}

// ------------------------------------------------------------------------ post

void register_post(CLI::App& app) {
  auto* grp = app.add_subcommand("post", "hypothesis post-processing");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("chain",
                                  "de-BPE, de-truecase, detokenize, fix numbers");
    auto src = std::make_shared<std::string>();
    auto hyp = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    auto verbose = std::make_shared<bool>(false);
    c->add_option("--src", *src, "raw source sentences")->required();
    c->add_option("--hyp", *hyp, "BPE-segmented hypotheses")->required();
    c->add_option("--truecase-model", *model)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--report", *report, "repair report JSON");
    c->add_flag("--verbose", *verbose, "log per-stage intermediates");
    c->callback([=] {
      const auto srcs = read_lines(*src);
      const auto hyps = read_lines(*hyp);
      if (srcs.size() != hyps.size())
        fail("source has ", srcs.size(), " lines, hypotheses ", hyps.size());
      const TruecaseModel tc = load_truecase(*model);
      std::string buf;
      nlohmann::json repairs = nlohmann::json::array();
      for (std::size_t i = 0; i < hyps.size(); ++i) {
        ChainTrace trace;
        buf += postprocess_chain(srcs[i], hyps[i], tc, &trace, i) + "\n";
        for (const auto& r : trace.repairs) repairs.push_back(r.to_json());
        if (*verbose)
          log_event({{"event", "chain"},
                     {"segment", i},
                     {"debpe", trace.after_debpe},
                     {"detruecase", trace.after_detruecase},
                     {"detokenize", trace.after_detokenize},
                     {"final", trace.final}});
      }
      write_file(*out, buf);
      g.note_output(*out);
      if (!report->empty()) {
        write_file(*report, repairs.dump(2) + "\n");
        g.note_output(*report);
      }
    });
  }
  {
    auto* c = grp->add_subcommand("fix-numbers", "number-consistency repair");
    auto src = std::make_shared<std::string>();
    auto hyp = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    c->add_option("--src", *src)->required();
    c->add_option("--hyp", *hyp)->required();
    c->add_option("--out", *out)->required();
    c->add_option("--report", *report);
    c->callback([=] {
      const auto srcs = read_lines(*src);
      const auto hyps = read_lines(*hyp);
      if (srcs.size() != hyps.size())
        fail("source has ", srcs.size(), " lines, hypotheses ", hyps.size());
      std::string buf;
      std::vector<RepairRecord> records;
      for (std::size_t i = 0; i < hyps.size(); ++i)
        buf += fix_numbers(srcs[i], hyps[i], &records, i) + "\n";
      write_file(*out, buf);
      g.note_output(*out);
      if (!report->empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(r.to_json());
        write_file(*report, arr.dump(2) + "\n");
        g.note_output(*report);
      }
    });
  }
  {
    auto* c = grp->add_subcommand("strip-tag", "remove the leading tag");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto tag = std::make_shared<std::string>(kBtTag);
    c->add_option("--in", *in)->required();
    c->add_option("--tag", *tag)->capture_default_str();
    c->add_option("--out", *out)->required();
    c->callback([=] {
      apply_per_line(*in, *out, [tag](const std::string& s) {
        return strip_tag(s, *tag);
      });
    });
  }
}

// -------------------------------------------------------------------- pipeline

void register_pipeline(CLI::App& app) {
  auto* grp = app.add_subcommand("pipeline", "declarative stage execution");
  grp->require_subcommand(1);

  {
    auto* c = grp->add_subcommand("run", "execute a config");
    auto config = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto resume = std::make_shared<bool>(false);
    c->add_option("--config", *config)->required();
    c->add_option("--out-dir", *out_dir, "override the configured run directory");
    c->add_flag("--resume", *resume, "skip stages with intact outputs");
    c->callback([=] {
      PipelineConfig cfg = parse_pipeline_config(*config);
      if (!out_dir->empty()) cfg.out_dir = *out_dir;
      run_pipeline(cfg, *resume, g.threads, g.manifest_path);
      std::cout << (g.manifest_path.empty() ? cfg.out_dir + "/manifest.json"
                                            : g.manifest_path)
                << "\n";
    });
  }
  {
    auto* c = grp->add_subcommand("verify", "re-hash manifest outputs");
    auto manifest = std::make_shared<std::string>();
    c->add_option("--manifest", *manifest)->required();
    c->callback([=] {
      const auto res = verify_manifest(*manifest);
      std::cout << res.report.dump(2) << "\n";
      if (!res.ok) throw CLI::RuntimeError(2);
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corpus engineering toolkit for low-resource MT"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for parallel stages")
      ->capture_default_str();
  app.add_option("--manifest", g.manifest_path,
                 "write a command manifest JSON to this path");

  register_corpus(app);
  register_text(app);
  register_augment(app);
  register_lm(app);
  register_select(app);
  register_align(app);
  register_rerank(app);
  register_selftrain(app);
  register_post(app);
  register_pipeline(app);

  try {
    app.parse(argc, argv);
    std::string cmdline;
    for (int i = 1; i < argc; ++i)
      cmdline += std::string(i > 1 ? " " : "") + argv[i];
    g.write_command_manifest(cmdline);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
