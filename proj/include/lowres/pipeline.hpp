#pragma once

#include <chrono>
#include <cstdlib>
#include <set>
#include <functional>
#include <iostream>
#include <memory>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include "lowres/align.hpp"
#include "lowres/augment.hpp"
#include "lowres/common.hpp"
#include "lowres/corpus.hpp"
#include "lowres/lm.hpp"
#include "lowres/select.hpp"
#include "lowres/selftrain.hpp"
#include "lowres/text.hpp"

namespace lowres {

constexpr const char* kToolkitVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config file: a line-oriented key/value format.
//   # comment
//   seed = 42
//   out = runs/demo
//   [stage NAME]
//   op = corpus.upsample
//   in = seed.tsv
//   factor = 4
//   out = up.tsv
// Global keys come before the first [stage]. Stage inputs must name the
// output of an earlier stage or an existing file (relative to the config's
// directory). LOWRES_SEED overrides the configured seed.
// ---------------------------------------------------------------------------

struct PipelineStage {
  std::string name;
  std::string op;
  std::map<std::string, std::string> params;
  std::size_t index = 0;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::vector<PipelineStage> stages;
  std::string config_dir;
  std::string config_sha256;
};

inline PipelineConfig parse_pipeline_config(const std::string& path) {
  PipelineConfig cfg;
  const std::string raw = read_file(path);
  cfg.config_sha256 = sha256_hex(raw);
  cfg.config_dir = std::filesystem::path(path).parent_path().string();
  if (cfg.config_dir.empty()) cfg.config_dir = ".";

  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  };

  PipelineStage* current = nullptr;
  std::size_t lineno = 0;
  for (const auto& rawline : read_lines(path)) {
    ++lineno;
    const std::string line = trim(rawline);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      const auto inner = trim(line.substr(1, line.size() - 2));
      if (!starts_with(inner, "stage ") || trim(inner.substr(6)).empty())
        fail(path, ":", lineno, ": expected [stage NAME]");
      PipelineStage st;
      st.name = trim(inner.substr(6));
      st.index = cfg.stages.size();
      for (const auto& s : cfg.stages)
        if (s.name == st.name) fail(path, ":", lineno, ": duplicate stage name ", st.name);
      cfg.stages.push_back(st);
      current = &cfg.stages.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(path, ":", lineno, ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(path, ":", lineno, ": empty key");
    if (!current) {
      if (key == "seed") cfg.seed = parse_u64(value);
      else if (key == "out") cfg.out_dir = value;
      else fail(path, ":", lineno, ": unknown global key ", key);
    } else {
      if (key == "op") current->op = value;
      else current->params[key] = value;
    }
  }
  for (const auto& st : cfg.stages)
    if (st.op.empty()) fail(path, ": stage ", st.name, " has no op");
  if (const char* env = std::getenv("LOWRES_SEED")) cfg.seed = parse_u64(env);
  return cfg;
}

// ---------------------------------------------------------------------------
// Stage ops
// ---------------------------------------------------------------------------

class PipelineRun;

struct OpContext {
  const PipelineStage* stage = nullptr;
  const PipelineConfig* config = nullptr;
  std::uint64_t stage_seed = 0;
  unsigned threads = 1;
  nlohmann::json extra;  // op-specific manifest payload
  std::vector<std::string> input_paths, output_paths;

  std::string param(const std::string& key) const {
    const auto it = stage->params.find(key);
    if (it == stage->params.end())
      fail("stage ", stage->name, ": missing parameter '", key, "'");
    return it->second;
  }
  std::string param_or(const std::string& key, const std::string& dflt) const {
    const auto it = stage->params.find(key);
    return it == stage->params.end() ? dflt : it->second;
  }
  std::uint64_t param_u64(const std::string& key) const {
    return parse_u64(param(key));
  }
  std::uint64_t param_u64_or(const std::string& key, std::uint64_t dflt) const {
    const auto it = stage->params.find(key);
    return it == stage->params.end() ? dflt : parse_u64(it->second);
  }
  std::uint64_t seed_param() const { return param_u64_or("seed", stage_seed); }

  // Inputs resolve against the run directory first (earlier stage
  // outputs), then the config directory, then as given.
  std::string in(const std::string& key) {
    const std::string v = param(key);
    const std::string resolved = resolve(v);
    input_paths.push_back(resolved);
    return resolved;
  }
  std::string resolve(const std::string& v) const {
    namespace fs = std::filesystem;
    const std::string in_run = config->out_dir + "/" + v;
    if (fs::exists(in_run) || fs::exists(in_run + ".src")) return in_run;
    const std::string in_cfg = config->config_dir + "/" + v;
    if (fs::exists(in_cfg) || fs::exists(in_cfg + ".src")) return in_cfg;
    return v;
  }
  std::string out(const std::string& key) {
    const std::string p = config->out_dir + "/" + param(key);
    output_paths.push_back(p);
    return p;
  }
};

struct OpDef {
  std::vector<std::string> input_keys;
  std::vector<std::string> output_keys;
  std::function<void(OpContext&)> fn;
};

inline NoiseSpec noise_spec_from(const OpContext& ctx) {
  NoiseSpec spec;
  const std::string ops = ctx.param_or("ops", "remove,replace,swap_nearby");
  spec.operations.clear();
  std::string cur;
  for (const char c : ops + ",") {
    if (c == ',') {
      if (cur == "remove") spec.operations.push_back(NoiseOp::remove);
      else if (cur == "replace") spec.operations.push_back(NoiseOp::replace);
      else if (cur == "swap_nearby") spec.operations.push_back(NoiseOp::swap_nearby);
      else if (!cur.empty()) fail("unknown noise op: ", cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  spec.edits_per_sentence = int(ctx.param_u64_or("edits", 1));
  spec.seed = ctx.seed_param();
  return spec;
}

inline std::unique_ptr<Translator> resolve_translator(const OpContext& ctx,
                                                      const std::string& spec) {
  if (starts_with(spec, "dict:"))  // ledger keeps the unresolved spec string
    return std::make_unique<DictionaryTranslator>(
        load_alignment_model(ctx.resolve(spec.substr(5))).lexical, spec);
  return make_translator(spec);
}

inline const std::map<std::string, OpDef>& op_registry() {
  static const std::map<std::string, OpDef> registry = [] {
    std::map<std::string, OpDef> ops;

    ops["corpus.load"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(load_corpus(ctx.in("in")), ctx.out("out"));
    }};
    ops["corpus.concat"] = {{"in_a", "in_b"}, {"out"}, [](OpContext& ctx) {
      save_corpus(concat(load_corpus(ctx.in("in_a")),
                         load_corpus(ctx.in("in_b"))),
                  ctx.out("out"));
    }};
    ops["corpus.upsample"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(upsample(load_corpus(ctx.in("in")), ctx.param_u64("factor")),
                  ctx.out("out"));
    }};
    ops["corpus.swap"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(swap_directions(load_corpus(ctx.in("in"))), ctx.out("out"));
    }};
    ops["corpus.dedup"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(dedup(load_corpus(ctx.in("in"))), ctx.out("out"));
    }};
    ops["corpus.shuffle"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(shuffle(load_corpus(ctx.in("in")), ctx.seed_param()),
                  ctx.out("out"));
    }};
    ops["corpus.split"] = {{"in"}, {"out_train", "out_valid", "out_test"},
                           [](OpContext& ctx) {
      const auto parts =
          split_random(load_corpus(ctx.in("in")), ctx.param_u64("n_valid"),
                       ctx.param_u64("n_test"), ctx.seed_param());
      save_corpus(parts.train, ctx.out("out_train"));
      save_corpus(parts.valid, ctx.out("out_valid"));
      save_corpus(parts.test, ctx.out("out_test"));
    }};

    ops["text.tokenize"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      Corpus c = load_corpus(ctx.in("in"));
      for (auto& l : c.lines) l = tokenize(l);
      for (auto& p : c.pairs) {
        p.src = tokenize(p.src);
        p.tgt = tokenize(p.tgt);
      }
      save_corpus(c, ctx.out("out"));
    }};
    ops["text.detokenize"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      Corpus c = load_corpus(ctx.in("in"));
      for (auto& l : c.lines) l = detokenize(l);
      for (auto& p : c.pairs) {
        p.src = detokenize(p.src);
        p.tgt = detokenize(p.tgt);
      }
      save_corpus(c, ctx.out("out"));
    }};

    ops["augment.bidir"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      save_corpus(build_bidirectional(load_corpus(ctx.in("in"))),
                  ctx.out("out"));
    }};
    ops["augment.denoise"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      NoiseReport report;
      save_corpus(build_denoising(load_corpus(ctx.in("in")),
                                  noise_spec_from(ctx), &report),
                  ctx.out("out"));
      ctx.extra["noise_report"] = report.to_json();
    }};
    ops["augment.tag"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      Corpus c = load_corpus(ctx.in("in"), kProvSynthetic);
      save_corpus(tag_back_translation(c, ctx.param_or("tag", kBtTag)),
                  ctx.out("out"));
    }};
    ops["augment.schedule"] = {{}, {"out"}, [](OpContext& ctx) {
      ScheduleDatasets ds;
      ds.forward = ctx.param_or("forward", "");
      ds.bidirectional = ctx.param_or("bidirectional", "");
      ds.denoising = ctx.param_or("denoising", "");
      const auto sched =
          build_schedule(schedule_kind_from(ctx.param("kind")),
                         ctx.param_u64_or("total_steps", 0), ds);
      save_schedule(sched, ctx.out("out"));
    }};

    ops["lm.train"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      NgramConfig config;
      config.order = int(ctx.param_u64_or("order", 5));
      const std::string sm = ctx.param_or("smoothing", "kneser_ney");
      config.smoothing = sm == "add_k" ? Smoothing::add_k : Smoothing::kneser_ney;
      config.unk_threshold = ctx.param_u64_or("unk_threshold", 1);
      config.excluded_tokens = {kBtTag};
      Corpus c = load_corpus(ctx.in("in"));
      if (ctx.param_or("reverse", "0") == "1")
        for (auto& l : c.lines) l = reverse_tokens(l);
      save_ngram(train_ngram(c, config), ctx.out("out"));
    }};

    ops["select.topk"] = {{"in", "lm_in", "lm_gen"}, {"out"}, [](OpContext& ctx) {
      const auto lm_in = load_ngram(ctx.in("lm_in"));
      const auto lm_gen = load_ngram(ctx.in("lm_gen"));
      FilterSpec spec;
      spec.min_words = ctx.param_u64_or("min_words", 1);
      spec.max_words = ctx.param_u64_or("max_words", 250);
      save_corpus(select_topk(load_corpus(ctx.in("in")), lm_in, lm_gen, spec,
                              ctx.param_u64("k"), ctx.threads),
                  ctx.out("out"));
    }};

    ops["align.train"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      const auto model =
          train_ibm(load_corpus(ctx.in("in")), int(ctx.param_u64_or("model", 1)),
                    int(ctx.param_u64_or("iterations", 5)));
      save_alignment_model(model, ctx.out("out"));
      ctx.extra["loglik"] = model.training_loglik;
    }};
    ops["align.complexity"] = {{"model", "in"}, {"out"}, [](OpContext& ctx) {
      const auto model = load_alignment_model(ctx.in("model"));
      const double value =
          corpus_complexity(model, load_corpus(ctx.in("in")));
      ctx.extra["complexity"] = value;
      write_file(ctx.out("out"),
                 nlohmann::json({{"complexity", value}}).dump(2) + "\n");
    }};

    ops["selftrain.synth"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      auto t = resolve_translator(ctx, ctx.param("translator"));
      const auto dir = ctx.param_or("direction", "forward") == "backward"
                           ? TeacherDirection::tgt_to_src
                           : TeacherDirection::src_to_tgt;
      save_corpus(generate_synthetic(*t, load_corpus(ctx.in("in")), dir),
                  ctx.out("out"));
    }};
    ops["selftrain.round"] = {{"parallel"}, {"out"}, [](OpContext& ctx) {
      RoundPlan plan;
      plan.round = int(ctx.param_u64("round"));
      plan.upsample_factor = ctx.param_u64("factor");
      RoundInputs in;
      in.parallel = load_corpus(ctx.in("parallel"), kProvAuthentic);
      if (plan.round == 1) {
        in.mono_src = load_corpus(ctx.in("mono_src"));
        in.mono_tgt = load_corpus(ctx.in("mono_tgt"));
      } else {
        in.previous = load_corpus(ctx.in("previous"));
      }
      auto fwd = resolve_translator(ctx, ctx.param("fwd"));
      auto bwd = resolve_translator(ctx, ctx.param("bwd"));
      auto result = run_round(plan, in, *fwd, *bwd);
      save_corpus(result.combined, ctx.out("out"));
      ctx.extra["ledger"] = result.ledger;
      if (ctx.stage->params.count("out_ledger"))
        write_file(ctx.out("out_ledger"), result.ledger.dump(2) + "\n");
    }};
    ops["selftrain.transductive"] = {{"in"}, {"out"}, [](OpContext& ctx) {
      auto t = resolve_translator(ctx, ctx.param("translator"));
      save_corpus(build_transductive(*t, load_corpus(ctx.in("in"))),
                  ctx.out("out"));
    }};

    return ops;
  }();
  return registry;
}

// ---------------------------------------------------------------------------
// Execution: stages run in order, each appending a manifest entry with
// input/output hashes and line counts. The manifest doubles as the resume
// checkpoint: with resume enabled, a stage whose recorded outputs are
// still intact is skipped.
// ---------------------------------------------------------------------------

struct LockFile {
  std::string path;
  explicit LockFile(const std::string& dir) : path(dir + "/.lock") {
    std::filesystem::create_directories(dir);
    const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      fail("run directory is locked (remove ", path, " if no run is active)");
    ::close(fd);
  }
  ~LockFile() { std::filesystem::remove(path); }
};

inline void log_event(const nlohmann::json& j) {
  std::cerr << j.dump() << "\n";
}

inline std::size_t count_lines(const std::string& content) {
  return std::size_t(std::count(content.begin(), content.end(), '\n'));
}

inline nlohmann::json file_record(const std::string& path) {
  const std::string content = read_file(path);
  return {{"path", path},
          {"sha256", sha256_hex(content)},
          {"count", count_lines(content)}};
}

inline void validate_pipeline(const PipelineConfig& cfg) {
  const auto& ops = op_registry();
  std::set<std::string> produced;
  for (const auto& st : cfg.stages) {
    const auto it = ops.find(st.op);
    if (it == ops.end()) fail("stage ", st.name, ": unknown op '", st.op, "'");
    for (const auto& key : it->second.input_keys) {
      const auto pit = st.params.find(key);
      if (pit == st.params.end())
        fail("stage ", st.name, ": missing input parameter '", key, "'");
      const std::string& v = pit->second;
      namespace fs = std::filesystem;
      const bool ok = produced.count(v) ||
                      fs::exists(cfg.out_dir + "/" + v) ||
                      fs::exists(cfg.out_dir + "/" + v + ".src") ||
                      fs::exists(cfg.config_dir + "/" + v) ||
                      fs::exists(cfg.config_dir + "/" + v + ".src") ||
                      fs::exists(v) || fs::exists(v + ".src");
      if (!ok)
        fail("stage ", st.name, ": input '", key, " = ", v,
             "' is neither a prior stage output nor an existing file");
    }
    for (const auto& key : it->second.output_keys) {
      const auto pit = st.params.find(key);
      if (pit == st.params.end())
        fail("stage ", st.name, ": missing output parameter '", key, "'");
      produced.insert(pit->second);
    }
    if (st.params.count("out_ledger")) produced.insert(st.params.at("out_ledger"));
  }
}

inline nlohmann::json run_pipeline(const PipelineConfig& cfg,
                                   bool resume = false, unsigned threads = 1,
                                   const std::string& manifest_path = "") {
  validate_pipeline(cfg);
  LockFile lock(cfg.out_dir);
  const std::string mpath =
      manifest_path.empty() ? cfg.out_dir + "/manifest.json" : manifest_path;

  nlohmann::json previous;
  if (resume && std::filesystem::exists(mpath))
    previous = nlohmann::json::parse(read_file(mpath));

  nlohmann::json manifest;
  manifest["version"] = kToolkitVersion;
  manifest["seed"] = cfg.seed;
  manifest["config_sha256"] = cfg.config_sha256;
  manifest["stages"] = nlohmann::json::array();

  for (const auto& st : cfg.stages) {
    const auto& def = op_registry().at(st.op);

    // Resume: skip when the recorded run of this stage is still intact.
    if (resume && previous.contains("stages")) {
      const nlohmann::json* prev_entry = nullptr;
      for (const auto& e : previous["stages"])
        if (e.value("stage", "") == st.name && e.value("op", "") == st.op &&
            e.value("params", nlohmann::json::object()) == nlohmann::json(st.params))
          prev_entry = &e;
      if (prev_entry) {
        bool intact = true;
        for (const auto& rec : (*prev_entry)["outputs"]) {
          const std::string p = rec["path"].get<std::string>();
          if (!std::filesystem::exists(p) ||
              sha256_file(p) != rec["sha256"].get<std::string>()) {
            intact = false;
            break;
          }
        }
        if (intact) {
          nlohmann::json entry = *prev_entry;
          entry["resumed"] = true;
          manifest["stages"].push_back(entry);
          write_file(mpath, manifest.dump(2) + "\n");
          log_event({{"event", "stage_skipped"}, {"stage", st.name}});
          continue;
        }
      }
    }

    log_event({{"event", "stage_start"}, {"stage", st.name}, {"op", st.op}});
    OpContext ctx;
    ctx.stage = &st;
    ctx.config = &cfg;
    ctx.stage_seed = derive_seed(cfg.seed, st.index);
    ctx.threads = threads;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      def.fn(ctx);
    } catch (const Error& e) {
      log_event({{"event", "stage_failed"}, {"stage", st.name},
                 {"error", e.what()}});
      write_file(mpath, manifest.dump(2) + "\n");
      fail("stage ", st.name, ": ", e.what());
    }
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

    nlohmann::json entry;
    entry["stage"] = st.name;
    entry["op"] = st.op;
    entry["params"] = st.params;
    entry["inputs"] = nlohmann::json::array();
    for (const auto& p : ctx.input_paths) entry["inputs"].push_back(file_record(p));
    entry["outputs"] = nlohmann::json::array();
    std::set<std::string> seen_outputs;
    for (const auto& p : ctx.output_paths) {
      if (!seen_outputs.insert(p).second) continue;
      entry["outputs"].push_back(file_record(p));
      // manifest sidecars written by save_corpus belong to this stage too
      if (std::filesystem::exists(p + ".manifest.json"))
        entry["outputs"].push_back(file_record(p + ".manifest.json"));
    }
    entry["wall_ms"] = wall_ms;
    if (!ctx.extra.empty()) entry["extra"] = ctx.extra;
    manifest["stages"].push_back(entry);
    write_file(mpath, manifest.dump(2) + "\n");

    nlohmann::json counts = nlohmann::json::array();
    for (const auto& rec : entry["outputs"]) counts.push_back(rec["count"]);
    log_event({{"event", "stage_done"}, {"stage", st.name},
               {"wall_ms", wall_ms}, {"counts", counts}});
  }
  write_file(mpath, manifest.dump(2) + "\n");
  return manifest;
}

struct VerifyResult {
  bool ok = true;
  nlohmann::json report;
};

inline VerifyResult verify_manifest(const std::string& manifest_path) {
  const auto manifest = nlohmann::json::parse(read_file(manifest_path));
  VerifyResult res;
  nlohmann::json missing = nlohmann::json::array();
  nlohmann::json drift = nlohmann::json::array();
  std::size_t checked = 0;
  for (const auto& stage : manifest.at("stages")) {
    for (const auto& rec : stage.at("outputs")) {
      const std::string path = rec.at("path").get<std::string>();
      ++checked;
      if (!std::filesystem::exists(path)) {
        missing.push_back(path);
        continue;
      }
      const std::string content = read_file(path);
      const std::string sha = sha256_hex(content);
      const std::size_t count = count_lines(content);
      if (sha != rec.at("sha256").get<std::string>() ||
          count != rec.at("count").get<std::size_t>()) {
        drift.push_back({{"path", path},
                         {"expected_sha256", rec.at("sha256")},
                         {"actual_sha256", sha},
                         {"expected_count", rec.at("count")},
                         {"actual_count", count}});
      }
    }
  }
  res.ok = missing.empty() && drift.empty();
  res.report = {{"ok", res.ok},
                {"checked", checked},
                {"missing", missing},
                {"drift", drift}};
  return res;
}

}  // namespace lowres
