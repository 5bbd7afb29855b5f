#pragma once

#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "lowres/common.hpp"

namespace lowres {

// Provenance flags carried by a corpus and recorded in its manifest.
enum : unsigned {
  kProvAuthentic = 1u << 0,
  kProvSynthetic = 1u << 1,
  kProvSwapped = 1u << 2,
  kProvNoised = 1u << 3,
  kProvTagged = 1u << 4,
  kProvTransductive = 1u << 5,
};

enum class CorpusKind { mono, parallel };

struct SentencePair {
  std::string src;
  std::string tgt;
  bool operator==(const SentencePair&) const = default;
};

// Sentences must not contain line terminators; tabs are legal except in
// single-file TSV serialization.
inline void validate_sentence(std::string_view text) {
  if (text.find('\n') != std::string_view::npos ||
      text.find('\r') != std::string_view::npos)
    fail("sentence contains a line terminator");
}

// An immutable-by-convention corpus: entries of exactly one kind, stable
// iteration order. All operations below are pure.
struct Corpus {
  CorpusKind kind = CorpusKind::mono;
  std::vector<std::string> lines;      // kind == mono
  std::vector<SentencePair> pairs;     // kind == parallel
  unsigned provenance = 0;
  std::optional<std::uint64_t> seed;

  std::size_t size() const {
    return kind == CorpusKind::mono ? lines.size() : pairs.size();
  }
  bool is_mono() const { return kind == CorpusKind::mono; }
  bool is_parallel() const { return kind == CorpusKind::parallel; }
};

inline Corpus make_mono(std::vector<std::string> lines, unsigned provenance = 0) {
  Corpus c;
  c.kind = CorpusKind::mono;
  c.lines = std::move(lines);
  c.provenance = provenance;
  return c;
}

inline Corpus make_parallel(std::vector<SentencePair> pairs,
                            unsigned provenance = 0) {
  Corpus c;
  c.kind = CorpusKind::parallel;
  c.pairs = std::move(pairs);
  c.provenance = provenance;
  return c;
}

inline void require_parallel(const Corpus& c, const char* op) {
  if (!c.is_parallel()) fail(op, ": expected a parallel corpus");
}

inline void require_mono(const Corpus& c, const char* op) {
  if (!c.is_mono()) fail(op, ": expected a mono corpus");
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline Corpus swap_directions(const Corpus& c) {
  require_parallel(c, "swap_directions");
  Corpus out = c;
  for (auto& p : out.pairs) std::swap(p.src, p.tgt);
  out.provenance |= kProvSwapped;
  return out;
}

inline Corpus concat(const Corpus& a, const Corpus& b) {
  if (a.kind != b.kind) fail("concat: corpus kinds differ");
  Corpus out = a;
  out.lines.insert(out.lines.end(), b.lines.begin(), b.lines.end());
  out.pairs.insert(out.pairs.end(), b.pairs.begin(), b.pairs.end());
  out.provenance = a.provenance | b.provenance;
  out.seed.reset();
  return out;
}

// Block repetition: the whole corpus k times, in order.
inline Corpus upsample(const Corpus& c, std::size_t k) {
  if (k == 0) fail("upsample: factor must be >= 1");
  Corpus out = c;
  out.lines.reserve(c.lines.size() * k);
  out.pairs.reserve(c.pairs.size() * k);
  for (std::size_t i = 1; i < k; ++i) {
    out.lines.insert(out.lines.end(), c.lines.begin(), c.lines.end());
    out.pairs.insert(out.pairs.end(), c.pairs.begin(), c.pairs.end());
  }
  return out;
}

struct Split {
  Corpus train, valid, test;
};

// Seeded random partition. A random permutation selects the valid/test
// index sets; each output keeps the input's relative order, so the same
// seed reproduces the same files byte for byte.
inline Split split_random(const Corpus& c, std::size_t n_valid,
                          std::size_t n_test, std::uint64_t seed) {
  const std::size_t n = c.size();
  if (n_valid + n_test > n)
    fail("split_random: corpus has ", n, " entries, need ", n_valid + n_test);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<char> bucket(n, 0);  // 0 train, 1 valid, 2 test
  for (std::size_t i = 0; i < n_valid; ++i) bucket[perm[i]] = 1;
  for (std::size_t i = n_valid; i < n_valid + n_test; ++i) bucket[perm[i]] = 2;

  Split out;
  for (Corpus* part : {&out.train, &out.valid, &out.test}) {
    part->kind = c.kind;
    part->provenance = c.provenance;
    part->seed = seed;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = bucket[i] == 0 ? out.train : bucket[i] == 1 ? out.valid : out.test;
    if (c.is_mono())
      dst.lines.push_back(c.lines[i]);
    else
      dst.pairs.push_back(c.pairs[i]);
  }
  return out;
}

// Entry identity is exact byte equality of the full line (tab-joined for
// pairs); first occurrence wins.
inline Corpus dedup(const Corpus& c) {
  Corpus out;
  out.kind = c.kind;
  out.provenance = c.provenance;
  out.seed = c.seed;
  std::unordered_set<std::string> seen;
  seen.reserve(c.size());
  if (c.is_mono()) {
    for (const auto& l : c.lines)
      if (seen.insert(l).second) out.lines.push_back(l);
  } else {
    for (const auto& p : c.pairs)
      if (seen.insert(p.src + '\t' + p.tgt).second) out.pairs.push_back(p);
  }
  return out;
}

inline Corpus shuffle(const Corpus& c, std::uint64_t seed) {
  Corpus out = c;
  Rng rng(seed);
  if (out.is_mono())
    rng.shuffle(out.lines);
  else
    rng.shuffle(out.pairs);
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Mono: one sentence per line, LF. Parallel: single TSV with
// exactly one tab per line, or a .src/.tgt file pair with equal line counts.
// ---------------------------------------------------------------------------

inline Corpus load_mono(const std::string& path, unsigned provenance = 0) {
  return make_mono(read_lines(path), provenance);
}

inline Corpus load_parallel_tsv(const std::string& path,
                                unsigned provenance = 0) {
  std::vector<SentencePair> pairs;
  const auto lines = read_lines(path);
  pairs.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const auto tab = l.find('\t');
    if (tab == std::string::npos || l.find('\t', tab + 1) != std::string::npos)
      fail(path, ":", i + 1, ": expected exactly one tab");
    pairs.push_back({l.substr(0, tab), l.substr(tab + 1)});
  }
  return make_parallel(std::move(pairs), provenance);
}

inline Corpus load_parallel_pair(const std::string& src_path,
                                 const std::string& tgt_path,
                                 unsigned provenance = 0) {
  auto src = read_lines(src_path);
  auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    fail("line count mismatch: ", src_path, " has ", src.size(), ", ",
         tgt_path, " has ", tgt.size());
  std::vector<SentencePair> pairs;
  pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i)
    pairs.push_back({std::move(src[i]), std::move(tgt[i])});
  return make_parallel(std::move(pairs), provenance);
}

// Loads a corpus from a path spec: "<p>.tsv"-style single files are
// parallel TSV, "<p>" with "<p>.src"/"<p>.tgt" present is a file pair,
// anything else is mono.
inline Corpus load_corpus(const std::string& path, unsigned provenance = 0) {
  namespace fs = std::filesystem;
  if (fs::exists(path + ".src") && fs::exists(path + ".tgt"))
    return load_parallel_pair(path + ".src", path + ".tgt", provenance);
  if (!fs::exists(path)) fail("no such corpus: ", path);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".tsv")
    return load_parallel_tsv(path, provenance);
  return load_mono(path, provenance);
}

inline std::string serialize(const Corpus& c) {
  std::string buf;
  if (c.is_mono()) {
    for (const auto& l : c.lines) {
      validate_sentence(l);
      buf += l;
      buf += '\n';
    }
  } else {
    for (const auto& p : c.pairs) {
      validate_sentence(p.src);
      validate_sentence(p.tgt);
      if (p.src.find('\t') != std::string::npos ||
          p.tgt.find('\t') != std::string::npos)
        fail("TSV serialization: sentence contains a tab");
      buf += p.src;
      buf += '\t';
      buf += p.tgt;
      buf += '\n';
    }
  }
  return buf;
}

inline std::vector<std::string> provenance_names(unsigned prov) {
  std::vector<std::string> out;
  if (prov & kProvAuthentic) out.push_back("authentic");
  if (prov & kProvSynthetic) out.push_back("synthetic");
  if (prov & kProvSwapped) out.push_back("swapped");
  if (prov & kProvNoised) out.push_back("noised");
  if (prov & kProvTagged) out.push_back("tagged");
  if (prov & kProvTransductive) out.push_back("transductive");
  return out;
}

inline unsigned provenance_from_names(const std::vector<std::string>& names) {
  unsigned prov = 0;
  for (const auto& n : names) {
    if (n == "authentic") prov |= kProvAuthentic;
    else if (n == "synthetic") prov |= kProvSynthetic;
    else if (n == "swapped") prov |= kProvSwapped;
    else if (n == "noised") prov |= kProvNoised;
    else if (n == "tagged") prov |= kProvTagged;
    else if (n == "transductive") prov |= kProvTransductive;
    else fail("unknown provenance flag: ", n);
  }
  return prov;
}

inline nlohmann::json corpus_manifest(const Corpus& c,
                                      const std::string& content) {
  nlohmann::json m;
  m["kind"] = c.is_mono() ? "mono" : "parallel";
  m["count"] = c.size();
  m["provenance"] = provenance_names(c.provenance);
  if (c.seed)
    m["seed"] = *c.seed;
  else
    m["seed"] = nullptr;
  m["sha256"] = sha256_hex(content);
  return m;
}

// Writes the corpus and its manifest sidecar (<path>.manifest.json).
inline void save_corpus(const Corpus& c, const std::string& path,
                        bool with_manifest = true) {
  const std::string content = serialize(c);
  write_file(path, content);
  if (with_manifest)
    write_file(path + ".manifest.json", corpus_manifest(c, content).dump(2) + "\n");
}

}  // namespace lowres
