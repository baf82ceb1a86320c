#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fnetlab/rng.hpp"
#include "fnetlab/tensor.hpp"

namespace fnetlab {

// Tiny symbol vocabulary standing in for a real subword model. Reserved
// ids are never produced as content tokens.
struct ToyVocab {
  static constexpr std::int32_t PAD = 0, CLS = 1, SEP = 2, MASK = 3;
  Index alphabet = 256;

  Index size() const { return 4 + alphabet; }

  std::int32_t content_id(Index symbol) const {
    require(symbol >= 0 && symbol < alphabet, "ToyVocab: symbol out of range");
    return std::int32_t(4 + symbol);
  }
  bool is_content(std::int32_t id) const { return id >= 4 && Index(id) < size(); }

  std::string token_string(std::int32_t id) const {
    switch (id) {
      case PAD: return "<pad>";
      case CLS: return "<cls>";
      case SEP: return "<sep>";
      case MASK: return "<mask>";
      default:
        require(is_content(id), "ToyVocab: id out of range");
        return "t" + std::to_string(id - 4);
    }
  }

  std::int32_t id_of(const std::string& tok) const {
    if (tok == "<pad>") return PAD;
    if (tok == "<cls>") return CLS;
    if (tok == "<sep>") return SEP;
    if (tok == "<mask>") return MASK;
    require(tok.size() > 1 && tok[0] == 't', "ToyVocab: bad token " + tok);
    return content_id(std::stoll(tok.substr(1)));
  }
};

// ---------------------------------------------------------------------------
// Synthetic corpus: sentences from a seeded bigram grammar with topical
// structure, so masked tokens are predictable from context and sentence
// adjacency is detectable (MLM and NSP are both learnable above chance).
// ---------------------------------------------------------------------------

struct Document {
  std::vector<std::vector<std::int32_t>> sentences;  // content ids only
};

struct CorpusSpec {
  Index num_docs = 64;
  Index sentences_per_doc = 16;
  Index sentence_len_min = 4;
  Index sentence_len_max = 12;
  Index topics = 8;
};

inline std::vector<Document> generate_corpus(std::uint64_t seed,
                                             const CorpusSpec& spec,
                                             const ToyVocab& vocab) {
  require(spec.num_docs > 0 && spec.sentences_per_doc > 0 &&
              spec.sentence_len_min >= 1 &&
              spec.sentence_len_max >= spec.sentence_len_min,
          "generate_corpus: sizes must be positive");
  const Index a = vocab.alphabet;
  const Index topics = std::min(spec.topics, a);
  const Index group = a / topics;

  // Seeded successor table: each symbol prefers a handful of followers,
  // mostly within its topic group.
  Rng grammar(hash_combine(seed, 0x6772616dull));
  auto succ = std::vector<std::array<std::int32_t, 4>>(size_t(a));
  for (Index s = 0; s < a; ++s) {
    const Index topic = std::min(s / group, topics - 1);
    for (int j = 0; j < 4; ++j) {
      if (grammar.uniform() < 0.8) {
        succ[size_t(s)][size_t(j)] =
            std::int32_t(topic * group + Index(grammar.below(std::uint64_t(group))));
      } else {
        succ[size_t(s)][size_t(j)] = std::int32_t(grammar.below(std::uint64_t(a)));
      }
    }
  }

  std::vector<Document> docs(size_t(spec.num_docs));
  for (Index d = 0; d < spec.num_docs; ++d) {
    Rng rng(hash_combine(hash_combine(seed, 0x646f6373ull), std::uint64_t(d)));
    const Index topic = Index(rng.below(std::uint64_t(topics)));
    auto& doc = docs[size_t(d)];
    doc.sentences.resize(size_t(spec.sentences_per_doc));
    for (auto& sentence : doc.sentences) {
      const Index len = spec.sentence_len_min +
                        Index(rng.below(std::uint64_t(
                            spec.sentence_len_max - spec.sentence_len_min + 1)));
      sentence.resize(size_t(len));
      Index cur = topic * group + Index(rng.below(std::uint64_t(group)));
      sentence[0] = vocab.content_id(cur);
      for (Index i = 1; i < len; ++i) {
        if (rng.uniform() < 0.85)
          cur = Index(succ[size_t(cur)][size_t(rng.below(4))]);
        else
          cur = Index(rng.below(std::uint64_t(a)));
        sentence[size_t(i)] = vocab.content_id(cur);
      }
    }
  }
  return docs;
}

// Line-delimited text: one sentence per line, blank line between docs.
inline std::string corpus_to_text(const std::vector<Document>& docs,
                                  const ToyVocab& vocab) {
  std::ostringstream os;
  for (size_t d = 0; d < docs.size(); ++d) {
    if (d) os << "\n";
    for (const auto& s : docs[d].sentences) {
      for (size_t i = 0; i < s.size(); ++i)
        os << (i ? " " : "") << vocab.token_string(s[i]);
      os << "\n";
    }
  }
  return os.str();
}

inline std::vector<Document> corpus_from_text(const std::string& text,
                                              const ToyVocab& vocab) {
  std::vector<Document> docs;
  docs.emplace_back();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) {
      if (!docs.back().sentences.empty()) docs.emplace_back();
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::int32_t> sentence;
    std::string tok;
    while (ls >> tok) sentence.push_back(vocab.id_of(tok));
    docs.back().sentences.push_back(std::move(sentence));
  }
  if (!docs.empty() && docs.back().sentences.empty()) docs.pop_back();
  return docs;
}

// ---------------------------------------------------------------------------
// MLM + NSP examples, BERT masking recipe: mask_rate of content tokens
// selected; of those 80% -> MASK, 10% -> random content token, 10%
// unchanged. NSP pairs are the true next sentence with probability 1/2,
// otherwise a sentence from a different document.
// ---------------------------------------------------------------------------

struct MLMExample {
  std::vector<std::int32_t> input_ids;
  std::vector<std::int32_t> type_ids;
  std::vector<Index> mask_positions;       // strictly increasing
  std::vector<std::int32_t> mask_labels;   // original ids at masked positions
  int nsp_label = 0;                       // 1 = B really follows A
  bool truncated = false;
};

inline MLMExample make_mlm_nsp(const std::vector<Document>& corpus,
                               const ToyVocab& vocab, Index n, double mask_rate,
                               Rng& rng) {
  require(corpus.size() >= 2, "make_mlm_nsp: need at least two documents");
  require(n >= 8, "make_mlm_nsp: sequence length too small");
  require(mask_rate >= 0.0 && mask_rate < 1.0, "make_mlm_nsp: bad mask rate");

  MLMExample ex;
  const Index doc_a = Index(rng.below(corpus.size()));
  const auto& da = corpus[size_t(doc_a)].sentences;
  const Index si = Index(rng.below(da.size() > 1 ? da.size() - 1 : 1));
  std::vector<std::int32_t> a = da[size_t(si)];
  std::vector<std::int32_t> b;
  if (rng.bernoulli(0.5) && da.size() > 1) {
    b = da[size_t(si + 1)];
    ex.nsp_label = 1;
  } else {
    Index doc_b = Index(rng.below(corpus.size() - 1));
    if (doc_b >= doc_a) ++doc_b;
    const auto& db = corpus[size_t(doc_b)].sentences;
    b = db[rng.below(db.size())];
    ex.nsp_label = 0;
  }

  // Fit [CLS] A [SEP] B [SEP] into n, trimming the longer tail first.
  Index budget = n - 3;
  while (Index(a.size() + b.size()) > budget) {
    ex.truncated = true;
    if (a.size() >= b.size()) a.pop_back();
    else b.pop_back();
  }

  ex.input_ids.assign(size_t(n), ToyVocab::PAD);
  ex.type_ids.assign(size_t(n), 0);
  Index at = 0;
  ex.input_ids[size_t(at++)] = ToyVocab::CLS;
  for (std::int32_t id : a) ex.input_ids[size_t(at++)] = id;
  ex.input_ids[size_t(at++)] = ToyVocab::SEP;
  const Index b_start = at;
  for (std::int32_t id : b) ex.input_ids[size_t(at++)] = id;
  ex.input_ids[size_t(at++)] = ToyVocab::SEP;
  for (Index i = b_start; i < at; ++i) ex.type_ids[size_t(i)] = 1;

  for (Index i = 0; i < at; ++i) {
    if (!vocab.is_content(ex.input_ids[size_t(i)])) continue;
    if (!rng.bernoulli(mask_rate)) continue;
    ex.mask_positions.push_back(i);
    ex.mask_labels.push_back(ex.input_ids[size_t(i)]);
    const double u = rng.uniform();
    if (u < 0.8)
      ex.input_ids[size_t(i)] = ToyVocab::MASK;
    else if (u < 0.9)
      ex.input_ids[size_t(i)] =
          vocab.content_id(Index(rng.below(std::uint64_t(vocab.alphabet))));
    // else: keep the original token
  }
  return ex;
}

// ---------------------------------------------------------------------------
// Associative recall: CLS, k1, v1, ..., km, vm, q where q repeats one of
// the keys; the target is that key's value. Keys are distinct, so the
// answer is always recoverable, but only by relating distant positions.
// ---------------------------------------------------------------------------

struct RecallSpec {
  Index num_pairs = 4;
  Index key_symbols = 16;    // content symbols [0, key_symbols)
  Index value_symbols = 16;  // content symbols [key_symbols, key_symbols+value_symbols)

  Index value_base(const ToyVocab& vocab) const {
    return Index(vocab.content_id(key_symbols));
  }
};

struct RecallExample {
  std::vector<std::int32_t> ids;  // length n, PAD tail
  Index query_pos = 0;
  std::int32_t target = 0;  // the value token id
};

inline RecallExample make_associative_recall(std::uint64_t seed, Index n,
                                             const RecallSpec& spec,
                                             const ToyVocab& vocab) {
  const Index m = spec.num_pairs;
  require(2 * m + 2 <= n, "make_associative_recall: capacity exceeded");
  require(m >= 1 && m <= spec.key_symbols,
          "make_associative_recall: need at least as many key symbols as pairs");
  require(spec.key_symbols + spec.value_symbols <= vocab.alphabet,
          "make_associative_recall: alphabet too small");
  Rng rng(seed);

  // Distinct keys via partial Fisher-Yates over the key alphabet.
  auto keys = std::vector<Index>(size_t(spec.key_symbols));
  for (Index i = 0; i < spec.key_symbols; ++i) keys[size_t(i)] = i;
  for (Index i = 0; i < m; ++i) {
    const Index j = i + Index(rng.below(std::uint64_t(spec.key_symbols - i)));
    std::swap(keys[size_t(i)], keys[size_t(j)]);
  }

  RecallExample ex;
  ex.ids.assign(size_t(n), ToyVocab::PAD);
  ex.ids[0] = ToyVocab::CLS;
  auto values = std::vector<std::int32_t>(size_t(m));
  for (Index i = 0; i < m; ++i) {
    values[size_t(i)] = vocab.content_id(
        spec.key_symbols + Index(rng.below(std::uint64_t(spec.value_symbols))));
    ex.ids[size_t(1 + 2 * i)] = vocab.content_id(keys[size_t(i)]);
    ex.ids[size_t(2 + 2 * i)] = values[size_t(i)];
  }
  const Index pick = Index(rng.below(std::uint64_t(m)));
  ex.query_pos = 1 + 2 * m;
  ex.ids[size_t(ex.query_pos)] = vocab.content_id(keys[size_t(pick)]);
  ex.target = values[size_t(pick)];
  return ex;
}

// ---------------------------------------------------------------------------
// Binary example stream, same framing conventions as checkpoints
// (magic, version, little-endian u32 lengths).
// ---------------------------------------------------------------------------

inline void save_examples(const std::vector<MLMExample>& examples,
                          const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(bool(os), "save_examples: cannot open " + path);
  auto put_u32 = [&](std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
  };
  os.write("FNE1", 4);
  put_u32(1);
  put_u32(std::uint32_t(examples.size()));
  for (const auto& ex : examples) {
    put_u32(std::uint32_t(ex.input_ids.size()));
    os.write(reinterpret_cast<const char*>(ex.input_ids.data()),
             std::streamsize(4 * ex.input_ids.size()));
    os.write(reinterpret_cast<const char*>(ex.type_ids.data()),
             std::streamsize(4 * ex.type_ids.size()));
    put_u32(std::uint32_t(ex.mask_positions.size()));
    for (Index p : ex.mask_positions) put_u32(std::uint32_t(p));
    os.write(reinterpret_cast<const char*>(ex.mask_labels.data()),
             std::streamsize(4 * ex.mask_labels.size()));
    os.put(char(ex.nsp_label));
    os.put(char(ex.truncated ? 1 : 0));
  }
  require(bool(os), "save_examples: write failed");
}

inline std::vector<MLMExample> load_examples(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "load_examples: cannot open " + path);
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    require(bool(is.read(reinterpret_cast<char*>(&v), 4)),
            "load_examples: truncated file");
    return v;
  };
  char magic[4];
  require(bool(is.read(magic, 4)) && std::memcmp(magic, "FNE1", 4) == 0,
          "load_examples: bad magic");
  require(get_u32() == 1, "load_examples: unsupported version");
  std::vector<MLMExample> out(get_u32());
  for (auto& ex : out) {
    const std::uint32_t n = get_u32();
    ex.input_ids.resize(n);
    ex.type_ids.resize(n);
    require(bool(is.read(reinterpret_cast<char*>(ex.input_ids.data()), 4 * n)),
            "load_examples: truncated ids");
    require(bool(is.read(reinterpret_cast<char*>(ex.type_ids.data()), 4 * n)),
            "load_examples: truncated types");
    const std::uint32_t masks = get_u32();
    ex.mask_positions.resize(masks);
    for (auto& p : ex.mask_positions) p = Index(get_u32());
    ex.mask_labels.resize(masks);
    require(bool(is.read(reinterpret_cast<char*>(ex.mask_labels.data()), 4 * masks)),
            "load_examples: truncated labels");
    char nsp = 0, trunc = 0;
    require(bool(is.get(nsp)) && bool(is.get(trunc)), "load_examples: truncated tail");
    ex.nsp_label = nsp;
    ex.truncated = trunc != 0;
  }
  return out;
}

}  // namespace fnetlab
