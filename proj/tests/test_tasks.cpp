#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <map>

#include "fnetlab/tasks.hpp"

using namespace fnetlab;

TEST_CASE("vocab token strings round-trip") {
  ToyVocab v;
  for (std::int32_t id : {0, 1, 2, 3, 4, 100, 259})
    CHECK(v.id_of(v.token_string(id)) == id);
  CHECK_THROWS(v.token_string(std::int32_t(v.size())));
}

TEST_CASE("corpus generation is deterministic and diverse") {
  ToyVocab vocab;
  CorpusSpec spec;
  auto c1 = generate_corpus(123, spec, vocab);
  auto c2 = generate_corpus(123, spec, vocab);
  REQUIRE(c1.size() == c2.size());
  Index total = 0;
  for (size_t d = 0; d < c1.size(); ++d) {
    REQUIRE(c1[d].sentences == c2[d].sentences);
    for (const auto& s : c1[d].sentences) total += Index(s.size());
  }

  // distinct seeds differ in at least 1% of tokens
  auto c3 = generate_corpus(124, spec, vocab);
  Index diff = 0, compared = 0;
  for (size_t d = 0; d < c1.size(); ++d) {
    for (size_t s = 0; s < c1[d].sentences.size(); ++s) {
      const auto& a = c1[d].sentences[s];
      const auto& b = c3[d].sentences[s];
      for (size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        ++compared;
        diff += a[i] != b[i];
      }
    }
  }
  CHECK(double(diff) / double(compared) > 0.01);

  // unigram distribution non-degenerate: no symbol above 20% mass
  std::map<std::int32_t, Index> hist;
  for (const auto& doc : c1)
    for (const auto& s : doc.sentences)
      for (auto id : s) ++hist[id];
  for (const auto& [id, count] : hist) {
    CHECK(vocab.is_content(id));
    CHECK(double(count) / double(total) < 0.20);
  }
}

TEST_CASE("corpus text export/import round-trips") {
  ToyVocab vocab;
  CorpusSpec spec;
  spec.num_docs = 6;
  auto docs = generate_corpus(9, spec, vocab);
  const std::string text = corpus_to_text(docs, vocab);
  auto back = corpus_from_text(text, vocab);
  REQUIRE(back.size() == docs.size());
  for (size_t d = 0; d < docs.size(); ++d)
    CHECK(back[d].sentences == docs[d].sentences);
}

TEST_CASE("mlm masking statistics match the 15/80-10-10 recipe") {
  ToyVocab vocab;
  CorpusSpec cspec;
  auto corpus = generate_corpus(31, cspec, vocab);
  Rng rng(32);

  Index content_tokens = 0, masked = 0, to_mask_tok = 0, to_random = 0, kept = 0;
  Index truncated = 0;
  while (content_tokens < 100000) {
    auto ex = make_mlm_nsp(corpus, vocab, 64, 0.15, rng);
    truncated += ex.truncated;
    // count content slots from labels + unmasked content
    Index row_content = 0;
    for (auto id : ex.input_ids) row_content += vocab.is_content(id);
    // masked positions replaced by MASK/<random>/<same>; recover slot count
    for (size_t k = 0; k < ex.mask_positions.size(); ++k) {
      const Index p = ex.mask_positions[k];
      if (k) CHECK(ex.mask_positions[k] > ex.mask_positions[k - 1]);
      const std::int32_t now = ex.input_ids[size_t(p)];
      CHECK(vocab.is_content(ex.mask_labels[k]));
      if (now == ToyVocab::MASK) ++to_mask_tok;
      else if (now == ex.mask_labels[k]) ++kept;
      else ++to_random;
      // never on special tokens
      CHECK(p > 0);
    }
    masked += Index(ex.mask_positions.size());
    content_tokens += row_content + Index(std::count(
                          ex.input_ids.begin(), ex.input_ids.end(),
                          std::int32_t(ToyVocab::MASK)));
  }
  const double frac = double(masked) / double(content_tokens);
  CHECK(frac == doctest::Approx(0.15).epsilon(0.07));  // 0.15 +- 0.01 absolute
  CHECK(std::abs(frac - 0.15) < 0.01);
  CHECK(std::abs(double(to_mask_tok) / double(masked) - 0.8) < 0.02);
  CHECK(std::abs(double(to_random) / double(masked) - 0.1) < 0.02);
  CHECK(std::abs(double(kept) / double(masked) - 0.1) < 0.02);
  CHECK(truncated == 0);  // n=64 comfortably fits the toy sentences
}

TEST_CASE("nsp labels are balanced") {
  ToyVocab vocab;
  CorpusSpec cspec;
  auto corpus = generate_corpus(41, cspec, vocab);
  Rng rng(42);
  Index pos = 0;
  const Index n_examples = 10000;
  for (Index i = 0; i < n_examples; ++i)
    pos += make_mlm_nsp(corpus, vocab, 64, 0.15, rng).nsp_label;
  CHECK(std::abs(double(pos) / double(n_examples) - 0.5) < 0.02);
}

TEST_CASE("mask positions never collide with CLS/SEP/PAD over 1e5 examples") {
  ToyVocab vocab;
  CorpusSpec cspec;
  cspec.num_docs = 16;
  auto corpus = generate_corpus(51, cspec, vocab);
  Rng rng(52);
  Index masked = 0, violations = 0, malformed = 0;
  for (Index i = 0; i < 100000; ++i) {
    auto ex = make_mlm_nsp(corpus, vocab, 48, 0.15, rng);
    for (size_t k = 0; k < ex.mask_positions.size(); ++k) {
      const Index p = ex.mask_positions[k];
      ++masked;
      if (!vocab.is_content(ex.mask_labels[k])) ++violations;
      if (p <= 0 || p >= Index(ex.input_ids.size())) ++violations;
    }
    if (ex.input_ids[0] != ToyVocab::CLS ||
        std::count(ex.input_ids.begin(), ex.input_ids.end(),
                   std::int32_t(ToyVocab::SEP)) != 2)
      ++malformed;
  }
  CHECK(masked > 100000);
  CHECK(violations == 0);
  CHECK(malformed == 0);
}

TEST_CASE("truncation is recorded when sentences exceed n") {
  ToyVocab vocab;
  CorpusSpec cspec;
  cspec.sentence_len_min = 20;
  cspec.sentence_len_max = 30;
  auto corpus = generate_corpus(61, cspec, vocab);
  Rng rng(62);
  auto ex = make_mlm_nsp(corpus, vocab, 16, 0.15, rng);
  CHECK(ex.truncated);
  CHECK(ex.input_ids.size() == 16);
}

TEST_CASE("associative recall: structure and determinism") {
  ToyVocab vocab;
  RecallSpec spec;
  spec.num_pairs = 1;
  auto ex = make_associative_recall(7, 8, spec, vocab);
  CHECK(ex.ids[0] == ToyVocab::CLS);
  CHECK(ex.ids[3] == ex.ids[1]);  // query repeats the single key
  CHECK(ex.target == ex.ids[2]);
  CHECK(ex.query_pos == 3);
  for (Index i = 4; i < 8; ++i) CHECK(ex.ids[size_t(i)] == ToyVocab::PAD);

  auto ex2 = make_associative_recall(7, 8, spec, vocab);
  CHECK(ex.ids == ex2.ids);
  CHECK(ex.target == ex2.target);

  RecallSpec big;
  big.num_pairs = 10;
  CHECK_THROWS(make_associative_recall(7, 8, big, vocab));
}

TEST_CASE("recall targets are information-theoretically recoverable") {
  ToyVocab vocab;
  RecallSpec spec;
  for (std::uint64_t s = 0; s < 500; ++s) {
    auto ex = make_associative_recall(s, 64, spec, vocab);
    const std::int32_t q = ex.ids[size_t(ex.query_pos)];
    Index hits = 0;
    std::int32_t paired = -1;
    for (Index i = 0; i < spec.num_pairs; ++i) {
      if (ex.ids[size_t(1 + 2 * i)] == q) {
        ++hits;
        paired = ex.ids[size_t(2 + 2 * i)];
      }
    }
    CHECK(hits == 1);  // the query key appears exactly once among keys
    CHECK(paired == ex.target);
    // values come from the value alphabet slice
    CHECK(Index(ex.target) >= spec.value_base(vocab));
    CHECK(Index(ex.target) < spec.value_base(vocab) + spec.value_symbols);
  }
}

TEST_CASE("binary example stream round-trips") {
  ToyVocab vocab;
  CorpusSpec cspec;
  cspec.num_docs = 4;
  auto corpus = generate_corpus(71, cspec, vocab);
  Rng rng(72);
  std::vector<MLMExample> examples;
  for (int i = 0; i < 25; ++i)
    examples.push_back(make_mlm_nsp(corpus, vocab, 32, 0.15, rng));
  const std::string path = "examples_roundtrip.fne1";
  save_examples(examples, path);
  auto back = load_examples(path);
  REQUIRE(back.size() == examples.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].input_ids == examples[i].input_ids);
    CHECK(back[i].type_ids == examples[i].type_ids);
    CHECK(back[i].mask_positions == examples[i].mask_positions);
    CHECK(back[i].mask_labels == examples[i].mask_labels);
    CHECK(back[i].nsp_label == examples[i].nsp_label);
  }
  std::remove(path.c_str());
}
