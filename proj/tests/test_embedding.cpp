// SPDX-License-Identifier: Apache-2.0
#include <set>

#include "ccnn/embedding.hpp"
#include "ccnn/error.hpp"
#include "ccnn/split.hpp"
#include "ccnn/synth.hpp"
#include "ccnn/text.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ccnn;

namespace {

const ConceptVocabulary& mini() {
  static const ConceptVocabulary v = ConceptVocabulary::parse(oracle::read_fixture("mini_vocabulary.json"));
  return v;
}

std::string error_message(auto&& fn, ErrorKind expected) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.kind() == expected);
    return e.what();
  }
  FAIL("expected ccnn::Error");
  return {};
}

bool contains(const std::string& haystack, std::string_view needle) {
  return haystack.find(needle) != std::string::npos;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("one-hot table for the influenza schema") {
  const auto vocab = influenza_vocabulary();
  const auto t = build_one_hot_table(vocab);
  CHECK(t.dimension() == 145);
  CHECK(t.size() == 145);
  CHECK(t.source_tag() == "one-hot");
  std::set<std::size_t> hot;
  for (std::size_t e = 0; e < t.size(); ++e) {
    std::size_t ones = 0, at = 0;
    for (std::size_t d = 0; d < t.dimension(); ++d) {
      const double x = t.vector(e)[d];
      CHECK((x == 0.0 || x == 1.0));
      if (x == 1.0) {
        ++ones;
        at = d;
      }
    }
    CHECK(ones == 1);
    hot.insert(at);
  }
  CHECK(hot.size() == 145);
  // hot index = pair id
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    for (std::size_t l = 0; l < vocab.entry(c).labels.size(); ++l) {
      const auto e = *t.find(vocab.entry(c).id, vocab.entry(c).labels[l]);
      CHECK(t.vector(e)[vocab.pair_id(c, l)] == 1.0);
    }
  }
}

TEST_CASE("one-hot vectors of a single two-label concept") {
  const ConceptVocabulary v({{"cough", {"P", "A"}, std::nullopt}});
  const auto t = build_one_hot_table(v);
  CHECK(t.dimension() == 2);
  const auto p = t.vector(*t.find("cough", "P"));
  const auto a = t.vector(*t.find("cough", "A"));
  CHECK(std::vector<double>(p.begin(), p.end()) == std::vector<double>{1.0, 0.0});
  CHECK(std::vector<double>(a.begin(), a.end()) == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(build_one_hot_table(ConceptVocabulary{}), Error);
}

TEST_CASE("golden extractor file loads and round trips") {
  const std::string text = oracle::read_fixture("extractor_golden.emb.jsonl");
  const auto t = load_embedding_table(text);
  CHECK(t.dimension() == 8);
  CHECK(t.source_tag() == "bert-base-uncased");
  CHECK(t.size() == mini().one_hot_dimension());
  CHECK(t.vector(*t.find("cough", "P"))[0] == -1.3375503591320597e+00);
  const auto bound = bind_table(mini(), t);
  CHECK(bound.dimension() == 8);

  const std::string ours = serialize_embedding_table(t);
  const auto again = load_embedding_table(ours);
  CHECK(again == t);
  CHECK(serialize_embedding_table(again) == ours);
}

TEST_CASE("embedding loader errors") {
  CHECK(contains(error_message([] { load_embedding_table(oracle::read_fixture("short_vector.emb.jsonl")); },
                               ErrorKind::data),
                 "dimension"));
  CHECK(contains(
      error_message([] { load_embedding_table(oracle::read_fixture("nan_value.emb.jsonl")); }, ErrorKind::numeric),
      "non-finite"));
  CHECK(contains(error_message([] { load_embedding_table(oracle::read_fixture("duplicate_pair.emb.jsonl")); },
                               ErrorKind::data),
                 "duplicate"));
  error_message([] { load_embedding_table(oracle::read_fixture("header_only.emb.jsonl")); }, ErrorKind::data);
  error_message([] { load_embedding_table(""); }, ErrorKind::data);
  error_message([] { load_embedding_table("{\"dimension\":2}\n"); }, ErrorKind::data);

  const auto missing = load_embedding_table(oracle::read_fixture("missing_pair.emb.jsonl"));
  CHECK(contains(error_message([&] { bind_table(mini(), missing); }, ErrorKind::data), "age_group"));
}

TEST_CASE("infinity tokens and concept names containing 'inf' or 'nan'") {
  const std::string inf_file =
      "{\"dimension\":2,\"source_tag\":\"x\"}\n{\"concept\":\"a\",\"label\":\"P\",\"vector\":[1.0, Infinity]}\n";
  error_message([&] { load_embedding_table(inf_file); }, ErrorKind::numeric);
  const std::string names =
      "{\"dimension\":2,\"source_tag\":\"x\"}\n"
      "{\"concept\":\"infiltrate\",\"label\":\"P\",\"vector\":[1.0,2.0]}\n"
      "{\"concept\":\"nausea\",\"label\":\"NaN-like\",\"vector\":[3.0,-4.0]}\n";
  const auto t = load_embedding_table(names);
  CHECK(t.size() == 2);
}

TEST_CASE("768-dimensional table over the full vocabulary") {
  const auto vocab = influenza_vocabulary();
  Rng rng(5);
  EmbeddingTable t(768, "bert-like");
  for (const auto& e : vocab.entries()) {
    for (const auto& l : e.labels) {
      std::vector<double> v(768);
      for (double& x : v) x = rng.normal();
      t.add(e.id, l, v);
    }
  }
  const auto back = load_embedding_table(serialize_embedding_table(t));
  CHECK(back.dimension() == 768);
  CHECK(back.size() == 145);
  CHECK(back == t);
}

TEST_CASE("table add validation") {
  EmbeddingTable t(2, "x");
  t.add("a", "P", std::vector<double>{1, 2});
  CHECK_THROWS_AS(t.add("a", "P", std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(t.add("b", "P", std::vector<double>{1, 2, 3}), Error);
  error_message([&] { t.add("c", "P", std::vector<double>{1, std::nan("")}); }, ErrorKind::numeric);
}

TEST_CASE("two-concept patient encodes to the expected matrix") {
  const ConceptVocabulary v({{"generalized_aches_and_pains", {"P", "A"}, std::nullopt},
                             {"nausea", {"P", "A"}, std::nullopt}});
  EmbeddingTable t(2, "fig2");
  t.add("generalized_aches_and_pains", "P", std::vector<double>{-6.7620, -0.6463});
  t.add("generalized_aches_and_pains", "A", std::vector<double>{0.0, 0.0});
  t.add("nausea", "P", std::vector<double>{-0.0534, 0.0267});
  t.add("nausea", "A", std::vector<double>{0.0, 0.0});
  EncounterRecord r{"P1", kDefaultCutoff, Outcome::positive, {0, 0}};
  const auto inst = encode_instance(r, v, t);
  CHECK(inst.matrix.rows() == 2);
  CHECK(inst.matrix(0, 0) == -6.7620);
  CHECK(inst.matrix(0, 1) == -0.6463);
  CHECK(inst.matrix(1, 0) == -0.0534);
  CHECK(inst.matrix(1, 1) == 0.0267);
  CHECK(inst.outcome == Outcome::positive);
  CHECK(encode_instance(r, v, t).matrix == inst.matrix);
}

TEST_CASE("one-hot encoding of an all-absent record") {
  const auto vocab = influenza_vocabulary();
  const auto t = build_one_hot_table(vocab);
  EncounterRecord r{"Z", kDefaultCutoff, Outcome::negative, std::vector<std::uint16_t>(vocab.size(), 0)};
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    r.labels[c] = static_cast<std::uint16_t>(vocab.entry(c).is_binary_finding() ? 1 : 0);
  }
  const auto inst = encode_instance(r, vocab, t);
  CHECK(inst.matrix.rows() == vocab.size());
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    double sum = 0.0;
    for (double x : inst.matrix.row(c)) sum += x;
    CHECK(sum == 1.0);
    CHECK(inst.matrix(c, vocab.pair_id(c, r.labels[c])) == 1.0);
  }
}

TEST_CASE("indexed encoding matches dense encoding") {
  const auto vocab = influenza_vocabulary();
  const auto sites = generate_synthetic_sites(SynthConfig{.n_source = 50, .n_target = 5}, vocab);
  const auto table = synthetic_semantic_table(vocab, SynthConfig{}.synonym_pairs, 16, 3);
  const auto ds = encode_dataset(sites.source, vocab, bind_table(vocab, table));
  REQUIRE(ds.size() == sites.source.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto dense = encode_instance(sites.source[i], vocab, table);
    const auto& rows = ds.instances[i].rows;
    REQUIRE(rows.size() == dense.matrix.rows());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto a = ds.table.pair_rows->row(rows[r]);
      const auto b = dense.matrix.row(r);
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    CHECK(ds.instances[i].outcome == dense.outcome);
  }
}

TEST_CASE("encoding is injective on assignments for an injective table") {
  const auto& v = mini();
  const auto t = load_embedding_table(oracle::read_fixture("extractor_golden.emb.jsonl"));
  std::set<std::vector<double>> seen;
  std::size_t count = 0;
  for (std::uint16_t a = 0; a < 2; ++a)
    for (std::uint16_t b = 0; b < 2; ++b)
      for (std::uint16_t c = 0; c < 4; ++c)
        for (std::uint16_t d = 0; d < 3; ++d) {
          EncounterRecord r{"x", kDefaultCutoff, Outcome::negative, {a, b, c, d}};
          const auto m = encode_instance(r, v, t).matrix;
          seen.insert(std::vector<double>(m.values().begin(), m.values().end()));
          ++count;
        }
  CHECK(seen.size() == count);
}

TEST_CASE("synthetic semantic table places synonyms close together") {
  const auto vocab = influenza_vocabulary();
  const SynthConfig cfg;
  const auto t = synthetic_semantic_table(vocab, cfg.synonym_pairs, 64, 11);
  CHECK(t.source_tag() == kSyntheticSemanticTag);
  CHECK(t.size() == 145);
  for (const auto& p : cfg.synonym_pairs) {
    const double c = cosine(t.vector(*t.find(p.source_concept, "P")), t.vector(*t.find(p.target_concept, "P")));
    CHECK(c > 0.9);
  }
  const double unrelated = cosine(t.vector(*t.find("cough", "P")), t.vector(*t.find("headache", "P")));
  CHECK(std::abs(unrelated) < 0.6);
}

TEST_CASE("number formatting round trips exactly") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(200)) - 100);
    const std::string s = format_real(x);
    CHECK(std::stod(s) == x);
  }
  CHECK_THROWS_AS(format_real(std::numeric_limits<double>::infinity()), Error);
}
