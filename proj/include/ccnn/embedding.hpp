// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccnn/encounter.hpp"
#include "ccnn/matrix.hpp"
#include "ccnn/vocabulary.hpp"

namespace ccnn {

inline constexpr std::string_view kOneHotTag = "one-hot";

/// Immutable-after-load map (concept, label) -> vector of fixed length.
/// Entries keep insertion order, which is also the serialisation order.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, std::string source_tag);

  /// Throws Error(data) on wrong length or a duplicate key and
  /// Error(numeric) on non-finite components.
  void add(std::string_view concept_id, std::string_view label, std::span<const double> vector);

  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& source_tag() const noexcept { return source_tag_; }
  std::size_t size() const noexcept { return keys_.size(); }

  std::optional<std::size_t> find(std::string_view concept_id, std::string_view label) const;
  std::span<const double> vector(std::size_t entry) const {
    return {values_.data() + entry * dimension_, dimension_};
  }
  const std::string& concept_of(std::size_t entry) const { return keys_.at(entry).first; }
  const std::string& label_of(std::size_t entry) const { return keys_.at(entry).second; }

  bool operator==(const EmbeddingTable& o) const {
    return dimension_ == o.dimension_ && source_tag_ == o.source_tag_ && keys_ == o.keys_ &&
           values_ == o.values_;
  }

 private:
  std::size_t dimension_;
  std::string source_tag_;
  std::vector<std::pair<std::string, std::string>> keys_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Unit vectors with the hot index given by vocabulary order then label
/// order; dimension = vocab.one_hot_dimension().
EmbeddingTable build_one_hot_table(const ConceptVocabulary& vocab);

/// Reads the line-oriented embedding file (header line
/// {"dimension":D,"source_tag":"..."} then one {"concept","label","vector"}
/// object per line). Vectors are used verbatim; no normalisation.
EmbeddingTable load_embedding_table(std::string_view file_content);

/// Inverse of load_embedding_table. Numbers use 17 significant digits, so
/// load(serialize(t)) == t and serialize(load(s)) == s for files written here.
std::string serialize_embedding_table(const EmbeddingTable& table);

/// One concept-by-dimension matrix per encounter.
struct EncodedInstance {
  Matrix matrix;
  Outcome outcome = Outcome::negative;
};

/// Row i is the table vector for (concept i, assigned label). Throws
/// Error(data) when the table lacks a needed pair.
EncodedInstance encode_instance(const EncounterRecord& record, const ConceptVocabulary& vocab,
                                const EmbeddingTable& table);

/// Table vectors laid out in vocabulary pair order (row = vocab.pair_id).
struct BoundTable {
  std::shared_ptr<const Matrix> pair_rows;
  std::string source_tag;

  std::size_t dimension() const { return pair_rows ? pair_rows->cols() : 0; }
};

/// Checks the table covers every vocabulary pair; throws Error(data) naming
/// the first missing pair.
BoundTable bind_table(const ConceptVocabulary& vocab, const EmbeddingTable& table);

/// An encounter as row ids into BoundTable::pair_rows. Equivalent to
/// EncodedInstance without materialising the matrix.
struct IndexedInstance {
  std::vector<std::uint32_t> rows;
  Outcome outcome = Outcome::negative;
};

struct EncodedDataset {
  BoundTable table;
  std::vector<IndexedInstance> instances;

  std::size_t size() const noexcept { return instances.size(); }
  bool empty() const noexcept { return instances.empty(); }
  std::size_t dimension() const { return table.dimension(); }
};

EncodedDataset encode_dataset(const std::vector<EncounterRecord>& records, const ConceptVocabulary& vocab,
                              const BoundTable& table);

}  // namespace ccnn
