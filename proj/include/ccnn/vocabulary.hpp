// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccnn {

inline constexpr std::string_view kPresent = "P";
inline constexpr std::string_view kAbsent = "A";

struct ConceptEntry {
  std::string id;
  std::vector<std::string> labels;
  /// Label assigned when an encounter omits the concept. Binary findings
  /// (labels exactly {P, A}) default to "A" when none is given; a concept
  /// without a default must always be present in the input.
  std::optional<std::string> default_label;

  bool is_binary_finding() const;
};

/// Ordered list of clinical concepts and their allowed labels.
///
/// Row i of every encoded instance is concept i. Pairs (concept, label) are
/// numbered in vocabulary order then label order; that numbering is the
/// one-hot index and the row id used by encoded datasets.
class ConceptVocabulary {
 public:
  ConceptVocabulary() = default;
  /// Validates uniqueness, label counts and defaults; throws Error(data).
  explicit ConceptVocabulary(std::vector<ConceptEntry> entries);

  /// Parses the JSON vocabulary document (see docs/formats.md).
  static ConceptVocabulary parse(std::string_view json_text);
  std::string to_json() const;

  const std::vector<ConceptEntry>& entries() const noexcept { return entries_; }
  const ConceptEntry& entry(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const noexcept { return entries_.size(); }

  std::optional<std::size_t> find(std::string_view concept_id) const;
  std::optional<std::size_t> label_index(std::size_t concept_index, std::string_view label) const;

  /// Sum over concepts of the label count.
  std::size_t one_hot_dimension() const noexcept { return pair_count_; }
  /// Index of (concept, label 0) in the flattened pair numbering.
  std::size_t pair_offset(std::size_t concept_index) const { return offsets_.at(concept_index); }
  std::size_t pair_id(std::size_t concept_index, std::size_t label_index) const {
    return offsets_.at(concept_index) + label_index;
  }

  bool operator==(const ConceptVocabulary& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ConceptEntry> entries_;
  std::vector<std::size_t> offsets_;
  std::size_t pair_count_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

inline bool operator==(const ConceptEntry& a, const ConceptEntry& b) {
  return a.id == b.id && a.labels == b.labels && a.default_label == b.default_label;
}

/// The influenza feature schema: 69 present/absent findings, the
/// four-grade highest-temperature concept and three age groups
/// (one-hot dimension 69 * 2 + 4 + 3 = 145).
ConceptVocabulary influenza_vocabulary();

}  // namespace ccnn
