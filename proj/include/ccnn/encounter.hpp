// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ccnn/vocabulary.hpp"

namespace ccnn {

enum class Outcome : std::uint8_t { negative = 0, positive = 1 };

inline int to_int(Outcome o) { return static_cast<int>(o); }

/// Day-precision admission date.
using AdmitDate = std::chrono::year_month_day;

/// Parses YYYYMMDD. Throws Error(data) for malformed or impossible dates.
AdmitDate parse_date(std::string_view text);
std::string format_date(AdmitDate date);

struct EncounterRecord {
  std::string encounter_id;
  AdmitDate admit_date;
  Outcome outcome = Outcome::negative;
  /// Label index per vocabulary concept, in vocabulary order.
  std::vector<std::uint16_t> labels;

  const std::string& label_of(const ConceptVocabulary& vocab, std::size_t concept_index) const {
    return vocab.entry(concept_index).labels.at(labels.at(concept_index));
  }

  bool operator==(const EncounterRecord&) const = default;
};

/// Parses encounter CSV (header: encounter_id,admit_date,outcome,<concepts>).
///
/// Concept columns may appear in any order. A concept whose column is
/// missing, or whose cell is empty, takes the vocabulary default ("A" for
/// binary findings); concepts without a default must be present. Throws
/// Error(data) on unknown labels or columns, malformed dates or outcomes,
/// missing required columns and duplicate encounter ids.
std::vector<EncounterRecord> parse_encounters(std::string_view csv_content,
                                              const ConceptVocabulary& vocab);

/// Writes records with every concept column in vocabulary order.
std::string write_encounters(const std::vector<EncounterRecord>& records,
                             const ConceptVocabulary& vocab);

}  // namespace ccnn
