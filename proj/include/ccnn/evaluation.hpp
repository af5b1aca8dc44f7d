// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccnn/embedding.hpp"
#include "ccnn/encounter.hpp"
#include "ccnn/network.hpp"

namespace ccnn {

struct RankStatistic {
  double u = 0.0;  ///< sum of positive midranks - n_pos (n_pos + 1) / 2
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

/// Mann-Whitney U of the positive class, ties at midrank. Exact in double
/// arithmetic for n < 2^26. Throws Error(data) on length mismatch and
/// Error(numeric) on non-finite scores.
RankStatistic rank_statistic(std::span<const double> scores, std::span<const Outcome> labels);

/// U / (n_pos * n_neg). Throws Error(numeric) ("AUROC undefined") when
/// either class is absent.
double auroc(std::span<const double> scores, std::span<const Outcome> labels);

enum class Scenario { local, direct, tune_linear, tune_full };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct EvalReport {
  std::string source_tag;
  Scenario scenario = Scenario::local;
  double auroc = 0.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::string score_digest;  ///< sha256 of the scores, one format_real per line
  std::vector<double> scores;
};

/// Positive-class probabilities in eval mode, one per instance.
std::vector<double> score_dataset(const CnnModel& model, const EncodedDataset& data);

EvalReport evaluate_encoded(const CnnModel& model, const EncodedDataset& test_set, Scenario scenario);

/// Encodes the records with the table and scores them. Throws Error(data)
/// for an empty test set and Error(numeric) for a single-class one.
EvalReport evaluate_model(const CnnModel& model, const std::vector<EncounterRecord>& test_set,
                          const EmbeddingTable& table, const ConceptVocabulary& vocab,
                          Scenario scenario = Scenario::local);

/// {"reports":[{source_tag, scenario, auroc, n_positive, n_negative,
/// score_digest}, ...]}; AUROC at 17 significant digits.
std::string reports_to_json(const std::vector<EvalReport>& reports);

/// Tab-separated table: one row per embedding source (first-seen order),
/// one column per scenario (local, direct, tune_linear, tune_full), AUROC to
/// four decimals, "-" where no report exists.
std::string render_result_table(const std::vector<EvalReport>& reports);

}  // namespace ccnn
