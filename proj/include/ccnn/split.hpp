// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ccnn/encounter.hpp"

namespace ccnn {

struct DatePartition {
  std::vector<EncounterRecord> pre;   ///< admit_date < cutoff
  std::vector<EncounterRecord> post;  ///< admit_date >= cutoff
};

/// Half-open split: records on the cutoff date go to `post`. Input order is
/// kept within each side.
DatePartition split_by_date(const std::vector<EncounterRecord>& records, AdmitDate cutoff);

struct RandomPartition {
  std::vector<EncounterRecord> train;
  std::vector<EncounterRecord> validation;
};

/// Seeded random split with |train| = round(ratio * n). Records are
/// shuffled with Rng(seed); each side keeps input order. Throws Error(data)
/// for n = 0 and Error(usage) unless 0 < ratio < 1.
RandomPartition random_split(const std::vector<EncounterRecord>& records, double ratio,
                             std::uint64_t seed);

struct DatasetSplit {
  std::vector<EncounterRecord> train;
  std::vector<EncounterRecord> validation;
  std::vector<EncounterRecord> test;
  std::uint64_t split_seed = 0;
  AdmitDate date_cutoff;
};

inline constexpr double kDefaultTrainRatio = 0.8;
inline constexpr AdmitDate kDefaultCutoff{std::chrono::year{2014}, std::chrono::June, std::chrono::day{1}};

/// Date split followed by a seeded random split of the pre-cutoff records.
DatasetSplit make_dataset_split(const std::vector<EncounterRecord>& records, AdmitDate cutoff,
                                double train_ratio, std::uint64_t seed);

}  // namespace ccnn
