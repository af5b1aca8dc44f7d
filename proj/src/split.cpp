// SPDX-License-Identifier: Apache-2.0
#include "ccnn/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccnn/error.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

DatePartition split_by_date(const std::vector<EncounterRecord>& records, AdmitDate cutoff) {
  const std::chrono::sys_days cut{cutoff};
  DatePartition out;
  for (const auto& r : records) {
    (std::chrono::sys_days{r.admit_date} < cut ? out.pre : out.post).push_back(r);
  }
  return out;
}

RandomPartition random_split(const std::vector<EncounterRecord>& records, double ratio,
                             std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw_usage("split ratio must lie strictly between 0 and 1");
  if (records.empty()) throw_data("cannot split an empty record set");

  const std::size_t n = records.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  RandomPartition out;
  out.train.reserve(n_train);
  out.validation.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.validation).push_back(records[i]);
  return out;
}

DatasetSplit make_dataset_split(const std::vector<EncounterRecord>& records, AdmitDate cutoff,
                                double train_ratio, std::uint64_t seed) {
  auto [pre, post] = split_by_date(records, cutoff);
  if (pre.empty()) throw_data("no records before the date cutoff " + format_date(cutoff));
  auto [train, validation] = random_split(pre, train_ratio, seed);
  return DatasetSplit{std::move(train), std::move(validation), std::move(post), seed, cutoff};
}

}  // namespace ccnn
