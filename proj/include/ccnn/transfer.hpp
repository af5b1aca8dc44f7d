// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ccnn/embedding.hpp"
#include "ccnn/evaluation.hpp"
#include "ccnn/network.hpp"
#include "ccnn/training.hpp"
#include "json.hpp"

namespace ccnn {

inline constexpr int kCheckpointVersion = 1;

/// Audit trail carried by every checkpoint. Checkpoints without one are
/// rejected on load and refused on save.
struct Provenance {
  std::string created_by;   ///< producing command, e.g. "ccnn train"
  Scenario scenario = Scenario::local;
  std::uint64_t seed = 0;
  std::string data_window;  ///< human-readable description of the data used
  nlohmann::json config = nlohmann::json::object();  ///< effective configuration

  bool operator==(const Provenance&) const = default;
};

struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string source_tag;
  CnnModel model;
  Provenance provenance;
};

/// Self-describing text checkpoint (see docs/formats.md). Every real number
/// is written with 17 significant digits, so load_checkpoint restores the
/// parameters bit for bit and save(load(text)) == text.
std::string save_checkpoint(const CnnModel& model, std::string_view source_tag, const Provenance& provenance);

/// Throws Error(data) on unknown format/version, missing provenance or shape
/// inconsistencies, and Error(numeric) on non-finite values.
Checkpoint load_checkpoint(std::string_view file_content);

/// Throws Error(data) with "dimension mismatch" (or "embedding family
/// mismatch" for a different source tag) if the checkpoint cannot consume
/// instances encoded with `table`.
void check_composable(const Checkpoint& checkpoint, const BoundTable& table);

enum class TransferStrategy { direct_share, tune_linear, tune_conv_and_linear };

/// direct_share -> {conv, fc}; tune_linear -> {conv}; tune_conv_and_linear -> {}.
FreezeMask freeze_mask_for(TransferStrategy strategy);
Scenario scenario_for(TransferStrategy strategy);
std::string_view to_string(TransferStrategy strategy);
/// Accepts "direct", "linear", "full" and the long names.
TransferStrategy parse_strategy(std::string_view text);

/// Adapts a source-site checkpoint to the target site.
///
/// direct_share returns the checkpoint model untouched and needs no target
/// data (when `target_val` is given, history.initial scores it). The tuning
/// strategies override cfg.freeze with the strategy's mask, start from fresh
/// optimizer state and otherwise behave like train().
TrainResult run_transfer(const Checkpoint& source, TransferStrategy strategy, const EncodedDataset* target_train,
                         const EncodedDataset* target_val, TrainConfig cfg);

}  // namespace ccnn
