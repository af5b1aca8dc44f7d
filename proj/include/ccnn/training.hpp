// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccnn/embedding.hpp"
#include "ccnn/network.hpp"

namespace ccnn {

/// Parameter groups excluded from updates.
struct FreezeMask {
  bool conv = false;
  bool fc = false;

  bool all() const { return conv && fc; }
  bool operator==(const FreezeMask&) const = default;
};

/// Parses "", "none", "conv", "fc", "conv,fc" (any order).
FreezeMask parse_freeze_mask(std::string_view text);
std::string to_string(FreezeMask mask);

enum class OptimizerKind { adam, sgd };
enum class Selection { best_validation_auroc, final_epoch };

std::string_view to_string(OptimizerKind k);
std::string_view to_string(Selection s);
OptimizerKind parse_optimizer(std::string_view text);
Selection parse_selection(std::string_view text);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  FreezeMask freeze;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  Selection selection = Selection::best_validation_auroc;
  /// Loss weight of positive examples (1 = unweighted).
  double positive_class_weight = 1.0;

  bool operator==(const TrainConfig&) const = default;
};

/// Throws Error(usage) on non-positive learning rate, epochs or batch size,
/// Adam betas outside [0, 1) or a non-positive class weight.
void validate(const TrainConfig& cfg);

/// Mean over the batch of -log softmax(logits)[label].
double cross_entropy_loss(std::span<const Logits> logits, std::span<const Outcome> labels);

/// Adam moments exist only for groups that are not frozen.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const CnnModel& model, const TrainConfig& cfg);

  std::uint64_t step() const noexcept { return step_; }
  bool has_conv_state() const noexcept { return !conv_m_.empty(); }
  bool has_fc_state() const noexcept { return !fc_w_m_.empty(); }

 private:
  friend void apply_update(CnnModel&, const Gradients&, OptimizerState&, const TrainConfig&);
  std::uint64_t step_ = 0;
  std::vector<double> conv_m_, conv_v_;
  std::vector<double> fc_w_m_, fc_w_v_;
  std::vector<double> fc_b_m_, fc_b_v_;
};

/// One optimizer step on the groups not in cfg.freeze. Frozen groups are
/// not touched (not even through a mutable accessor).
void apply_update(CnnModel& model, const Gradients& grads, OptimizerState& state, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 0 = the input model before any update
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::optional<double> validation_auroc;
};

struct TrainHistory {
  EpochRecord initial;
  std::vector<EpochRecord> epochs;
  /// Epoch whose parameters were returned; 0 means the input model.
  std::size_t selected_epoch = 0;
  /// "validation_auroc", "validation_loss" (single-class fallback) or
  /// "final_epoch".
  std::string selection_metric;
  std::vector<std::string> warnings;
};

struct TrainResult {
  CnnModel model;
  TrainHistory history;
};

/// Mean loss and AUROC of the model over a dataset in eval mode.
EpochRecord evaluate_dataset(const CnnModel& model, const EncodedDataset& data);

/// Mini-batch training.
///
/// Each epoch shuffles the training set with the "train" stream of
/// cfg.seed, runs forward/backward per example in shuffled order (which
/// also fixes the gradient reduction order) and takes one optimizer step
/// per batch with the batch-mean gradient. After every epoch the train and
/// validation sets are scored in eval mode.
///
/// Selection considers the input model and every epoch. best_validation_auroc
/// keeps the earliest maximum; with a single-class validation set it falls
/// back to the minimum validation loss and records a warning (also printed
/// to stderr). With every group frozen no epoch runs and the input model is
/// returned unchanged.
TrainResult train(const CnnModel& model, const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const TrainConfig& cfg);

}  // namespace ccnn
