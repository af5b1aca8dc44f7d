// SPDX-License-Identifier: Apache-2.0
#include "ccnn/training.hpp"

#include <cmath>
#include <iostream>
#include <numeric>

#include "ccnn/error.hpp"
#include "ccnn/evaluation.hpp"
#include "ccnn/kernels.hpp"

namespace ccnn {

FreezeMask parse_freeze_mask(std::string_view text) {
  FreezeMask m;
  if (text.empty() || text == "none") return m;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view part = text.substr(start, end - start);
    if (part == "conv") {
      m.conv = true;
    } else if (part == "fc") {
      m.fc = true;
    } else {
      throw_usage("unknown layer group in freeze mask: '" + std::string(part) + "' (expected conv, fc)");
    }
    start = end + 1;
  }
  return m;
}

std::string to_string(FreezeMask mask) {
  if (mask.conv && mask.fc) return "conv,fc";
  if (mask.conv) return "conv";
  if (mask.fc) return "fc";
  return "none";
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

std::string_view to_string(Selection s) {
  return s == Selection::best_validation_auroc ? "best_validation_auroc" : "final_epoch";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw_usage("unknown optimizer: '" + std::string(text) + "' (expected adam, sgd)");
}

Selection parse_selection(std::string_view text) {
  if (text == "best_validation_auroc") return Selection::best_validation_auroc;
  if (text == "final_epoch") return Selection::final_epoch;
  throw_usage("unknown selection rule: '" + std::string(text) + "' (expected best_validation_auroc, final_epoch)");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) throw_usage("learning rate must be positive");
  if (cfg.epochs == 0) throw_usage("epochs must be positive");
  if (cfg.batch_size == 0) throw_usage("batch size must be positive");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    throw_usage("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.adam_epsilon > 0.0)) throw_usage("Adam epsilon must be positive");
  if (!(cfg.positive_class_weight > 0.0) || !std::isfinite(cfg.positive_class_weight)) {
    throw_usage("positive class weight must be positive");
  }
}

double cross_entropy_loss(std::span<const Logits> logits, std::span<const Outcome> labels) {
  if (logits.size() != labels.size()) throw_data("logits and labels differ in length");
  if (logits.empty()) throw_data("cross-entropy of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += example_loss(logits[i], labels[i]);
  return sum / static_cast<double>(logits.size());
}

OptimizerState::OptimizerState(const CnnModel& model, const TrainConfig& cfg) {
  if (cfg.optimizer != OptimizerKind::adam) return;
  if (!cfg.freeze.conv) {
    conv_m_.assign(model.conv_filters().size(), 0.0);
    conv_v_.assign(model.conv_filters().size(), 0.0);
  }
  if (!cfg.freeze.fc) {
    fc_w_m_.assign(model.fc_weights().size(), 0.0);
    fc_w_v_.assign(model.fc_weights().size(), 0.0);
    fc_b_m_.assign(kNumClasses, 0.0);
    fc_b_v_.assign(kNumClasses, 0.0);
  }
}

void apply_update(CnnModel& model, const Gradients& grads, OptimizerState& state, const TrainConfig& cfg) {
  if (grads.conv.rows() != model.num_filters() || grads.conv.cols() != model.dimension() ||
      grads.fc_weights.rows() != kNumClasses || grads.fc_weights.cols() != model.num_filters()) {
    throw_data("gradient shape mismatch");
  }
  const auto& k = kernels::active();
  ++state.step_;

  if (cfg.optimizer == OptimizerKind::sgd) {
    if (!cfg.freeze.conv) {
      k.axpy(-cfg.learning_rate, grads.conv.data(), model.mutable_conv_filters().data(), grads.conv.size());
    }
    if (!cfg.freeze.fc) {
      k.axpy(-cfg.learning_rate, grads.fc_weights.data(), model.mutable_fc_weights().data(), grads.fc_weights.size());
      k.axpy(-cfg.learning_rate, grads.fc_bias.data(), model.mutable_fc_bias().data(), kNumClasses);
    }
    return;
  }

  const double t = static_cast<double>(state.step_);
  const kernels::AdamStep step{cfg.learning_rate,
                               cfg.adam_beta1,
                               cfg.adam_beta2,
                               cfg.adam_epsilon,
                               1.0 - std::pow(cfg.adam_beta1, t),
                               1.0 - std::pow(cfg.adam_beta2, t)};
  auto ensure = [](std::vector<double>& m, std::vector<double>& v, std::size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
  };
  if (!cfg.freeze.conv) {
    ensure(state.conv_m_, state.conv_v_, grads.conv.size());
    k.adam_step(step, grads.conv.data(), model.mutable_conv_filters().data(), state.conv_m_.data(),
                state.conv_v_.data(), grads.conv.size());
  }
  if (!cfg.freeze.fc) {
    ensure(state.fc_w_m_, state.fc_w_v_, grads.fc_weights.size());
    ensure(state.fc_b_m_, state.fc_b_v_, kNumClasses);
    k.adam_step(step, grads.fc_weights.data(), model.mutable_fc_weights().data(), state.fc_w_m_.data(),
                state.fc_w_v_.data(), grads.fc_weights.size());
    k.adam_step(step, grads.fc_bias.data(), model.mutable_fc_bias().data(), state.fc_b_m_.data(),
                state.fc_b_v_.data(), kNumClasses);
  }
}

EpochRecord evaluate_dataset(const CnnModel& model, const EncodedDataset& data) {
  EpochRecord r;
  if (data.empty()) throw_data("cannot evaluate an empty dataset");
  const StoreScores store = score_store(model, *data.table.pair_rows);
  std::vector<double> scores;
  std::vector<Outcome> labels;
  scores.reserve(data.size());
  labels.reserve(data.size());
  double loss = 0.0;
  for (const auto& inst : data.instances) {
    const ForwardCache c = forward(model, RowSet::indexed(*data.table.pair_rows, inst.rows), Mode::eval, nullptr, &store);
    loss += example_loss(c.logits, inst.outcome);
    scores.push_back(positive_probability(c.logits));
    labels.push_back(inst.outcome);
  }
  r.validation_loss = loss / static_cast<double>(data.size());
  const RankStatistic rs = rank_statistic(scores, labels);
  if (rs.n_positive > 0 && rs.n_negative > 0) {
    r.validation_auroc = rs.u / (static_cast<double>(rs.n_positive) * static_cast<double>(rs.n_negative));
  }
  return r;
}

namespace {

EpochRecord score_epoch(const CnnModel& model, const EncodedDataset& train_set, const EncodedDataset& val_set,
                        std::size_t epoch) {
  EpochRecord r = evaluate_dataset(model, val_set);
  r.epoch = epoch;
  r.train_loss = evaluate_dataset(model, train_set).validation_loss;
  if (!std::isfinite(r.train_loss) || !std::isfinite(r.validation_loss)) {
    throw_numeric("training diverged: non-finite loss at epoch " + std::to_string(epoch));
  }
  return r;
}

}  // namespace

TrainResult train(const CnnModel& model, const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.empty()) throw_data("training set is empty");
  if (val_set.empty()) throw_data("validation set is empty");
  for (const EncodedDataset* d : {&train_set, &val_set}) {
    if (d->dimension() != model.dimension()) {
      throw_data("dimension mismatch: model dimension " + std::to_string(model.dimension()) + ", table '" +
                 d->table.source_tag + "' dimension " + std::to_string(d->dimension()));
    }
  }

  TrainHistory history;
  history.initial = score_epoch(model, train_set, val_set, 0);
  const bool auroc_defined = history.initial.validation_auroc.has_value();
  if (cfg.selection == Selection::final_epoch) {
    history.selection_metric = "final_epoch";
  } else if (auroc_defined) {
    history.selection_metric = "validation_auroc";
  } else {
    history.selection_metric = "validation_loss";
    history.warnings.push_back(
        "validation set has a single class; AUROC is undefined, selecting on validation loss instead");
    std::cerr << "warning: " << history.warnings.back() << "\n";
  }

  if (cfg.freeze.all()) return TrainResult{model, std::move(history)};

  CnnModel current = model;
  CnnModel best = model;
  OptimizerState state(current, cfg);
  Rng rng(derive_seed(cfg.seed, seed_stream::train));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Matrix& store_rows = *train_set.table.pair_rows;
  const double pos_weight = cfg.positive_class_weight;
  const auto& k = kernels::active();

  auto better = [&](const EpochRecord& cand, const EpochRecord& incumbent) {
    if (history.selection_metric == "validation_auroc") return *cand.validation_auroc > *incumbent.validation_auroc;
    if (history.selection_metric == "validation_loss") return cand.validation_loss < incumbent.validation_loss;
    return true;  // final_epoch
  };
  EpochRecord best_record = history.initial;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    std::optional<StoreScores> store;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (!store || store->conv_generation != current.conv_generation()) store = score_store(current, store_rows);
      Gradients grads = Gradients::zeros_like(current);
      for (std::size_t b = start; b < end; ++b) {
        const IndexedInstance& inst = train_set.instances[order[b]];
        const ForwardCache cache =
            forward(current, RowSet::indexed(store_rows, inst.rows), Mode::train, &rng, &*store);
        const double w = inst.outcome == Outcome::positive ? pos_weight : 1.0;
        accumulate_backward(current, cache, inst.outcome, w, !cfg.freeze.conv, grads);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      if (!cfg.freeze.conv) k.scale(inv, grads.conv.data(), grads.conv.size());
      k.scale(inv, grads.fc_weights.data(), grads.fc_weights.size());
      k.scale(inv, grads.fc_bias.data(), kNumClasses);
      apply_update(current, grads, state, cfg);
    }
    EpochRecord rec = score_epoch(current, train_set, val_set, epoch);
    if (better(rec, best_record)) {
      best_record = rec;
      best = current;
      history.selected_epoch = epoch;
    }
    history.epochs.push_back(std::move(rec));
  }
  return TrainResult{std::move(best), std::move(history)};
}

}  // namespace ccnn
