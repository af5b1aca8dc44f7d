// SPDX-License-Identifier: Apache-2.0
#include "ccnn/network.hpp"

#include <algorithm>
#include <cmath>

#include "ccnn/error.hpp"
#include "ccnn/kernels.hpp"

namespace ccnn {
namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw_numeric(std::string("non-finite value in ") + what);
  }
}

std::array<double, kNumClasses> softmax(const Logits& z) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

}  // namespace

CnnModel::CnnModel(Matrix conv_filters, Matrix fc_weights, Logits fc_bias, double dropout_rate,
                   std::uint64_t init_seed)
    : conv_(std::move(conv_filters)),
      fc_w_(std::move(fc_weights)),
      fc_b_(fc_bias),
      dropout_rate_(dropout_rate),
      init_seed_(init_seed) {
  if (conv_.rows() == 0 || conv_.cols() == 0) throw_data("conv filters must be non-empty");
  if (fc_w_.rows() != kNumClasses || fc_w_.cols() != conv_.rows()) {
    throw_data("fc weights must be 2 x " + std::to_string(conv_.rows()) + ", got " + std::to_string(fc_w_.rows()) +
               " x " + std::to_string(fc_w_.cols()));
  }
  if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) throw_data("dropout rate must lie in [0, 1)");
  require_finite(conv_.values(), "conv filters");
  require_finite(fc_w_.values(), "fc weights");
  require_finite(fc_b_, "fc bias");
}

CnnModel init_model(std::size_t num_filters, std::size_t dimension, double dropout_rate, std::uint64_t seed) {
  if (num_filters == 0 || dimension == 0) throw_data("model sizes must be positive");
  Rng rng(seed);
  Matrix conv(num_filters, dimension);
  const double conv_bound = std::sqrt(6.0 / static_cast<double>(dimension + num_filters));
  for (double& w : conv.values()) w = rng.uniform(-conv_bound, conv_bound);
  Matrix fc(kNumClasses, num_filters);
  const double fc_bound = std::sqrt(6.0 / static_cast<double>(num_filters + kNumClasses));
  for (double& w : fc.values()) w = rng.uniform(-fc_bound, fc_bound);
  return CnnModel(std::move(conv), std::move(fc), Logits{0.0, 0.0}, dropout_rate, seed);
}

PoolResult conv_maxpool(const Matrix& instance, const Matrix& conv_filters) {
  if (instance.rows() == 0) throw_data("instance has no rows");
  if (instance.cols() != conv_filters.cols()) {
    throw_data("dimension mismatch: instance rows have length " + std::to_string(instance.cols()) +
               ", filters have length " + std::to_string(conv_filters.cols()));
  }
  const std::size_t n = instance.rows();
  const std::size_t f_count = conv_filters.rows();
  PoolResult out{Matrix(n, f_count), std::vector<double>(f_count, 0.0), std::vector<std::size_t>(f_count, 0)};
  kernels::active().row_scores(instance.data(), n, conv_filters.data(), f_count, instance.cols(),
                               out.scores.data());
  for (std::size_t f = 0; f < f_count; ++f) {
    double best = std::max(out.scores(0, f), 0.0);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = std::max(out.scores(i, f), 0.0);
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    out.pooled[f] = best;
    out.argmax[f] = arg;
  }
  return out;
}

StoreScores score_store(const CnnModel& model, const Matrix& store) {
  if (store.cols() != model.dimension()) {
    throw_data("dimension mismatch: table dimension " + std::to_string(store.cols()) + ", model dimension " +
               std::to_string(model.dimension()));
  }
  StoreScores out{Matrix(store.rows(), model.num_filters()), &store, &model, model.conv_generation()};
  kernels::active().row_scores(store.data(), store.rows(), model.conv_filters().data(), model.num_filters(),
                               model.dimension(), out.values.data());
  return out;
}

ForwardCache forward(const CnnModel& model, RowSet rows, Mode mode, Rng* rng, const StoreScores* scores) {
  if (rows.dimension() != model.dimension()) {
    throw_data("dimension mismatch: instance rows have length " + std::to_string(rows.dimension()) +
               ", model expects " + std::to_string(model.dimension()));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw_data("instance has no rows");
  const std::size_t f_count = model.num_filters();
  const auto& k = kernels::active();

  // Row scores: gathered from the precomputed store table, or computed here.
  Matrix local;
  auto score_at = [&](std::size_t i, std::size_t f) -> double {
    return scores != nullptr ? scores->values(rows.store_row(i), f) : local(i, f);
  };
  if (scores != nullptr) {
    if (scores->model != &model || scores->conv_generation != model.conv_generation() ||
        scores->store != &rows.store()) {
      throw_data("stale store scores: filters or table changed since score_store");
    }
  } else {
    local = Matrix(n, f_count);
    for (std::size_t i = 0; i < n; ++i) {
      k.row_scores(rows.row(i).data(), 1, model.conv_filters().data(), f_count, model.dimension(), &local(i, 0));
    }
  }

  ForwardCache c;
  c.model = &model;
  c.conv_generation = model.conv_generation();
  c.fc_generation = model.fc_generation();
  c.rows = rows;
  c.argmax.assign(f_count, 0);
  c.active.assign(f_count, false);
  c.pooled.assign(f_count, 0.0);
  for (std::size_t f = 0; f < f_count; ++f) {
    double raw = score_at(0, f);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = score_at(i, f);
      if (v > raw) {
        raw = v;
        arg = i;
      }
    }
    // Max of ReLU equals ReLU of max; when nothing is positive every row
    // ties at 0 and row 0 is reported.
    c.active[f] = raw > 0.0;
    c.argmax[f] = c.active[f] ? arg : 0;
    c.pooled[f] = c.active[f] ? raw : 0.0;
  }

  c.dropout_scale.assign(f_count, 1.0);
  const double rate = model.dropout_rate();
  if (mode == Mode::train && rate > 0.0) {
    if (rng == nullptr) throw_usage("train-mode forward with dropout needs a random stream");
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t f = 0; f < f_count; ++f) c.dropout_scale[f] = rng->uniform() < rate ? 0.0 : keep_scale;
  }
  c.dropped.resize(f_count);
  for (std::size_t f = 0; f < f_count; ++f) c.dropped[f] = c.pooled[f] * c.dropout_scale[f];

  for (std::size_t cls = 0; cls < kNumClasses; ++cls) {
    c.logits[cls] = model.fc_bias()[cls] + k.dot(model.fc_weights().row(cls).data(), c.dropped.data(), f_count);
  }
  return c;
}

double positive_probability(const Logits& logits) { return softmax(logits)[1]; }

double predict_proba(const CnnModel& model, RowSet rows, const StoreScores* scores) {
  return positive_probability(forward(model, rows, Mode::eval, nullptr, scores).logits);
}

double predict_proba(const CnnModel& model, const EncodedInstance& instance) {
  return predict_proba(model, RowSet::dense(instance.matrix));
}

double example_loss(const Logits& logits, Outcome label, double weight) {
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  return weight * (lse - logits[static_cast<std::size_t>(label)]);
}

void accumulate_backward(const CnnModel& model, const ForwardCache& cache, Outcome label, double weight,
                         bool include_conv, Gradients& into) {
  if (cache.model != &model || cache.conv_generation != model.conv_generation() ||
      cache.fc_generation != model.fc_generation()) {
    throw_data("stale forward cache: model parameters changed since the forward pass");
  }
  const std::size_t f_count = model.num_filters();
  const auto& k = kernels::active();

  auto d_logits = softmax(cache.logits);
  d_logits[static_cast<std::size_t>(label)] -= 1.0;
  for (auto& d : d_logits) d *= weight;

  for (std::size_t cls = 0; cls < kNumClasses; ++cls) {
    into.fc_bias[cls] += d_logits[cls];
    k.axpy(d_logits[cls], cache.dropped.data(), into.fc_weights.row(cls).data(), f_count);
  }
  if (!include_conv) return;
  const Matrix& w = model.fc_weights();
  for (std::size_t f = 0; f < f_count; ++f) {
    if (!cache.active[f] || cache.dropout_scale[f] == 0.0) continue;
    const double d_pooled = (d_logits[0] * w(0, f) + d_logits[1] * w(1, f)) * cache.dropout_scale[f];
    k.axpy(d_pooled, cache.rows.row(cache.argmax[f]).data(), into.conv.row(f).data(), model.dimension());
  }
}

Gradients backward(const CnnModel& model, const ForwardCache& cache, Outcome label, double weight) {
  Gradients g = Gradients::zeros_like(model);
  accumulate_backward(model, cache, label, weight, true, g);
  return g;
}

}  // namespace ccnn
