// SPDX-License-Identifier: Apache-2.0
#pragma once

// Filter-height-1 convolution over concept rows, ReLU, max-pool over rows,
// dropout on the pooled features and a two-unit linear head.
//
//   score[i][f] = <row_i, filter_f>            (no conv bias)
//   pooled[f]   = max_i ReLU(score[i][f])      (lowest row wins ties)
//   logits      = W_fc * dropout(pooled) + b_fc
//
// Parameter counts: conv F*D, head 2F + 2.

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ccnn/embedding.hpp"
#include "ccnn/matrix.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

inline constexpr std::size_t kNumClasses = 2;
using Logits = std::array<double, kNumClasses>;

struct ParameterCounts {
  std::size_t conv = 0;
  std::size_t fc = 0;

  bool operator==(const ParameterCounts&) const = default;
};

constexpr ParameterCounts parameter_counts(std::size_t num_filters, std::size_t dimension) {
  return {num_filters * dimension, kNumClasses * num_filters + kNumClasses};
}

class CnnModel {
 public:
  /// Shapes must agree (conv F x D, fc 2 x F); every value finite and
  /// 0 <= dropout_rate < 1. Throws Error(data) / Error(numeric).
  CnnModel(Matrix conv_filters, Matrix fc_weights, Logits fc_bias, double dropout_rate,
           std::uint64_t init_seed);

  std::size_t num_filters() const noexcept { return conv_.rows(); }
  std::size_t dimension() const noexcept { return conv_.cols(); }
  double dropout_rate() const noexcept { return dropout_rate_; }
  std::uint64_t init_seed() const noexcept { return init_seed_; }
  ParameterCounts parameter_counts() const { return ccnn::parameter_counts(num_filters(), dimension()); }

  const Matrix& conv_filters() const noexcept { return conv_; }
  const Matrix& fc_weights() const noexcept { return fc_w_; }
  const Logits& fc_bias() const noexcept { return fc_b_; }

  // Mutable access marks the group as changed, invalidating caches built
  // from the previous values.
  Matrix& mutable_conv_filters() {
    ++conv_generation_;
    return conv_;
  }
  Matrix& mutable_fc_weights() {
    ++fc_generation_;
    return fc_w_;
  }
  Logits& mutable_fc_bias() {
    ++fc_generation_;
    return fc_b_;
  }

  std::uint64_t conv_generation() const noexcept { return conv_generation_; }
  std::uint64_t fc_generation() const noexcept { return fc_generation_; }

  /// Parameter equality; generation counters are ignored.
  bool same_parameters(const CnnModel& o) const {
    return conv_ == o.conv_ && fc_w_ == o.fc_w_ && fc_b_ == o.fc_b_ && dropout_rate_ == o.dropout_rate_;
  }

 private:
  Matrix conv_;
  Matrix fc_w_;
  Logits fc_b_;
  double dropout_rate_;
  std::uint64_t init_seed_;
  std::uint64_t conv_generation_ = 0;
  std::uint64_t fc_generation_ = 0;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)): conv uses
/// (D, F), the head (F, 2). Draw order: conv row-major, then head
/// row-major; bias starts at zero. Rng is Rng(seed).
CnnModel init_model(std::size_t num_filters, std::size_t dimension, double dropout_rate, std::uint64_t seed);

struct PoolResult {
  Matrix scores;                   ///< rows x F, before ReLU
  std::vector<double> pooled;      ///< F
  std::vector<std::size_t> argmax; ///< winning row per filter
};

/// Dense reference of the convolution + ReLU + max-pool stage.
PoolResult conv_maxpool(const Matrix& instance, const Matrix& conv_filters);

/// Rows of one instance: either every row of a dense matrix, or row ids
/// into a shared table.
class RowSet {
 public:
  static RowSet dense(const Matrix& m) { return RowSet(&m, {}); }
  static RowSet indexed(const Matrix& store, std::span<const std::uint32_t> ids) { return RowSet(&store, ids); }

  std::size_t size() const { return ids_.empty() ? store_->rows() : ids_.size(); }
  std::size_t dimension() const { return store_->cols(); }
  /// Index into store() of the i-th row.
  std::size_t store_row(std::size_t i) const { return ids_.empty() ? i : ids_[i]; }
  std::span<const double> row(std::size_t i) const { return store_->row(store_row(i)); }
  const Matrix& store() const { return *store_; }

 private:
  RowSet(const Matrix* store, std::span<const std::uint32_t> ids) : store_(store), ids_(ids) {}
  const Matrix* store_;
  std::span<const std::uint32_t> ids_;
};

/// Scores of every row of a store against the current filters. Valid until
/// the conv filters change; forward() checks the stamp.
struct StoreScores {
  Matrix values;  ///< store rows x F
  const Matrix* store = nullptr;
  const CnnModel* model = nullptr;
  std::uint64_t conv_generation = 0;
};

StoreScores score_store(const CnnModel& model, const Matrix& store);

enum class Mode { train, eval };

inline constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

struct ForwardCache {
  const CnnModel* model = nullptr;
  std::uint64_t conv_generation = 0;
  std::uint64_t fc_generation = 0;
  RowSet rows = RowSet::dense(empty_matrix());
  std::vector<std::size_t> argmax;  ///< row position per filter
  std::vector<bool> active;         ///< ReLU active at the winning row
  std::vector<double> pooled;
  std::vector<double> dropout_scale;  ///< 0 or 1/(1-rate) in train mode, 1 in eval mode
  std::vector<double> dropped;        ///< pooled * dropout_scale
  Logits logits{};

 private:
  static const Matrix& empty_matrix() {
    static const Matrix m;
    return m;
  }
};

/// Train mode draws one uniform per filter from `rng` (dropped when
/// u < rate); eval mode ignores rng. If `scores` is given it must come from
/// score_store on the same store and current filters. The cache refers to
/// the instance rows and must not outlive them.
ForwardCache forward(const CnnModel& model, RowSet rows, Mode mode, Rng* rng = nullptr,
                     const StoreScores* scores = nullptr);

/// Softmax probability of the positive class.
double positive_probability(const Logits& logits);

double predict_proba(const CnnModel& model, RowSet rows, const StoreScores* scores = nullptr);
double predict_proba(const CnnModel& model, const EncodedInstance& instance);

struct Gradients {
  Matrix conv;
  Matrix fc_weights;
  Logits fc_bias{};

  static Gradients zeros_like(const CnnModel& model) {
    return {Matrix(model.num_filters(), model.dimension()), Matrix(kNumClasses, model.num_filters()), {}};
  }
};

/// Per-example cross-entropy loss, scaled by weight.
double example_loss(const Logits& logits, Outcome label, double weight = 1.0);

/// Exact gradient of weight * cross-entropy. Throws Error(data) if the model
/// changed since the forward pass that produced the cache.
Gradients backward(const CnnModel& model, const ForwardCache& cache, Outcome label, double weight = 1.0);

/// Adds the gradient into `into`. The conv group is skipped when
/// include_conv is false.
void accumulate_backward(const CnnModel& model, const ForwardCache& cache, Outcome label, double weight,
                         bool include_conv, Gradients& into);

}  // namespace ccnn
