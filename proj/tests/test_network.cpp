// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include "ccnn/error.hpp"
#include "ccnn/kernels.hpp"
#include "ccnn/network.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ccnn;

namespace {

Matrix rows_of(std::initializer_list<std::array<double, 2>> rows) {
  Matrix m(rows.size(), 2);
  std::size_t i = 0;
  for (const auto& r : rows) {
    m(i, 0) = r[0];
    m(i, 1) = r[1];
    ++i;
  }
  return m;
}

Matrix body_pain_filter() {
  Matrix f(1, 2);
  f(0, 0) = -6.0;
  f(0, 1) = -1.0;
  return f;
}

// Central-difference derivative of the oracle loss w.r.t. one parameter.
double numeric_derivative(double& param, auto&& loss, double eps) {
  const double saved = param;
  param = saved + eps;
  const double up = loss();
  param = saved - eps;
  const double down = loss();
  param = saved;
  return (up - down) / (2.0 * eps);
}

}  // namespace

TEST_CASE("worked example row scores and pooled values") {
  const auto p1 = conv_maxpool(rows_of({{-6.7620, -0.6463}, {-0.0534, 0.0267}}), body_pain_filter());
  CHECK(std::abs(p1.scores(0, 0) - 41.2183) < 1e-3);
  CHECK(std::abs(p1.scores(1, 0) - 0.2937) < 1e-3);
  CHECK(std::abs(p1.pooled[0] - 41.2183) < 1e-3);
  CHECK(p1.argmax[0] == 0);

  const auto p2 =
      conv_maxpool(rows_of({{-0.0100, 0.0314}, {-4.5000, -0.8794}, {-1.2000, -0.1754}}), body_pain_filter());
  CHECK(std::abs(p2.scores(0, 0) - 0.0286) < 1e-3);
  CHECK(std::abs(p2.scores(1, 0) - 27.8794) < 1e-3);
  CHECK(std::abs(p2.scores(2, 0) - 7.3754) < 1e-3);
  CHECK(std::abs(p2.pooled[0] - 27.8794) < 1e-3);
  CHECK(p2.argmax[0] == 1);
}

TEST_CASE("conv_maxpool edge cases") {
  const Matrix x = rows_of({{1.0, 2.0}, {-3.0, 0.5}});
  const auto zero = conv_maxpool(x, Matrix(1, 2));
  CHECK(zero.pooled[0] == 0.0);
  Matrix neg(1, 2);
  neg(0, 0) = neg(0, 1) = -10.0;
  CHECK(conv_maxpool(rows_of({{1.0, 1.0}}), neg).pooled[0] == 0.0);
  // equal rows: lowest index wins
  Matrix one(1, 2, 1.0);
  CHECK(conv_maxpool(rows_of({{0.5, 0.5}, {1.0, 1.0}, {1.0, 1.0}}), one).argmax[0] == 1);
  CHECK_THROWS_AS(conv_maxpool(Matrix(0, 2), one), Error);
  CHECK_THROWS_AS(conv_maxpool(Matrix(2, 3), one), Error);
}

TEST_CASE("parameter counts for common embedding widths") {
  CHECK(parameter_counts(100, 145) == ParameterCounts{14'500, 202});
  CHECK(parameter_counts(100, 768) == ParameterCounts{76'800, 202});
  CHECK(parameter_counts(100, 1536) == ParameterCounts{153'600, 202});
  CHECK(parameter_counts(100, 3072) == ParameterCounts{307'200, 202});
  const auto m = init_model(100, 145, 0.5, 1);
  CHECK(m.parameter_counts() == ParameterCounts{14'500, 202});
  CHECK(m.conv_filters().size() == 14'500);
  CHECK(m.fc_weights().size() + m.fc_bias().size() == 202);
  CHECK(init_model(100, 3072, 0.5, 1).conv_filters().size() == 307'200);
}

TEST_CASE("init_model is seeded and within the Glorot bound") {
  const auto a = init_model(10, 20, 0.5, 42);
  CHECK(a.same_parameters(init_model(10, 20, 0.5, 42)));
  CHECK_FALSE(a.same_parameters(init_model(10, 20, 0.5, 43)));
  const double conv_bound = std::sqrt(6.0 / 30.0), fc_bound = std::sqrt(6.0 / 12.0);
  for (double w : a.conv_filters().values()) CHECK(std::abs(w) <= conv_bound);
  for (double w : a.fc_weights().values()) CHECK(std::abs(w) <= fc_bound);
  CHECK(a.fc_bias() == Logits{0.0, 0.0});
  // first conv weight from the documented draw
  Rng rng(42);
  CHECK(a.conv_filters()(0, 0) == rng.uniform(-conv_bound, conv_bound));
  CHECK_THROWS_AS(init_model(0, 3, 0.5, 1), Error);
  CHECK_THROWS_AS(init_model(3, 0, 0.5, 1), Error);
}

TEST_CASE("model constructor validation") {
  CHECK_THROWS_AS(CnnModel(Matrix(2, 3), Matrix(2, 3), {}, 0.5, 0), Error);
  CHECK_THROWS_AS(CnnModel(Matrix(2, 3), Matrix(2, 2), {}, 1.0, 0), Error);
  Matrix bad(2, 3);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(CnnModel(bad, Matrix(2, 2), {}, 0.5, 0), Error);
}

TEST_CASE("softmax head identities") {
  CHECK(positive_probability({0.0, 0.0}) == 0.5);
  for (double z : {-3.0, 0.0, 2.5}) {
    for (double c : {-4.0, -0.5, 0.0, 1.0, 7.0}) {
      CHECK(positive_probability({z, z + c}) == doctest::Approx(1.0 / (1.0 + std::exp(-c))).epsilon(1e-14));
    }
  }
  CHECK(example_loss({0.0, 0.0}, Outcome::positive) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(example_loss({0.0, 0.0}, Outcome::negative) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(example_loss({-50.0, 50.0}, Outcome::positive) < 1e-40);
  CHECK(std::isfinite(example_loss({1000.0, -1000.0}, Outcome::positive)));
}

TEST_CASE("eval forward is deterministic, linear in pooled, and probabilities are valid") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = oracle::random_model(rng, 4, 6);
    const Matrix x = oracle::random_matrix(rng, 5, 6);
    const auto a = forward(model, RowSet::dense(x), Mode::eval);
    const auto b = forward(model, RowSet::dense(x), Mode::eval);
    CHECK(a.logits == b.logits);
    const auto pool = conv_maxpool(x, model.conv_filters());
    for (std::size_t c = 0; c < 2; ++c) {
      double z = model.fc_bias()[c];
      for (std::size_t f = 0; f < 4; ++f) z += model.fc_weights()(c, f) * pool.pooled[f];
      CHECK(a.logits[c] == doctest::Approx(z).epsilon(1e-12));
    }
    const double p = positive_probability(a.logits);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    const Logits flipped{a.logits[1], a.logits[0]};
    CHECK(p + positive_probability(flipped) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("row permutation leaves logits unchanged") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto model = oracle::random_model(rng, 5, 4);
    const Matrix x = oracle::random_matrix(rng, 7, 4);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    Matrix y(7, 4);
    for (std::size_t r = 0; r < 7; ++r) std::copy(x.row(perm[r]).begin(), x.row(perm[r]).end(), y.row(r).begin());
    CHECK(forward(model, RowSet::dense(x), Mode::eval).logits == forward(model, RowSet::dense(y), Mode::eval).logits);
  }
}

TEST_CASE("dropout behaviour in train mode") {
  Rng init(3);
  const Matrix x = oracle::random_matrix(init, 4, 5);
  const auto no_drop = CnnModel(oracle::random_matrix(init, 6, 5), oracle::random_matrix(init, 2, 6), {0.1, -0.2},
                                0.0, 0);
  Rng r0(1);
  CHECK(forward(no_drop, RowSet::dense(x), Mode::train, &r0).logits ==
        forward(no_drop, RowSet::dense(x), Mode::eval).logits);

  const auto half = CnnModel(no_drop.conv_filters(), no_drop.fc_weights(), no_drop.fc_bias(), 0.5, 0);
  Rng r1(99), r2(99);
  const auto a = forward(half, RowSet::dense(x), Mode::train, &r1);
  const auto b = forward(half, RowSet::dense(x), Mode::train, &r2);
  CHECK(a.dropout_scale == b.dropout_scale);
  CHECK(a.logits == b.logits);
  for (std::size_t f = 0; f < 6; ++f) {
    CHECK((a.dropout_scale[f] == 0.0 || a.dropout_scale[f] == 2.0));
    CHECK(a.dropped[f] == a.pooled[f] * a.dropout_scale[f]);
  }
  // documented mask: one uniform per filter, dropped when u < rate
  Rng r3(99);
  for (std::size_t f = 0; f < 6; ++f) CHECK((r3.uniform() < 0.5) == (a.dropout_scale[f] == 0.0));
  CHECK_THROWS_AS(forward(half, RowSet::dense(x), Mode::train, nullptr), Error);
}

TEST_CASE("dropout keep rate over many draws") {
  Rng init(4);
  const auto model = oracle::random_model(init, 100, 3, 0.5);
  const Matrix x = oracle::random_matrix(init, 3, 3);
  Rng rng(5);
  std::size_t kept = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    const auto c = forward(model, RowSet::dense(x), Mode::train, &rng);
    for (double s : c.dropout_scale) kept += s != 0.0;
    total += 100;
  }
  CHECK(std::abs(static_cast<double>(kept) / static_cast<double>(total) - 0.5) < 0.02);
}

TEST_CASE("bias gradient equals softmax minus one-hot") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = oracle::random_model(rng, 3, 4);
    const Matrix x = oracle::random_matrix(rng, 5, 4);
    const Outcome y = oracle::random_label(rng);
    const auto c = forward(model, RowSet::dense(x), Mode::eval);
    const auto g = backward(model, c, y);
    const double p1 = positive_probability(c.logits);
    CHECK(g.fc_bias[1] == doctest::Approx(p1 - (y == Outcome::positive)).epsilon(1e-14));
    CHECK(g.fc_bias[0] == doctest::Approx(1.0 - p1 - (y == Outcome::negative)).epsilon(1e-14));
  }
}

TEST_CASE("inactive filter receives zero conv gradient") {
  Matrix conv(2, 2);
  conv(0, 0) = conv(0, 1) = -1.0;  // all scores negative on positive rows
  conv(1, 0) = conv(1, 1) = 1.0;
  Matrix fc(2, 2, 0.3);
  fc(1, 0) = -0.7;
  fc(1, 1) = -0.4;
  const CnnModel model(conv, fc, {0.0, 0.0}, 0.5, 0);
  const Matrix x = rows_of({{1.0, 2.0}, {0.5, 0.25}});
  const auto c = forward(model, RowSet::dense(x), Mode::eval);
  CHECK(c.pooled[0] == 0.0);
  const auto g = backward(model, c, Outcome::positive);
  CHECK(g.conv(0, 0) == 0.0);
  CHECK(g.conv(0, 1) == 0.0);
  CHECK(g.conv(1, 0) != 0.0);
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(31337);
  int models = 0;
  double worst = 0.0;
  while (models < 40) {
    const std::size_t F = 1 + rng.below(4), D = 1 + rng.below(8), rows = 1 + rng.below(5);
    const auto model = oracle::random_model(rng, F, D, 0.5);
    const Matrix x = oracle::random_matrix(rng, rows, D);
    const Outcome y = oracle::random_label(rng);
    Rng drop(rng.next_u64());
    const auto cache = forward(model, RowSet::dense(x), Mode::train, &drop);

    // skip models sitting on a ReLU or max-pool kink
    const auto pool = conv_maxpool(x, model.conv_filters());
    bool kink = false;
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double s = pool.scores(r, f);
        if (std::abs(s) < 1e-3) kink = true;
        if (r != pool.argmax[f] && std::abs(s - pool.scores(pool.argmax[f], f)) < 1e-3) kink = true;
      }
    }
    if (kink) continue;
    ++models;

    const auto g = backward(model, cache, y);
    Matrix conv = model.conv_filters(), fc = model.fc_weights();
    Logits b = model.fc_bias();
    auto loss = [&] { return oracle::loss_with_mask(conv, fc, b, x, cache.dropout_scale, y); };
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-7}); };
    for (std::size_t i = 0; i < conv.size(); ++i) {
      worst = std::max(worst, rel(g.conv.values()[i], numeric_derivative(conv.values()[i], loss, 1e-5)));
    }
    for (std::size_t i = 0; i < fc.size(); ++i) {
      worst = std::max(worst, rel(g.fc_weights.values()[i], numeric_derivative(fc.values()[i], loss, 1e-5)));
    }
    for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, rel(g.fc_bias[i], numeric_derivative(b[i], loss, 1e-5)));
  }
  MESSAGE("max relative gradient error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("stale cache and stale store scores are rejected") {
  Rng rng(2);
  auto model = oracle::random_model(rng, 3, 4);
  const Matrix x = oracle::random_matrix(rng, 3, 4);
  const auto cache = forward(model, RowSet::dense(x), Mode::eval);
  const auto store = score_store(model, x);
  model.mutable_conv_filters()(0, 0) += 1.0;
  CHECK_THROWS_AS(backward(model, cache, Outcome::positive), Error);
  const std::vector<std::uint32_t> ids{0, 2};
  CHECK_THROWS_AS(forward(model, RowSet::indexed(x, ids), Mode::eval, nullptr, &store), Error);
  auto model2 = model;
  const auto c2 = forward(model2, RowSet::dense(x), Mode::eval);
  model2.mutable_fc_bias()[0] = 0.5;
  CHECK_THROWS_AS(backward(model2, c2, Outcome::negative), Error);
}

TEST_CASE("indexed forward with store scores equals dense forward") {
  Rng rng(44);
  const auto model = oracle::random_model(rng, 6, 5);
  const Matrix store = oracle::random_matrix(rng, 12, 5);
  const auto scores = score_store(model, store);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::uint32_t> ids(1 + rng.below(6));
    for (auto& id : ids) id = static_cast<std::uint32_t>(rng.below(12));
    Matrix dense(ids.size(), 5);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      std::copy(store.row(ids[r]).begin(), store.row(ids[r]).end(), dense.row(r).begin());
    }
    const auto a = forward(model, RowSet::indexed(store, ids), Mode::eval, nullptr, &scores);
    const auto b = forward(model, RowSet::dense(dense), Mode::eval);
    CHECK(a.argmax == b.argmax);
    CHECK(a.pooled == b.pooled);
    CHECK(a.logits == b.logits);
  }
}

TEST_CASE("dimension mismatch in forward") {
  Rng rng(1);
  const auto model = oracle::random_model(rng, 2, 3);
  CHECK_THROWS_AS(forward(model, RowSet::dense(Matrix(2, 4)), Mode::eval), Error);
  CHECK_THROWS_AS(forward(model, RowSet::dense(Matrix(0, 3)), Mode::eval), Error);
}

TEST_CASE("forward agrees between kernel variants") {
  Rng rng(6);
  const auto model = oracle::random_model(rng, 8, 33);
  const Matrix x = oracle::random_matrix(rng, 9, 33);
  const std::string before(kernels::active().name);
  std::vector<Logits> results;
  for (const auto* ks : kernels::available_kernels()) {
    kernels::select(ks->name);
    results.push_back(forward(model, RowSet::dense(x), Mode::eval).logits);
  }
  kernels::select(before);
  for (const auto& r : results) {
    CHECK(r[0] == doctest::Approx(results[0][0]).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(results[0][1]).epsilon(1e-12));
  }
}
