#include "doctest.h"
#include "music102/autodiff.hpp"
#include "music102/errors.hpp"
#include "music102/rng.hpp"
#include "support/gradcheck.hpp"

#include <cmath>

using namespace music102;
using namespace music102::testsupport;
using ad::Tape;
using ad::Var;

namespace {
// Wrap an op's output against a fixed random mask so the scalar root weights
// every output entry differently; uniform weights can hide transposed or
// misrouted gradients.
Var masked_sum(Tape& t, Var x, const Mat& mask) {
  return t.sum_all(t.mul(x, t.input(mask)));
}
}  // namespace

TEST_CASE("forward values: basic algebra") {
  Tape t;
  Var a = t.input(Mat(2, 2, {1, 2, 3, 4}));
  Var b = t.input(Mat(2, 2, {5, 6, 7, 8}));
  CHECK(t.value(t.add(a, b)).at(1, 1) == 12.0);
  CHECK(t.value(t.sub(a, b)).at(0, 0) == -4.0);
  CHECK(t.value(t.mul(a, b)).at(0, 1) == 12.0);
  CHECK(t.value(t.scale(a, -2.0)).at(1, 0) == -6.0);
  CHECK(t.value(t.matmul(a, b)).at(0, 0) == 19.0);
  CHECK(t.value(t.transpose(a)).at(0, 1) == 3.0);
  CHECK(t.value(t.sum_all(a)).at(0, 0) == 10.0);
  CHECK(t.value(t.reshape(a, 4, 1)).at(2, 0) == 3.0);
  CHECK(t.value(t.reshape(a, 1, 4)).at(0, 3) == 4.0);
}

TEST_CASE("shape violations throw") {
  Tape t;
  Var a = t.input(Mat(2, 3));
  Var b = t.input(Mat(2, 2));
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(t.reshape(a, 4, 2), ShapeError);
  CHECK_THROWS_AS(t.col_slice(a, 2, 2), ShapeError);
  CHECK_THROWS_AS(t.block_left(Mat::identity(4), a, 4), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);  // root must be scalar
}

TEST_CASE("softmax rows are normalized and shift-invariant") {
  Rng rng(11);
  Tape t;
  const Mat x = random_mat(rng, 5, 7, -4.0, 4.0);
  Mat shifted = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) shifted.at(i, j) += 123.0;
  const Mat y = t.value(t.softmax_rows(t.input(x)));
  const Mat y2 = t.value(t.softmax_rows(t.input(shifted)));
  for (int i = 0; i < y.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < y.cols; ++j) s += y.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(max_abs_diff(y, y2) < 1e-12);
}

TEST_CASE("bce-with-logits matches the naive formula where it is safe") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double z = rng.uniform(-10.0, 10.0);
    const double c = (rng.raw() & 1) ? 1.0 : 0.0;
    const double naive = -(c * std::log(1.0 / (1.0 + std::exp(-z))) +
                           (1.0 - c) * std::log(1.0 - 1.0 / (1.0 + std::exp(-z))));
    CHECK(bce_logit_term(z, c) == doctest::Approx(naive).epsilon(1e-9));
  }
  // And survives logits the naive formula overflows on.
  CHECK(std::isfinite(bce_logit_term(800.0, 0.0)));
  CHECK(std::isfinite(bce_logit_term(-800.0, 1.0)));
  CHECK(bce_logit_term(800.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("block ops match naive per-block loops") {
  Rng rng(5);
  const int block = 3, steps = 4, cols = 2;
  const Mat x = random_mat(rng, block * steps, cols);
  const Mat k = random_mat(rng, 5, block);
  Tape t;
  const Mat y = t.value(t.block_left(k, t.input(x), block));
  REQUIRE(y.rows == 5 * steps);
  for (int s = 0; s < steps; ++s)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int b = 0; b < block; ++b) acc += k.at(i, b) * x.at(s * block + b, j);
        CHECK(y.at(s * 5 + i, j) == doctest::Approx(acc).epsilon(1e-12));
      }

  const Mat m = t.value(t.block_mean(t.input(x), block));
  REQUIRE(m.rows == steps);
  for (int s = 0; s < steps; ++s) {
    double acc = 0.0;
    for (int b = 0; b < block; ++b)
      for (int j = 0; j < cols; ++j) acc += x.at(s * block + b, j);
    CHECK(m.at(s, 0) == doctest::Approx(acc / (block * cols)).epsilon(1e-12));
  }

  const Mat e = t.value(t.block_expand(t.input(m), block, cols));
  REQUIRE(e.rows == x.rows);
  for (int s = 0; s < steps; ++s)
    for (int b = 0; b < block; ++b)
      for (int j = 0; j < cols; ++j)
        CHECK(e.at(s * block + b, j) == m.at(s, 0));
}

TEST_CASE("norm gate rescales block columns to sigma(norm)") {
  Rng rng(9);
  const int block = 4, steps = 3, cols = 2;
  const Mat x = random_mat(rng, block * steps, cols);
  Tape t;
  const Mat y = t.value(t.norm_gate(t.input(x), block, Gate::Sigmoid));
  for (int s = 0; s < steps; ++s)
    for (int j = 0; j < cols; ++j) {
      double n2 = 0.0;
      for (int b = 0; b < block; ++b) n2 += x.at(s * block + b, j) * x.at(s * block + b, j);
      const double n = std::sqrt(n2);
      const double want = 1.0 / (1.0 + std::exp(-n));
      double yn2 = 0.0;
      for (int b = 0; b < block; ++b) yn2 += y.at(s * block + b, j) * y.at(s * block + b, j);
      CHECK(std::sqrt(yn2) == doctest::Approx(want).epsilon(1e-12));
      // Direction preserved: y = (sigma(n)/n) x.
      for (int b = 0; b < block; ++b)
        CHECK(y.at(s * block + b, j) ==
              doctest::Approx(want / n * x.at(s * block + b, j)).epsilon(1e-12));
    }
  // The relu-gated variant is the identity away from zero.
  const Mat yr = t.value(t.norm_gate(t.input(x), block, Gate::Relu));
  CHECK(max_abs_diff(yr, x) < 1e-12);
  // All-zero vectors stay zero.
  const Mat z = t.value(t.norm_gate(t.input(Mat(block, 1)), block, Gate::Sigmoid));
  CHECK(max_abs(z) == 0.0);
}

TEST_CASE("gradients match finite differences for every primitive") {
  Rng rng(42);
  const double tol = 1e-6;

  SUBCASE("add/sub/mul/scale chain") {
    const Mat mask = random_mat(rng, 3, 4);
    const double err = max_rel_grad_error(
        {random_mat(rng, 3, 4), random_mat(rng, 3, 4)},
        [&](Tape& t, const std::vector<Var>& p) {
          Var x = t.mul(t.add(p[0], p[1]), t.sub(p[0], t.scale(p[1], 0.7)));
          return masked_sum(t, x, mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("matmul and transpose") {
    const Mat mask = random_mat(rng, 3, 5);
    const double err = max_rel_grad_error(
        {random_mat(rng, 3, 4), random_mat(rng, 5, 4)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.matmul(p[0], t.transpose(p[1])), mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("reshape, slice, concat") {
    const Mat mask = random_mat(rng, 2, 9);
    const double err = max_rel_grad_error(
        {random_mat(rng, 3, 4), random_mat(rng, 2, 3)},
        [&](Tape& t, const std::vector<Var>& p) {
          Var r = t.reshape(p[0], 2, 6);
          Var s = t.col_slice(r, 1, 4);
          Var c = t.col_concat({s, p[1], t.col_slice(r, 0, 3)});
          return masked_sum(t, c, mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("column scale and shift") {
    const Mat mask = random_mat(rng, 4, 3);
    const double err = max_rel_grad_error(
        {random_mat(rng, 4, 3), random_mat(rng, 1, 3), random_mat(rng, 1, 3)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.col_shift(t.col_scale(p[0], p[1]), p[2]), mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("bias_ones") {
    const Mat mask = random_mat(rng, 4, 2);
    const double err = max_rel_grad_error(
        {random_mat(rng, 4, 2), random_mat(rng, 1, 1)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.bias_ones(p[0], p[1]), mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("block_left / block_mean / block_expand") {
    const Mat k = random_mat(rng, 2, 3);
    const Mat mask_bl = random_mat(rng, 8, 2);
    const Mat mask_m = random_mat(rng, 4, 1);
    const Mat mask_e = random_mat(rng, 12, 2);
    double err = max_rel_grad_error(
        {random_mat(rng, 12, 2)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.block_left(k, p[0], 3), mask_bl);
        });
    CHECK(err < tol);
    err = max_rel_grad_error(
        {random_mat(rng, 12, 2)},
        [&](Tape& t, const std::vector<Var>& p) {
          Var m = t.block_mean(p[0], 3);
          Var e = t.block_expand(m, 3, 2);
          return t.add(masked_sum(t, m, mask_m), masked_sum(t, e, mask_e));
        });
    CHECK(err < tol);
  }

  SUBCASE("softmax rows") {
    const Mat mask = random_mat(rng, 4, 6);
    const double err = max_rel_grad_error(
        {random_mat(rng, 4, 6, -3.0, 3.0)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.softmax_rows(p[0]), mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("sigmoid, relu, rsqrt_shift") {
    const Mat mask = random_mat(rng, 3, 5);
    double err = max_rel_grad_error(
        {random_mat(rng, 3, 5, -2.0, 2.0)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.sigmoid(p[0]), mask);
        });
    CHECK(err < tol);
    err = max_rel_grad_error(
        {random_mat_no_kink(rng, 3, 5)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.relu(p[0]), mask);
        });
    CHECK(err < tol);
    err = max_rel_grad_error(
        {random_mat(rng, 3, 5, 0.5, 2.0)},
        [&](Tape& t, const std::vector<Var>& p) {
          return masked_sum(t, t.rsqrt_shift(p[0], 1e-5), mask);
        });
    CHECK(err < tol);
  }

  SUBCASE("norm gate, both gates") {
    for (Gate gate : {Gate::Sigmoid, Gate::Relu}) {
      const Mat mask = random_mat(rng, 12, 3);
      const double err = max_rel_grad_error(
          {random_mat_no_kink(rng, 12, 3, 0.2)},  // healthy norms
          [&](Tape& t, const std::vector<Var>& p) {
            return masked_sum(t, t.norm_gate(p[0], 4, gate), mask);
          });
      CHECK(err < tol);
    }
  }

  SUBCASE("weighted bce with logits") {
    Mat target(6, 1), weight(6, 1);
    for (int i = 0; i < 6; ++i) {
      target.at(i, 0) = (rng.raw() & 1) ? 1.0 : 0.0;
      weight.at(i, 0) = (rng.raw() & 1) ? 2.0 : 1.0;
    }
    const double err = max_rel_grad_error(
        {random_mat(rng, 6, 1, -3.0, 3.0)},
        [&](Tape& t, const std::vector<Var>& p) {
          return t.weighted_bce_logits(p[0], target, weight);
        });
    CHECK(err < tol);
  }

  SUBCASE("a small composite network") {
    const double err = max_rel_grad_error(
        {random_mat(rng, 4, 3), random_mat(rng, 3, 3), random_mat(rng, 1, 3)},
        [&](Tape& t, const std::vector<Var>& p) {
          Var h = t.sigmoid(t.matmul(p[0], p[1]));
          Var y = t.softmax_rows(t.col_shift(h, p[2]));
          Mat target(4, 3), weight = Mat::ones(4, 3);
          target.at(0, 1) = 1.0;
          target.at(2, 2) = 1.0;
          return t.weighted_bce_logits(t.reshape(y, 12, 1),
                                       Mat(12, 1, target.data),
                                       Mat(12, 1, weight.data));
        });
    CHECK(err < tol);
  }
}

TEST_CASE("gradients flow only into params, not inputs") {
  Tape t;
  Var a = t.param(Mat(2, 2, {1, 2, 3, 4}));
  Var b = t.input(Mat(2, 2, {5, 6, 7, 8}));
  Var root = t.sum_all(t.mul(a, b));
  t.backward(root);
  CHECK(t.grad(a).size() == 4);
  CHECK(t.grad(a).at(0, 0) == 5.0);
  CHECK(t.grad(b).size() == 0);  // never materialized
}

TEST_CASE("backward twice produces identical gradients, not doubled ones") {
  Tape t;
  Var a = t.param(Mat(2, 1, {2.0, -1.0}));
  Var root = t.sum_all(t.mul(a, a));
  t.backward(root);
  const Mat first = t.grad(a);
  t.backward(root);
  CHECK(max_abs_diff(first, t.grad(a)) == 0.0);
  CHECK(first.at(0, 0) == 4.0);
  CHECK(first.at(1, 0) == -2.0);
}

TEST_CASE("fan-out accumulates gradients from every use") {
  Tape t;
  Var a = t.param(Mat(1, 1, {3.0}));
  Var root = t.sum_all(t.add(t.mul(a, a), t.scale(a, 5.0)));  // x^2 + 5x
  t.backward(root);
  CHECK(t.grad(a).at(0, 0) == doctest::Approx(11.0));  // 2x + 5
}
