// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "scenecap/gradcheck.hpp"
#include "scenecap/kernels.hpp"
#include "scenecap/tape.hpp"
#include "scenecap/tensor.hpp"
#include "test_util.hpp"

using namespace scenecap;
using test::rand_mat;
using test::rand_vec;

TEST_CASE("softmax: worked values") {
  const Vec a = softmax(Vec{0, 0, 0});
  for (Real x : a) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const Vec b = softmax(Vec{0, std::log(2.0)});
  CHECK(b[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  const Vec c = softmax(Vec{1000, 1000});
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 0.5);
  CHECK_THROWS_WITH(softmax(Vec{}), "empty logits");
  CHECK_THROWS_WITH(log_softmax(Vec{}), "empty logits");
}

TEST_CASE("softmax: simplex and shift invariance") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec v = rand_vec(1 + trial % 17, rng, -20, 20);
    const Vec p = softmax(v);
    Real total = 0.0;
    for (Real x : p) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
    Vec shifted = v;
    for (Real& x : shifted) x += 7.25;
    CHECK(test::max_abs_diff(softmax(shifted), p) <= 1e-12);
    const Vec lp = log_softmax(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::exp(lp[i]) == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

TEST_CASE("elementwise ops and affine") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(tanh(Vec{0.0})[0] == 0.0);
  CHECK(hadamard(Vec{1, 2}, Vec{3, 4}) == Vec{3, 8});
  const Mat w{{1, 2}, {3, 4}};
  CHECK(affine(w, Vec{1, 1}) == Vec{3, 7});
  const Vec b{10, 20};
  CHECK(affine(w, Vec{1, 1}, std::span<const Real>(b)) == Vec{13, 27});
  CHECK_THROWS_WITH(hadamard(Vec{1, 2}, Vec{1, 2, 3}), doctest::Contains("(2x1)"));
  CHECK_THROWS_WITH(hadamard(Vec{1, 2}, Vec{1, 2, 3}), doctest::Contains("(3x1)"));
  CHECK_THROWS_WITH(affine(w, Vec{1, 2, 3}), doctest::Contains("(2x2)"));
  CHECK(matmul(diag(Vec{2, 3}), w) == Mat{{2, 4}, {9, 12}});
}

TEST_CASE("ops are deterministic") {
  std::mt19937_64 rng(5);
  const Mat w = rand_mat(13, 29, rng);
  const Vec x = rand_vec(29, rng);
  CHECK(matvec(w, x) == matvec(w, x));
  CHECK(softmax(x) == softmax(x));
}

TEST_CASE("backward: worked gradients") {
  {
    Vec x{3.0};
    Tape t;
    const Var v = t.param(x);
    const Var y = t.mul(v, v);
    t.backward(y);
    CHECK(t.grad(v)[0] == 6.0);
  }
  {
    Vec x{0.0};
    Tape t;
    const Var v = t.param(x);
    t.backward(t.tanh(v));
    CHECK(t.grad(v)[0] == 1.0);
  }
  Vec x{1.0, 2.0};
  Tape t;
  const Var v = t.param(x);
  CHECK_THROWS_AS(t.backward(t.tanh(v)), std::invalid_argument);
}

namespace {

// A three-layer composite that touches every primitive.
struct Composite {
  Mat W1, W2, X, M;
  Vec b1, v, c;

  explicit Composite(std::mt19937_64& rng)
      : W1(rand_mat(6, 5, rng)),
        W2(rand_mat(4, 6, rng)),
        X(rand_mat(3, 5, rng)),
        M(rand_mat(4, 3, rng)),
        b1(rand_vec(6, rng)),
        v(rand_vec(5, rng)),
        c(rand_vec(3, rng)) {}

  Real run(Tape& t, bool backward, std::vector<Var>* leaves) {
    const Var w1 = t.param(W1), w2 = t.param(W2), x = t.param(X), m = t.param(M);
    const Var bb = t.param(b1), vv = t.param(v), cc = t.param(c);
    const Var h1 = t.tanh(t.add(t.matvec(w1, vv), bb));
    const Var h2 = t.sigmoid(t.matvec(w2, h1));
    const Var proj = t.matmul_nt(x, w1);                    // 3 x 6
    const Var shifted = t.add_row(proj, bb);                // 3 x 6
    const std::size_t rows[] = {2, 0};
    const Var picked = t.gather_rows(shifted, rows);        // 2 x 6
    const Real factors[] = {0.5, -1.5};
    const Var scaled = t.scale_rows(picked, factors);
    const Var col = t.column(scaled, 3);                    // 2
    const Var mix = t.matvec_t(m, h2);                      // 3
    const Var attn = t.softmax(t.mul(mix, cc));
    const Var logp = t.log_softmax(t.concat(attn, col));
    const Var loss = t.add(t.scale(t.sum(t.mul(logp, logp)), 0.25), t.pick(logp, 1));
    if (leaves) *leaves = {w1, w2, x, m, bb, vv, cc};
    if (backward) t.backward(loss);
    return t.scalar(loss);
  }
};

}  // namespace

TEST_CASE("backward: composite graph agrees with central differences") {
  std::mt19937_64 rng(11);
  Composite g(rng);
  Tape tape;
  std::vector<Var> leaves;
  g.run(tape, true, &leaves);
  std::vector<Vec> analytic;
  for (Var l : leaves) {
    const auto s = tape.grad(l);
    analytic.emplace_back(s.begin(), s.end());
  }
  std::vector<GradSlot> slots = {
      {"W1", g.W1.flat(), analytic[0]}, {"W2", g.W2.flat(), analytic[1]},
      {"X", g.X.flat(), analytic[2]},   {"M", g.M.flat(), analytic[3]},
      {"b1", g.b1, analytic[4]},        {"v", g.v, analytic[5]},
      {"c", g.c, analytic[6]}};
  const GradReport r = finite_diff_check(
      [&] {
        Tape t;
        return g.run(t, false, nullptr);
      },
      slots);
  CHECK(r.entry_count() == 30 + 24 + 15 + 12 + 6 + 5 + 3);
  CHECK(r.max_rel_error() < 1e-6);
}

TEST_CASE("finite_diff_check: quadratic form and constant") {
  std::mt19937_64 rng(2);
  const Mat A = rand_mat(6, 6, rng);
  Vec x = rand_vec(6, rng);
  auto f = [&] {
    Real s = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) s += x[i] * A(i, j) * x[j];
    return s;
  };
  Vec grad(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) grad[i] += (A(i, j) + A(j, i)) * x[j];
  const GradSlot slot{"x", x, grad};
  CHECK(finite_diff_check(f, std::span(&slot, 1)).max_rel_error() < 1e-9);

  const Vec zero(6, 0.0);
  const GradSlot zslot{"x", x, zero};
  const GradReport r = finite_diff_check([] { return 4.0; }, std::span(&zslot, 1));
  for (Real n : r.blocks[0].numeric) CHECK(std::abs(n) <= 1e-7);
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 1e-12) == doctest::Approx(1e-4));
}

namespace {

void check_backend_matches_scalar(const kernels::KernelTable& k) {
  const kernels::KernelTable& s = kernels::scalar_table();
  std::mt19937_64 rng(17);
  for (std::size_t rows = 1; rows <= 19; rows += 3) {
    for (std::size_t cols = 1; cols <= 67; cols += 5) {
      const Mat w = rand_mat(rows, cols, rng);
      const Vec x = rand_vec(cols, rng), xr = rand_vec(rows, rng);
      const Real tol = 1e-13 * static_cast<Real>(cols + rows);

      CHECK(k.dot(w.data(), x.data(), cols) == doctest::Approx(s.dot(w.data(), x.data(), cols)).epsilon(tol));

      Vec ya(rows), yb(rows);
      k.gemv(w.data(), rows, cols, x.data(), ya.data());
      s.gemv(w.data(), rows, cols, x.data(), yb.data());
      CHECK(test::max_abs_diff(ya, yb) <= tol);

      Vec ta(cols, 0.5), tb(cols, 0.5);
      k.gemv_t_acc(w.data(), rows, cols, xr.data(), ta.data());
      s.gemv_t_acc(w.data(), rows, cols, xr.data(), tb.data());
      CHECK(test::max_abs_diff(ta, tb) <= tol);

      Mat ga = w, gb = w;
      k.ger_acc(xr.data(), rows, x.data(), cols, ga.data());
      s.ger_acc(xr.data(), rows, x.data(), cols, gb.data());
      CHECK(test::max_abs_diff(ga.flat(), gb.flat()) <= tol);

      Vec aa = x, ab = x;
      k.axpy(-0.75, x.data(), aa.data(), cols);
      s.axpy(-0.75, x.data(), ab.data(), cols);
      CHECK(test::max_abs_diff(aa, ab) <= tol);
    }
  }
}

}  // namespace

TEST_CASE("kernels: vector backends match the scalar reference") {
  check_backend_matches_scalar(kernels::scalar_table());
  if (const auto* avx2 = kernels::avx2_table()) {
    MESSAGE("checking avx2");
    check_backend_matches_scalar(*avx2);
  }
  if (const auto* neon = kernels::neon_table()) {
    MESSAGE("checking neon");
    check_backend_matches_scalar(*neon);
  }
}

TEST_CASE("kernels: scalar reference against naive loops") {
  const auto& s = kernels::scalar_table();
  const Mat w{{1, 2, 3}, {4, 5, 6}};
  const Vec x{1, -1, 2}, r{2, -3};
  CHECK(s.dot(x.data(), x.data(), 3) == 6.0);
  Vec y(2);
  s.gemv(w.data(), 2, 3, x.data(), y.data());
  CHECK(y == Vec{5, 11});
  Vec t(3, 1.0);
  s.gemv_t_acc(w.data(), 2, 3, r.data(), t.data());
  CHECK(t == Vec{1 + 2 - 12, 1 + 4 - 15, 1 + 6 - 18});
  Mat a(2, 3);
  s.ger_acc(r.data(), 2, x.data(), 3, a.data());
  CHECK(a == Mat{{2, -2, 4}, {-3, 3, -6}});
}

TEST_CASE("kernels: switching backends keeps tensor ops equivalent") {
  std::mt19937_64 rng(23);
  const Mat w = rand_mat(37, 41, rng);
  const Vec x = rand_vec(41, rng);
  const auto original = kernels::active().backend;
  REQUIRE(kernels::select(kernels::Backend::kScalar));
  const Vec ref = matvec(w, x);
  for (auto b : {kernels::Backend::kAvx2, kernels::Backend::kNeon}) {
    if (!kernels::select(b)) continue;
    CHECK(kernels::active().backend == b);
    CHECK(test::max_abs_diff(matvec(w, x), ref) <= 1e-12);
  }
  CHECK(kernels::select(original));
  CHECK(kernels::backend_name(kernels::Backend::kScalar) == "scalar");
}
