// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scenecap/kernels.hpp"

namespace scenecap {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<Real> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                " does not match shape " + scenecap::shape_string(rows_, cols_));
  }
}

Mat::Mat(std::initializer_list<std::initializer_list<Real>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

std::string Mat::shape_string() const { return scenecap::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

void require_same_shape(std::size_t rows_a, std::size_t cols_a, std::size_t rows_b,
                        std::size_t cols_b, const char* what) {
  if (rows_a != rows_b || cols_a != cols_b) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_string(rows_a, cols_a) + " vs " +
                                shape_string(rows_b, cols_b));
  }
}

Real sigmoid(Real x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

Vec sigmoid(std::span<const Real> v) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](Real x) { return sigmoid(x); });
  return out;
}

Vec tanh(std::span<const Real> v) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](Real x) { return std::tanh(x); });
  return out;
}

Vec hadamard(std::span<const Real> a, std::span<const Real> b) {
  require_same_shape(a.size(), 1, b.size(), 1, "hadamard");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vec add(std::span<const Real> a, std::span<const Real> b) {
  require_same_shape(a.size(), 1, b.size(), 1, "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec matvec(const Mat& w, std::span<const Real> x) {
  if (w.cols() != x.size()) {
    throw std::invalid_argument("matvec: shape mismatch " + w.shape_string() + " vs (" +
                                std::to_string(x.size()) + "x1)");
  }
  Vec out(w.rows());
  kernels::active().gemv(w.data(), w.rows(), w.cols(), x.data(), out.data());
  return out;
}

Vec matvec_t(const Mat& w, std::span<const Real> x) {
  if (w.rows() != x.size()) {
    throw std::invalid_argument("matvec_t: shape mismatch " + w.shape_string() + " vs (" +
                                std::to_string(x.size()) + "x1)");
  }
  Vec out(w.cols(), 0.0);
  kernels::active().gemv_t_acc(w.data(), w.rows(), w.cols(), x.data(), out.data());
  return out;
}

Vec affine(const Mat& w, std::span<const Real> x, std::optional<std::span<const Real>> b) {
  Vec out = matvec(w, x);
  if (b) {
    require_same_shape(out.size(), 1, b->size(), 1, "affine bias");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*b)[i];
  }
  return out;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_string() + " vs " +
                                b.shape_string());
  }
  Mat out(a.rows(), b.cols());
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    k.gemv_t_acc(b.data(), b.rows(), b.cols(), a.row(r).data(), out.row(r).data());
  }
  return out;
}

Mat diag(std::span<const Real> v) {
  Mat out(v.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i, i) = v[i];
  return out;
}

Vec softmax(std::span<const Real> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  Real total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (Real& p : out) p /= total;
  return out;
}

Vec log_softmax(std::span<const Real> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real total = 0.0;
  for (Real x : logits) total += std::exp(x - mx);
  const Real lse = mx + std::log(total);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
  require_same_shape(a.size(), 1, b.size(), 1, "dot");
  return kernels::active().dot(a.data(), b.data(), a.size());
}

Real sum(std::span<const Real> v) {
  Real acc = 0.0;
  for (Real x : v) acc += x;
  return acc;
}

Real l2_norm(std::span<const Real> v) {
  Real acc = 0.0;
  for (Real x : v) acc += x * x;
  return std::sqrt(acc);
}

bool all_finite(std::span<const Real> v) {
  return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
}

std::size_t argmax(std::span<const Real> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Vec concat(std::span<const Real> a, std::span<const Real> b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Real uniform01(std::mt19937_64& rng) {
  return static_cast<Real>(rng() >> 11) * 0x1.0p-53;
}

void fill_uniform(std::span<Real> out, Real lo, Real hi, std::mt19937_64& rng) {
  for (Real& x : out) x = lo + (hi - lo) * uniform01(rng);
}

}  // namespace scenecap
