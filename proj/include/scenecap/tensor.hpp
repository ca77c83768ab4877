// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense linear algebra over f64.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace scenecap {

using Real = double;
using Vec = std::vector<Real>;

/// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<Real> data);
  Mat(std::initializer_list<std::initializer_list<Real>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> flat() { return data_; }
  std::span<const Real> flat() const { return data_; }
  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }

  std::string shape_string() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

std::string shape_string(std::size_t rows, std::size_t cols);

// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(std::size_t rows_a, std::size_t cols_a, std::size_t rows_b,
                        std::size_t cols_b, const char* what);

Real sigmoid(Real x);
Vec sigmoid(std::span<const Real> v);
Vec tanh(std::span<const Real> v);
Vec hadamard(std::span<const Real> a, std::span<const Real> b);
Vec add(std::span<const Real> a, std::span<const Real> b);

/// W x (+ b).
Vec affine(const Mat& w, std::span<const Real> x, std::optional<std::span<const Real>> b = {});
Vec matvec(const Mat& w, std::span<const Real> x);
/// W^T x.
Vec matvec_t(const Mat& w, std::span<const Real> x);
Mat matmul(const Mat& a, const Mat& b);
Mat diag(std::span<const Real> v);

/// Numerically stable softmax (max subtracted). Throws "empty logits".
Vec softmax(std::span<const Real> logits);
Vec log_softmax(std::span<const Real> logits);

Real dot(std::span<const Real> a, std::span<const Real> b);
Real sum(std::span<const Real> v);
Real l2_norm(std::span<const Real> v);
bool all_finite(std::span<const Real> v);

/// Index of the maximum entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const Real> v);

Vec concat(std::span<const Real> a, std::span<const Real> b);

void fill_uniform(std::span<Real> out, Real lo, Real hi, std::mt19937_64& rng);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
Real uniform01(std::mt19937_64& rng);

}  // namespace scenecap
