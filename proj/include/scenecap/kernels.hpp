// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 inner-loop kernels. Every kernel has a scalar reference
// implementation; vectorized variants (AVX2+FMA on x86-64, NEON on AArch64)
// are selected once at startup from the CPU's reported features.
//
// All matrices are row-major and densely packed (leading dimension == cols).

#pragma once

#include <cstddef>
#include <string_view>

namespace scenecap::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  Backend backend;
  const char* name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x, W is rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += W^T x, W is rows x cols, x has rows entries, y has cols entries
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
  // A += x y^T, A is rows x cols
  void (*ger_acc)(const double* x, std::size_t rows, const double* y, std::size_t cols,
                  double* a);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The table every tensor op routes through. Chosen on first use: the widest
// supported backend, unless SCENECAP_SIMD=scalar|avx2|neon says otherwise.
const KernelTable& active();

// Switches the active backend; returns false (and leaves the selection
// unchanged) when the backend is unavailable. Not thread-safe; meant for
// tests and benchmarks that compare backends.
bool select(Backend backend);

std::string_view backend_name(Backend backend);

}  // namespace scenecap::kernels
