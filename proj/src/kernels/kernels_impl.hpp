// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace scenecap::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                       double* y);
void ger_acc_scalar(const double* x, std::size_t rows, const double* y, std::size_t cols,
                    double* a);

#if defined(SCENECAP_WITH_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void gemv_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
void ger_acc_avx2(const double* x, std::size_t rows, const double* y, std::size_t cols,
                  double* a);
#endif

#if defined(SCENECAP_WITH_NEON)
double dot_neon(const double* a, const double* b, std::size_t n);
void axpy_neon(double alpha, const double* x, double* y, std::size_t n);
void gemv_neon(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc_neon(const double* w, std::size_t rows, std::size_t cols, const double* x,
                     double* y);
void ger_acc_neon(const double* x, std::size_t rows, const double* y, std::size_t cols,
                  double* a);
#endif

}  // namespace scenecap::kernels::detail
