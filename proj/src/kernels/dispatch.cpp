// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "scenecap/kernels.hpp"

namespace scenecap::kernels {
namespace {

constexpr KernelTable kScalar{
    Backend::kScalar,          "scalar",
    &detail::dot_scalar,       &detail::axpy_scalar,
    &detail::gemv_scalar,      &detail::gemv_t_acc_scalar,
    &detail::ger_acc_scalar,
};

#if defined(SCENECAP_WITH_AVX2)
constexpr KernelTable kAvx2{
    Backend::kAvx2,          "avx2",
    &detail::dot_avx2,       &detail::axpy_avx2,
    &detail::gemv_avx2,      &detail::gemv_t_acc_avx2,
    &detail::ger_acc_avx2,
};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

#if defined(SCENECAP_WITH_NEON)
constexpr KernelTable kNeon{
    Backend::kNeon,          "neon",
    &detail::dot_neon,       &detail::axpy_neon,
    &detail::gemv_neon,      &detail::gemv_t_acc_neon,
    &detail::ger_acc_neon,
};
#endif

const KernelTable* widest() {
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &kScalar;
}

const KernelTable* initial() {
  const char* env = std::getenv("SCENECAP_SIMD");
  if (env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && avx2_table() != nullptr) return avx2_table();
    if (want == "neon" && neon_table() != nullptr) return neon_table();
  }
  return widest();
}

const KernelTable*& current() {
  static const KernelTable* table = initial();
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(SCENECAP_WITH_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(SCENECAP_WITH_NEON)
  return &kNeon;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current(); }

bool select(Backend backend) {
  const KernelTable* table = nullptr;
  switch (backend) {
    case Backend::kScalar: table = &kScalar; break;
    case Backend::kAvx2: table = avx2_table(); break;
    case Backend::kNeon: table = neon_table(); break;
  }
  if (table == nullptr) return false;
  current() = table;
  return true;
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

}  // namespace scenecap::kernels
