// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scenecap/tensor.hpp"

namespace scenecap {

inline constexpr Real kRelErrorFloor = 1e-8;

/// |a - n| / max(|a|, |n|, 1e-8)
Real relative_error(Real analytic, Real numeric);

/// One parameter block to probe: `values` is perturbed in place (and
/// restored), `analytic` holds the gradient under test.
struct GradSlot {
  std::string name;
  std::span<Real> values;
  std::span<const Real> analytic;
};

struct GradBlockReport {
  std::string name;
  Vec analytic;
  Vec numeric;
  Vec rel_error;
};

struct GradReport {
  std::vector<GradBlockReport> blocks;

  /// Largest relative error over entries whose analytic or numeric
  /// gradient magnitude exceeds `min_magnitude`.
  Real max_rel_error(Real min_magnitude = 1e-8) const;
  /// Name of the block holding that entry (empty when none qualifies).
  std::string worst_block(Real min_magnitude = 1e-8) const;
  std::size_t entry_count() const;
};

/// Central differences (f(p+h) - f(p-h)) / 2h for every entry of every slot.
/// `f` must read the current contents of the slots' storage.
GradReport finite_diff_check(const std::function<Real()>& f, std::span<const GradSlot> slots,
                             Real step = 1e-5);

}  // namespace scenecap
