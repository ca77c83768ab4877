// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenecap {

Real relative_error(Real analytic, Real numeric) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradReport finite_diff_check(const std::function<Real()>& f, std::span<const GradSlot> slots,
                             Real step) {
  GradReport report;
  report.blocks.reserve(slots.size());
  for (const GradSlot& slot : slots) {
    if (slot.values.size() != slot.analytic.size()) {
      throw std::invalid_argument("gradient slot '" + slot.name + "' has " +
                                  std::to_string(slot.values.size()) + " values but " +
                                  std::to_string(slot.analytic.size()) + " gradient entries");
    }
    GradBlockReport block;
    block.name = slot.name;
    block.analytic.assign(slot.analytic.begin(), slot.analytic.end());
    block.numeric.resize(slot.values.size());
    block.rel_error.resize(slot.values.size());
    for (std::size_t i = 0; i < slot.values.size(); ++i) {
      const Real saved = slot.values[i];
      slot.values[i] = saved + step;
      const Real up = f();
      slot.values[i] = saved - step;
      const Real down = f();
      slot.values[i] = saved;
      block.numeric[i] = (up - down) / (2.0 * step);
      block.rel_error[i] = relative_error(block.analytic[i], block.numeric[i]);
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

Real GradReport::max_rel_error(Real min_magnitude) const {
  Real worst = 0.0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.rel_error.size(); ++i) {
      if (std::max(std::abs(b.analytic[i]), std::abs(b.numeric[i])) > min_magnitude) {
        worst = std::max(worst, b.rel_error[i]);
      }
    }
  }
  return worst;
}

std::string GradReport::worst_block(Real min_magnitude) const {
  Real worst = -1.0;
  std::string name;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.rel_error.size(); ++i) {
      if (std::max(std::abs(b.analytic[i]), std::abs(b.numeric[i])) > min_magnitude &&
          b.rel_error[i] > worst) {
        worst = b.rel_error[i];
        name = b.name;
      }
    }
  }
  return name;
}

std::size_t GradReport::entry_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.rel_error.size();
  return n;
}

}  // namespace scenecap
