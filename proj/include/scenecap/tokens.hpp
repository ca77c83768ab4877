// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace scenecap {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Special tokens occupy the first ids of every vocabulary.
inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kPad = 3;
inline constexpr TokenId kNumSpecial = 4;

}  // namespace scenecap
