// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenecap/tensor.hpp"
#include "scenecap/tokens.hpp"

namespace scenecap {

struct DetectedConcept {
  std::uint32_t id = 0;  // row of the concept-embedding table
  Real score = 0.0;      // detection score in [0, 1]

  bool operator==(const DetectedConcept&) const = default;
};

/// Everything the decoder sees of one image, plus its references.
struct ImageRecord {
  std::string id;
  Mat regions;  // L x C region features, L >= 1
  std::vector<DetectedConcept> concepts;
  Vec scene;  // scene posterior, length s, sums to 1

  std::vector<std::vector<std::string>> references;  // tokenized reference captions
  std::vector<TokenSeq> captions;                    // the same, encoded (no BOS/EOS)
};

}  // namespace scenecap
