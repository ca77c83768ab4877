// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scene-factored soft attention.
//
// The hidden-state projection of additive attention is factored through the
// image's scene posterior:
//
//   g = U_h diag(v_scene) V_h h1                        (A)
//   a_i = w_a . tanh(W_va v_i + g)     alpha = softmax(a)   v_conv = sum alpha_i v_i
//   b_j = w_b . tanh(W_vb c_j + g)     beta  = softmax(b)   v_obj  = sum beta_j s_j c_j
//   v_hat = [v_conv, v_obj]
//
// so the effective projection U_h diag(v_scene) V_h has rank at most s and
// changes per image with the scene. g is always evaluated as three small
// products; the A x H matrix is never formed.

#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scenecap/tape.hpp"
#include "scenecap/tensor.hpp"

namespace scenecap {

struct AttnParams {
  Mat U_h;   // A x s
  Mat V_h;   // s x H
  Mat W_va;  // A x C
  Vec w_a;   // A
  Mat W_vb;  // A x C_k
  Vec w_b;   // A

  static AttnParams zeros(std::size_t attn, std::size_t scenes, std::size_t hidden,
                          std::size_t region_dim, std::size_t concept_dim);
  static AttnParams init(std::size_t attn, std::size_t scenes, std::size_t hidden,
                         std::size_t region_dim, std::size_t concept_dim, std::mt19937_64& rng);

  std::size_t attn_dim() const { return U_h.rows(); }
  std::size_t scenes() const { return U_h.cols(); }
  std::size_t hidden() const { return V_h.cols(); }
  std::size_t region_dim() const { return W_va.cols(); }
  std::size_t concept_dim() const { return W_vb.cols(); }

  void validate() const;
  void for_each(const std::function<void(const std::string&, std::span<Real>, std::size_t,
                                         std::size_t)>& fn,
                const std::string& prefix = "");

  bool operator==(const AttnParams&) const = default;
};

/// Scene posterior. Entries in [0, 1]; normalize() rescales to unit sum
/// when the sum is off by more than 1e-6 (already-normalized input is left
/// bit-identical).
struct SceneVector {
  Vec values;

  static SceneVector normalize(Vec raw);
  static SceneVector uniform(std::size_t scenes);
};

/// Detected object concepts: one embedding row per concept plus its
/// detection score.
struct ConceptSet {
  Mat vectors;  // K x C_k
  Vec scores;   // K
};

struct AttnOutput {
  Vec alpha;       // L, over regions
  Vec beta;        // K, over concepts
  Vec v_hat_conv;  // C
  Vec v_hat_obj;   // C_k
  Vec v_hat;       // C + C_k
};

// Tape-level API.

struct AttnVars {
  Var U_h, V_h, W_va, w_a, W_vb, w_b;
};

AttnVars bind(Tape& tape, const AttnParams& p);

/// Per-image attention inputs with the h1-independent projections hoisted
/// out of the decoding loop.
struct RegionContext {
  Var regions;    // L x C
  Var projected;  // L x A, regions W_va^T
};

struct ConceptContext {
  Var weighted;   // K x C_k, rows scaled by detection score
  Var projected;  // K x A, vectors W_vb^T
};

struct AttendVars {
  Var weights;
  Var summary;
};

Var scene_project(Tape& tape, Var scene, Var h1, const AttnVars& p);
RegionContext prepare_regions(Tape& tape, Var regions, const AttnVars& p);
ConceptContext prepare_concepts(Tape& tape, Var vectors, std::span<const Real> scores,
                                const AttnVars& p);
AttendVars attend_regions(Tape& tape, const RegionContext& ctx, Var g, const AttnVars& p);
AttendVars attend_concepts(Tape& tape, const ConceptContext& ctx, Var g, const AttnVars& p);
Var fuse(Tape& tape, Var v_hat_conv, Var v_hat_obj);

// Value-level API. Shape errors throw std::invalid_argument.

Vec scene_project(std::span<const Real> scene, std::span<const Real> h1, const AttnParams& p);

struct Attended {
  Vec weights;
  Vec summary;
};

/// Throws "image has no regions" when `regions` has no rows.
Attended attend_regions(const Mat& regions, std::span<const Real> g, const AttnParams& p);
/// Throws "empty concept set" when there are no concepts.
Attended attend_concepts(const ConceptSet& concepts, std::span<const Real> g,
                         const AttnParams& p);
Vec fuse(std::span<const Real> v_hat_conv, std::span<const Real> v_hat_obj);

}  // namespace scenecap
