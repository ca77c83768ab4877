// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenecap {

AttnParams AttnParams::zeros(std::size_t attn, std::size_t scenes, std::size_t hidden,
                             std::size_t region_dim, std::size_t concept_dim) {
  AttnParams p;
  p.U_h = Mat(attn, scenes);
  p.V_h = Mat(scenes, hidden);
  p.W_va = Mat(attn, region_dim);
  p.w_a = Vec(attn, 0.0);
  p.W_vb = Mat(attn, concept_dim);
  p.w_b = Vec(attn, 0.0);
  return p;
}

AttnParams AttnParams::init(std::size_t attn, std::size_t scenes, std::size_t hidden,
                            std::size_t region_dim, std::size_t concept_dim,
                            std::mt19937_64& rng) {
  AttnParams p = zeros(attn, scenes, hidden, region_dim, concept_dim);
  p.for_each([&](const std::string&, std::span<Real> data, std::size_t, std::size_t) {
    fill_uniform(data, -0.1, 0.1, rng);
  });
  return p;
}

void AttnParams::validate() const {
  const std::size_t a = attn_dim();
  const std::size_t s = scenes();
  require_same_shape(V_h.rows(), 1, s, 1, "V_h rows vs U_h columns");
  require_same_shape(W_va.rows(), 1, a, 1, "W_va rows vs attention size");
  require_same_shape(w_a.size(), 1, a, 1, "w_a vs attention size");
  require_same_shape(W_vb.rows(), 1, a, 1, "W_vb rows vs attention size");
  require_same_shape(w_b.size(), 1, a, 1, "w_b vs attention size");
}

void AttnParams::for_each(
    const std::function<void(const std::string&, std::span<Real>, std::size_t, std::size_t)>& fn,
    const std::string& prefix) {
  fn(prefix + "U_h", U_h.flat(), U_h.rows(), U_h.cols());
  fn(prefix + "V_h", V_h.flat(), V_h.rows(), V_h.cols());
  fn(prefix + "W_va", W_va.flat(), W_va.rows(), W_va.cols());
  fn(prefix + "w_a", w_a, w_a.size(), 1);
  fn(prefix + "W_vb", W_vb.flat(), W_vb.rows(), W_vb.cols());
  fn(prefix + "w_b", w_b, w_b.size(), 1);
}

SceneVector SceneVector::normalize(Vec raw) {
  Real total = 0.0;
  for (Real& x : raw) {
    if (!std::isfinite(x)) throw std::invalid_argument("scene vector has a non-finite entry");
    x = std::clamp(x, 0.0, 1.0);
    total += x;
  }
  if (total <= 0.0) throw std::invalid_argument("scene vector sums to zero");
  if (std::abs(total - 1.0) > 1e-6) {
    for (Real& x : raw) x /= total;
  }
  return {std::move(raw)};
}

SceneVector SceneVector::uniform(std::size_t scenes) {
  return {Vec(scenes, 1.0 / static_cast<Real>(scenes))};
}

AttnVars bind(Tape& tape, const AttnParams& p) {
  return {tape.param(p.U_h),  tape.param(p.V_h),  tape.param(p.W_va),
          tape.param(p.w_a), tape.param(p.W_vb), tape.param(p.w_b)};
}

Var scene_project(Tape& tape, Var scene, Var h1, const AttnVars& p) {
  return tape.matvec(p.U_h, tape.mul(scene, tape.matvec(p.V_h, h1)));
}

RegionContext prepare_regions(Tape& tape, Var regions, const AttnVars& p) {
  if (tape.rows(regions) == 0) throw std::invalid_argument("image has no regions");
  return {regions, tape.matmul_nt(regions, p.W_va)};
}

ConceptContext prepare_concepts(Tape& tape, Var vectors, std::span<const Real> scores,
                                const AttnVars& p) {
  if (tape.rows(vectors) == 0) throw std::invalid_argument("empty concept set");
  return {tape.scale_rows(vectors, scores), tape.matmul_nt(vectors, p.W_vb)};
}

namespace {

AttendVars attend(Tape& tape, Var projected, Var items, Var g, Var w) {
  const Var logits = tape.matvec(tape.tanh(tape.add_row(projected, g)), w);
  const Var weights = tape.softmax(logits);
  return {weights, tape.matvec_t(items, weights)};
}

}  // namespace

AttendVars attend_regions(Tape& tape, const RegionContext& ctx, Var g, const AttnVars& p) {
  return attend(tape, ctx.projected, ctx.regions, g, p.w_a);
}

AttendVars attend_concepts(Tape& tape, const ConceptContext& ctx, Var g, const AttnVars& p) {
  return attend(tape, ctx.projected, ctx.weighted, g, p.w_b);
}

Var fuse(Tape& tape, Var v_hat_conv, Var v_hat_obj) { return tape.concat(v_hat_conv, v_hat_obj); }

namespace {

Vec to_vec(std::span<const Real> s) { return Vec(s.begin(), s.end()); }

}  // namespace

Vec scene_project(std::span<const Real> scene, std::span<const Real> h1, const AttnParams& p) {
  p.validate();
  require_same_shape(scene.size(), 1, p.scenes(), 1, "scene vector");
  require_same_shape(h1.size(), 1, p.hidden(), 1, "attention query");
  Tape tape;
  const AttnVars vars = bind(tape, p);
  return to_vec(
      tape.value(scene_project(tape, tape.constant(to_vec(scene)), tape.constant(to_vec(h1)), vars)));
}

Attended attend_regions(const Mat& regions, std::span<const Real> g, const AttnParams& p) {
  if (regions.rows() == 0) throw std::invalid_argument("image has no regions");
  p.validate();
  require_same_shape(regions.cols(), 1, p.region_dim(), 1, "region features");
  require_same_shape(g.size(), 1, p.attn_dim(), 1, "scene projection");
  Tape tape;
  const AttnVars vars = bind(tape, p);
  const RegionContext ctx = prepare_regions(tape, tape.constant(regions), vars);
  const AttendVars out = attend_regions(tape, ctx, tape.constant(to_vec(g)), vars);
  return {to_vec(tape.value(out.weights)), to_vec(tape.value(out.summary))};
}

Attended attend_concepts(const ConceptSet& concepts, std::span<const Real> g,
                         const AttnParams& p) {
  if (concepts.vectors.rows() == 0) throw std::invalid_argument("empty concept set");
  p.validate();
  require_same_shape(concepts.vectors.cols(), 1, p.concept_dim(), 1, "concept embeddings");
  require_same_shape(concepts.scores.size(), 1, concepts.vectors.rows(), 1, "concept scores");
  require_same_shape(g.size(), 1, p.attn_dim(), 1, "scene projection");
  Tape tape;
  const AttnVars vars = bind(tape, p);
  const ConceptContext ctx =
      prepare_concepts(tape, tape.constant(concepts.vectors), concepts.scores, vars);
  const AttendVars out = attend_concepts(tape, ctx, tape.constant(to_vec(g)), vars);
  return {to_vec(tape.value(out.weights)), to_vec(tape.value(out.summary))};
}

Vec fuse(std::span<const Real> v_hat_conv, std::span<const Real> v_hat_obj) {
  return concat(v_hat_conv, v_hat_obj);
}

}  // namespace scenecap
