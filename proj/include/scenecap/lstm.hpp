// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gated recurrent cell shared by both decoder layers:
//
//   i = sigmoid(W_i x + U_i h + b_i)     f = sigmoid(W_f x + U_f h + b_f)
//   o = sigmoid(W_o x + U_o h + b_o)     g = tanh(W_c x + U_c h + b_c)
//   m' = f * m + i * g                   h' = o * tanh(m')
//
// Zero biases give the bias-free form of the cell.

#pragma once

#include <functional>
#include <random>
#include <string>

#include "scenecap/tape.hpp"
#include "scenecap/tensor.hpp"

namespace scenecap {

struct LstmParams {
  Mat W_i, W_f, W_o, W_c;  // H x D_in
  Mat U_i, U_f, U_o, U_c;  // H x H
  Vec b_i, b_f, b_o, b_c;  // H

  static LstmParams zeros(std::size_t hidden, std::size_t input);
  /// Weights uniform in [-0.1, 0.1], forget bias 1, other biases 0.
  static LstmParams init(std::size_t hidden, std::size_t input, std::mt19937_64& rng);

  std::size_t hidden() const { return W_i.rows(); }
  std::size_t input() const { return W_i.cols(); }

  /// Throws when the twelve blocks disagree on H or D_in.
  void validate() const;

  /// Visits the twelve blocks in declaration order as (name, storage, rows, cols).
  void for_each(const std::function<void(const std::string&, std::span<Real>, std::size_t,
                                         std::size_t)>& fn,
                const std::string& prefix = "");

  bool operator==(const LstmParams&) const = default;
};

struct LstmState {
  Vec m;  // memory cell
  Vec h;  // hidden feature

  static LstmState zeros(std::size_t hidden) { return {Vec(hidden, 0.0), Vec(hidden, 0.0)}; }
  bool operator==(const LstmState&) const = default;
};

/// Tape handles for bound parameters and states.
struct LstmVars {
  Var W_i, W_f, W_o, W_c;
  Var U_i, U_f, U_o, U_c;
  Var b_i, b_f, b_o, b_c;
};

struct LstmStateVars {
  Var m;
  Var h;
};

LstmVars bind(Tape& tape, const LstmParams& p);
LstmStateVars bind(Tape& tape, const LstmState& s);

LstmStateVars lstm_step(Tape& tape, Var x, const LstmStateVars& prev, const LstmVars& p);

/// Value-level step. Throws std::invalid_argument on shape mismatch.
LstmState lstm_step(std::span<const Real> x, const LstmState& prev, const LstmParams& p);

}  // namespace scenecap
