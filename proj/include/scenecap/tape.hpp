// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a linear record of dense primitive ops.
//
// Every op appends one node holding its value. Nodes are only ever appended,
// so creation order is a topological order and backward() walks it in reverse,
// visiting each node exactly once. Leaves are either constants (no gradient)
// or parameters; parameter leaves are non-owning views of caller storage, so
// binding a model to a tape copies nothing. The viewed storage must outlive
// the tape and must not change while the tape is in use.
//
// A tape is single-threaded. Distinct tapes share nothing.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scenecap/tensor.hpp"

namespace scenecap {

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = 0xffffffffu;
  std::uint32_t id = kNone;
  bool valid() const { return id != kNone; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaves.
  Var constant(Vec v);
  Var constant(const Mat& m);
  Var param(std::span<const Real> data, std::size_t rows, std::size_t cols);
  Var param(const Mat& m) { return param(m.flat(), m.rows(), m.cols()); }
  Var param(const Vec& v) { return param(v, v.size(), 1); }

  // Linear algebra. Vectors are (n x 1) nodes.
  Var matvec(Var w, Var x);      // W x
  Var matvec_t(Var m, Var a);    // M^T a
  Var matmul_nt(Var x, Var w);   // X W^T
  Var add(Var a, Var b);
  Var add_row(Var m, Var v);     // v added to every row of M
  Var mul(Var a, Var b);         // Hadamard product
  Var scale(Var a, Real c);
  Var concat(Var a, Var b);      // flat concatenation, result is a vector
  Var column(Var m, std::size_t j);
  Var gather_rows(Var m, std::span<const std::size_t> rows);
  Var scale_rows(Var m, std::span<const Real> factors);

  // Nonlinearities and reductions.
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var pick(Var a, std::size_t index);
  Var sum(Var a);

  std::span<const Real> value(Var v) const;
  Real scalar(Var v) const;
  std::size_t rows(Var v) const { return nodes_.at(v.id).rows; }
  std::size_t cols(Var v) const { return nodes_.at(v.id).cols; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates adjoints to every node.
  /// Throws std::invalid_argument when the loss is not a single scalar.
  void backward(Var loss);

  /// Adjoint accumulated by the last backward(); zeros when the node was not
  /// reached (or backward() has not run).
  std::span<const Real> grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kParam,
    kMatVec,
    kMatVecT,
    kMatMulNT,
    kAdd,
    kAddRow,
    kMul,
    kScale,
    kConcat,
    kColumn,
    kGatherRows,
    kScaleRows,
    kSigmoid,
    kTanh,
    kSoftmax,
    kLogSoftmax,
    kPick,
    kSum,
  };

  struct Node {
    Op op = Op::kConstant;
    std::uint32_t a = Var::kNone;
    std::uint32_t b = Var::kNone;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool requires_grad = false;
    Real factor = 0.0;
    const Real* external = nullptr;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<std::size_t> index;
    std::vector<Real> aux;

    std::size_t size() const { return rows * cols; }
    const Real* data() const { return external != nullptr ? external : value.data(); }
  };

  Var push(Node node);
  Node make(Op op, Var a, Var b, std::size_t rows, std::size_t cols);
  const Node& at(Var v) const;
  std::vector<Real>& grad_buffer(std::uint32_t id);
  void backprop(const Node& node, std::span<const Real> g);

  std::vector<Node> nodes_;
  mutable std::vector<Real> zeros_;
};

/// Free-function form of Tape::backward.
inline void backward(Tape& tape, Var loss) { tape.backward(loss); }

}  // namespace scenecap
