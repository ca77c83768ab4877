// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "scenecap/kernels.hpp"

namespace scenecap {

namespace {

void accumulate(std::vector<Real>& dst, std::span<const Real> src) {
  kernels::active().axpy(1.0, src.data(), dst.data(), src.size());
}

}  // namespace

const Tape::Node& Tape::at(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[v.id];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tape::Node Tape::make(Op op, Var a, Var b, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = (a.valid() && at(a).requires_grad) || (b.valid() && at(b).requires_grad);
  n.value.assign(rows * cols, 0.0);
  return n;
}

Var Tape::constant(Vec v) {
  Node n;
  n.op = Op::kConstant;
  n.rows = v.size();
  n.cols = 1;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::constant(const Mat& m) {
  Node n;
  n.op = Op::kConstant;
  n.rows = m.rows();
  n.cols = m.cols();
  n.value.assign(m.flat().begin(), m.flat().end());
  return push(std::move(n));
}

Var Tape::param(std::span<const Real> data, std::size_t rows, std::size_t cols) {
  if (data.size() != rows * cols) {
    throw std::invalid_argument("param view length does not match " + shape_string(rows, cols));
  }
  Node n;
  n.op = Op::kParam;
  n.rows = rows;
  n.cols = cols;
  n.requires_grad = true;
  n.external = data.data();
  return push(std::move(n));
}

Var Tape::matvec(Var w, Var x) {
  const Node& nw = at(w);
  const Node& nx = at(x);
  if (nx.cols != 1 || nw.cols != nx.rows) {
    throw std::invalid_argument("matvec: shape mismatch " + shape_string(nw.rows, nw.cols) +
                                " vs " + shape_string(nx.rows, nx.cols));
  }
  Node n = make(Op::kMatVec, w, x, nw.rows, 1);
  kernels::active().gemv(nw.data(), nw.rows, nw.cols, nx.data(), n.value.data());
  return push(std::move(n));
}

Var Tape::matvec_t(Var m, Var a) {
  const Node& nm = at(m);
  const Node& na = at(a);
  if (na.cols != 1 || nm.rows != na.rows) {
    throw std::invalid_argument("matvec_t: shape mismatch " + shape_string(nm.rows, nm.cols) +
                                " vs " + shape_string(na.rows, na.cols));
  }
  Node n = make(Op::kMatVecT, m, a, nm.cols, 1);
  kernels::active().gemv_t_acc(nm.data(), nm.rows, nm.cols, na.data(), n.value.data());
  return push(std::move(n));
}

Var Tape::matmul_nt(Var x, Var w) {
  const Node& nx = at(x);
  const Node& nw = at(w);
  if (nx.cols != nw.cols) {
    throw std::invalid_argument("matmul_nt: shape mismatch " + shape_string(nx.rows, nx.cols) +
                                " vs " + shape_string(nw.rows, nw.cols));
  }
  Node n = make(Op::kMatMulNT, x, w, nx.rows, nw.rows);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < nx.rows; ++i) {
    k.gemv(nw.data(), nw.rows, nw.cols, nx.data() + i * nx.cols, n.value.data() + i * nw.rows);
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  require_same_shape(na.rows, na.cols, nb.rows, nb.cols, "add");
  Node n = make(Op::kAdd, a, b, na.rows, na.cols);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.data()[i] + nb.data()[i];
  return push(std::move(n));
}

Var Tape::add_row(Var m, Var v) {
  const Node& nm = at(m);
  const Node& nv = at(v);
  require_same_shape(nm.cols, 1, nv.size(), 1, "add_row");
  Node n = make(Op::kAddRow, m, v, nm.rows, nm.cols);
  for (std::size_t r = 0; r < nm.rows; ++r) {
    for (std::size_t c = 0; c < nm.cols; ++c) {
      n.value[r * nm.cols + c] = nm.data()[r * nm.cols + c] + nv.data()[c];
    }
  }
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  require_same_shape(na.rows, na.cols, nb.rows, nb.cols, "hadamard");
  Node n = make(Op::kMul, a, b, na.rows, na.cols);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.data()[i] * nb.data()[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, Real c) {
  const Node& na = at(a);
  Node n = make(Op::kScale, a, Var{}, na.rows, na.cols);
  n.factor = c;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = c * na.data()[i];
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  Node n = make(Op::kConcat, a, b, na.size() + nb.size(), 1);
  std::copy_n(na.data(), na.size(), n.value.begin());
  std::copy_n(nb.data(), nb.size(), n.value.begin() + static_cast<std::ptrdiff_t>(na.size()));
  return push(std::move(n));
}

Var Tape::column(Var m, std::size_t j) {
  const Node& nm = at(m);
  if (j >= nm.cols) {
    throw std::out_of_range("column " + std::to_string(j) + " out of range for " +
                            shape_string(nm.rows, nm.cols));
  }
  Node n = make(Op::kColumn, m, Var{}, nm.rows, 1);
  n.index = {j};
  for (std::size_t r = 0; r < nm.rows; ++r) n.value[r] = nm.data()[r * nm.cols + j];
  return push(std::move(n));
}

Var Tape::gather_rows(Var m, std::span<const std::size_t> rows) {
  const Node& nm = at(m);
  Node n = make(Op::kGatherRows, m, Var{}, rows.size(), nm.cols);
  n.index.assign(rows.begin(), rows.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= nm.rows) {
      throw std::out_of_range("gather row " + std::to_string(rows[i]) + " out of range for " +
                              shape_string(nm.rows, nm.cols));
    }
    std::copy_n(nm.data() + rows[i] * nm.cols, nm.cols, n.value.begin() + i * nm.cols);
  }
  return push(std::move(n));
}

Var Tape::scale_rows(Var m, std::span<const Real> factors) {
  const Node& nm = at(m);
  require_same_shape(nm.rows, 1, factors.size(), 1, "scale_rows");
  Node n = make(Op::kScaleRows, m, Var{}, nm.rows, nm.cols);
  n.aux.assign(factors.begin(), factors.end());
  for (std::size_t r = 0; r < nm.rows; ++r) {
    for (std::size_t c = 0; c < nm.cols; ++c) {
      n.value[r * nm.cols + c] = factors[r] * nm.data()[r * nm.cols + c];
    }
  }
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  const Node& na = at(a);
  Node n = make(Op::kSigmoid, a, Var{}, na.rows, na.cols);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = scenecap::sigmoid(na.data()[i]);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const Node& na = at(a);
  Node n = make(Op::kTanh, a, Var{}, na.rows, na.cols);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::tanh(na.data()[i]);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  const Node& na = at(a);
  Node n = make(Op::kSoftmax, a, Var{}, na.rows, na.cols);
  n.value = scenecap::softmax({na.data(), na.size()});
  return push(std::move(n));
}

Var Tape::log_softmax(Var a) {
  const Node& na = at(a);
  Node n = make(Op::kLogSoftmax, a, Var{}, na.rows, na.cols);
  n.value = scenecap::log_softmax({na.data(), na.size()});
  return push(std::move(n));
}

Var Tape::pick(Var a, std::size_t index) {
  const Node& na = at(a);
  if (index >= na.size()) {
    throw std::out_of_range("pick index " + std::to_string(index) + " out of range for " +
                            shape_string(na.rows, na.cols));
  }
  Node n = make(Op::kPick, a, Var{}, 1, 1);
  n.index = {index};
  n.value[0] = na.data()[index];
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = at(a);
  Node n = make(Op::kSum, a, Var{}, 1, 1);
  n.value[0] = scenecap::sum({na.data(), na.size()});
  return push(std::move(n));
}

std::span<const Real> Tape::value(Var v) const {
  const Node& n = at(v);
  return {n.data(), n.size()};
}

Real Tape::scalar(Var v) const {
  const Node& n = at(v);
  if (n.size() != 1) {
    throw std::invalid_argument("scalar() on node of shape " + shape_string(n.rows, n.cols));
  }
  return n.data()[0];
}

std::span<const Real> Tape::grad(Var v) const {
  const Node& n = at(v);
  if (n.grad.size() == n.size()) return n.grad;
  if (zeros_.size() < n.size()) zeros_.assign(n.size(), 0.0);
  return {zeros_.data(), n.size()};
}

std::vector<Real>& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.size()) n.grad.assign(n.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& nl = at(loss);
  if (nl.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(nl.rows, nl.cols));
  }
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    backprop(n, n.grad);
  }
}

void Tape::backprop(const Node& n, std::span<const Real> g) {
  const auto& k = kernels::active();
  auto wants = [&](std::uint32_t id) { return id != Var::kNone && nodes_[id].requires_grad; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      return;

    case Op::kMatVec: {
      // y = W x
      const Node& nw = nodes_[n.a];
      const Node& nx = nodes_[n.b];
      if (wants(n.a)) k.ger_acc(g.data(), nw.rows, nx.data(), nw.cols, grad_buffer(n.a).data());
      if (wants(n.b)) k.gemv_t_acc(nw.data(), nw.rows, nw.cols, g.data(), grad_buffer(n.b).data());
      return;
    }
    case Op::kMatVecT: {
      // y = M^T a
      const Node& nm = nodes_[n.a];
      const Node& na = nodes_[n.b];
      if (wants(n.a)) k.ger_acc(na.data(), nm.rows, g.data(), nm.cols, grad_buffer(n.a).data());
      if (wants(n.b)) {
        std::vector<Real> tmp(nm.rows);
        k.gemv(nm.data(), nm.rows, nm.cols, g.data(), tmp.data());
        accumulate(grad_buffer(n.b), tmp);
      }
      return;
    }
    case Op::kMatMulNT: {
      // Y = X W^T with X (n x d), W (m x d)
      const Node& nx = nodes_[n.a];
      const Node& nw = nodes_[n.b];
      const std::size_t d = nx.cols;
      const std::size_t m = nw.rows;
      for (std::size_t i = 0; i < nx.rows; ++i) {
        const Real* gi = g.data() + i * m;
        if (wants(n.a)) k.gemv_t_acc(nw.data(), m, d, gi, grad_buffer(n.a).data() + i * d);
        if (wants(n.b)) k.ger_acc(gi, m, nx.data() + i * d, d, grad_buffer(n.b).data());
      }
      return;
    }
    case Op::kAdd:
      if (wants(n.a)) accumulate(grad_buffer(n.a), g);
      if (wants(n.b)) accumulate(grad_buffer(n.b), g);
      return;
    case Op::kAddRow: {
      if (wants(n.a)) accumulate(grad_buffer(n.a), g);
      if (wants(n.b)) {
        auto& gv = grad_buffer(n.b);
        for (std::size_t r = 0; r < n.rows; ++r) k.axpy(1.0, g.data() + r * n.cols, gv.data(), n.cols);
      }
      return;
    }
    case Op::kMul: {
      const Node& na = nodes_[n.a];
      const Node& nb = nodes_[n.b];
      if (wants(n.a)) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb.data()[i];
      }
      if (wants(n.b)) {
        auto& gb = grad_buffer(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * na.data()[i];
      }
      return;
    }
    case Op::kScale:
      if (wants(n.a)) k.axpy(n.factor, g.data(), grad_buffer(n.a).data(), g.size());
      return;
    case Op::kConcat: {
      const std::size_t split = nodes_[n.a].size();
      if (wants(n.a)) accumulate(grad_buffer(n.a), g.first(split));
      if (wants(n.b)) accumulate(grad_buffer(n.b), g.subspan(split));
      return;
    }
    case Op::kColumn: {
      if (!wants(n.a)) return;
      const std::size_t cols = nodes_[n.a].cols;
      auto& gm = grad_buffer(n.a);
      for (std::size_t r = 0; r < n.rows; ++r) gm[r * cols + n.index[0]] += g[r];
      return;
    }
    case Op::kGatherRows: {
      if (!wants(n.a)) return;
      auto& gm = grad_buffer(n.a);
      for (std::size_t i = 0; i < n.index.size(); ++i) {
        k.axpy(1.0, g.data() + i * n.cols, gm.data() + n.index[i] * n.cols, n.cols);
      }
      return;
    }
    case Op::kScaleRows: {
      if (!wants(n.a)) return;
      auto& gm = grad_buffer(n.a);
      for (std::size_t r = 0; r < n.rows; ++r) {
        k.axpy(n.aux[r], g.data() + r * n.cols, gm.data() + r * n.cols, n.cols);
      }
      return;
    }
    case Op::kSigmoid: {
      if (!wants(n.a)) return;
      auto& ga = grad_buffer(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      return;
    }
    case Op::kTanh: {
      if (!wants(n.a)) return;
      auto& ga = grad_buffer(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      return;
    }
    case Op::kSoftmax: {
      if (!wants(n.a)) return;
      Real gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * n.value[i];
      auto& ga = grad_buffer(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.value[i] * (g[i] - gy);
      return;
    }
    case Op::kLogSoftmax: {
      if (!wants(n.a)) return;
      const Real gsum = scenecap::sum(g);
      auto& ga = grad_buffer(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(n.value[i]) * gsum;
      return;
    }
    case Op::kPick:
      if (wants(n.a)) grad_buffer(n.a)[n.index[0]] += g[0];
      return;
    case Op::kSum: {
      if (!wants(n.a)) return;
      auto& ga = grad_buffer(n.a);
      for (Real& x : ga) x += g[0];
      return;
    }
  }
}

}  // namespace scenecap
