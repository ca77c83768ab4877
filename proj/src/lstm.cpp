// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/lstm.hpp"

#include <stdexcept>

namespace scenecap {

LstmParams LstmParams::zeros(std::size_t hidden, std::size_t input) {
  LstmParams p;
  for (Mat* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_c}) *w = Mat(hidden, input);
  for (Mat* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_c}) *u = Mat(hidden, hidden);
  for (Vec* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *b = Vec(hidden, 0.0);
  return p;
}

LstmParams LstmParams::init(std::size_t hidden, std::size_t input, std::mt19937_64& rng) {
  LstmParams p = zeros(hidden, input);
  for (Mat* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_c, &p.U_i, &p.U_f, &p.U_o, &p.U_c}) {
    fill_uniform(w->flat(), -0.1, 0.1, rng);
  }
  std::fill(p.b_f.begin(), p.b_f.end(), 1.0);
  return p;
}

void LstmParams::validate() const {
  const std::size_t h = hidden();
  const std::size_t d = input();
  for (const Mat* w : {&W_i, &W_f, &W_o, &W_c}) {
    require_same_shape(w->rows(), w->cols(), h, d, "lstm input weights");
  }
  for (const Mat* u : {&U_i, &U_f, &U_o, &U_c}) {
    require_same_shape(u->rows(), u->cols(), h, h, "lstm recurrent weights");
  }
  for (const Vec* b : {&b_i, &b_f, &b_o, &b_c}) {
    require_same_shape(b->size(), 1, h, 1, "lstm bias");
  }
}

void LstmParams::for_each(
    const std::function<void(const std::string&, std::span<Real>, std::size_t, std::size_t)>& fn,
    const std::string& prefix) {
  const std::pair<const char*, Mat*> mats[] = {{"W_i", &W_i}, {"W_f", &W_f}, {"W_o", &W_o},
                                               {"W_c", &W_c}, {"U_i", &U_i}, {"U_f", &U_f},
                                               {"U_o", &U_o}, {"U_c", &U_c}};
  for (auto& [name, m] : mats) fn(prefix + name, m->flat(), m->rows(), m->cols());
  const std::pair<const char*, Vec*> vecs[] = {
      {"b_i", &b_i}, {"b_f", &b_f}, {"b_o", &b_o}, {"b_c", &b_c}};
  for (auto& [name, v] : vecs) fn(prefix + name, *v, v->size(), 1);
}

LstmVars bind(Tape& tape, const LstmParams& p) {
  return {tape.param(p.W_i), tape.param(p.W_f), tape.param(p.W_o), tape.param(p.W_c),
          tape.param(p.U_i), tape.param(p.U_f), tape.param(p.U_o), tape.param(p.U_c),
          tape.param(p.b_i), tape.param(p.b_f), tape.param(p.b_o), tape.param(p.b_c)};
}

LstmStateVars bind(Tape& tape, const LstmState& s) {
  return {tape.constant(s.m), tape.constant(s.h)};
}

LstmStateVars lstm_step(Tape& tape, Var x, const LstmStateVars& prev, const LstmVars& p) {
  auto gate = [&](Var w, Var u, Var b) {
    return tape.add(tape.add(tape.matvec(w, x), tape.matvec(u, prev.h)), b);
  };
  const Var i = tape.sigmoid(gate(p.W_i, p.U_i, p.b_i));
  const Var f = tape.sigmoid(gate(p.W_f, p.U_f, p.b_f));
  const Var o = tape.sigmoid(gate(p.W_o, p.U_o, p.b_o));
  const Var g = tape.tanh(gate(p.W_c, p.U_c, p.b_c));
  const Var m = tape.add(tape.mul(f, prev.m), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(m));
  return {m, h};
}

LstmState lstm_step(std::span<const Real> x, const LstmState& prev, const LstmParams& p) {
  p.validate();
  require_same_shape(x.size(), 1, p.input(), 1, "lstm input");
  require_same_shape(prev.h.size(), 1, p.hidden(), 1, "lstm previous hidden");
  require_same_shape(prev.m.size(), 1, p.hidden(), 1, "lstm previous memory");
  Tape tape;
  const LstmVars vars = bind(tape, p);
  const LstmStateVars out =
      lstm_step(tape, tape.constant(Vec(x.begin(), x.end())), bind(tape, prev), vars);
  const auto m = tape.value(out.m);
  const auto h = tape.value(out.h);
  return {Vec(m.begin(), m.end()), Vec(h.begin(), h.end())};
}

}  // namespace scenecap
