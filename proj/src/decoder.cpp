// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace scenecap {

namespace {

Vec to_vec(std::span<const Real> s) { return Vec(s.begin(), s.end()); }

void require_positive(std::size_t value, const char* name) {
  if (value == 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
}

}  // namespace

void ModelConfig::validate() const {
  require_positive(hidden, "hidden");
  require_positive(embed, "embed");
  require_positive(attn, "attn");
  require_positive(scenes, "scenes");
  require_positive(region_dim, "region_dim");
  require_positive(concept_dim, "concept_dim");
  require_positive(vocab, "vocab");
  require_positive(max_concepts, "max_concepts");
  require_positive(max_len, "max_len");
  require_positive(n_concepts, "n_concepts");
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
  c.validate();
  ModelParams p;
  p.W_e = Mat(c.embed, c.vocab);
  p.lstm1 = LstmParams::zeros(c.hidden, c.embed + c.hidden);
  p.lstm2 = LstmParams::zeros(c.hidden, c.region_dim + c.concept_dim + c.hidden);
  p.attn = AttnParams::zeros(c.attn, c.scenes, c.hidden, c.region_dim, c.concept_dim);
  p.W_y1 = Mat(c.vocab, c.hidden);
  p.W_y2 = Mat(c.vocab, c.hidden);
  p.concept_table = Mat(c.n_concepts, c.concept_dim);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.W_e = Mat(c.embed, c.vocab);
  fill_uniform(p.W_e.flat(), -1.0, 1.0, rng);
  p.lstm1 = LstmParams::init(c.hidden, c.embed + c.hidden, rng);
  p.lstm2 = LstmParams::init(c.hidden, c.region_dim + c.concept_dim + c.hidden, rng);
  p.attn = AttnParams::init(c.attn, c.scenes, c.hidden, c.region_dim, c.concept_dim, rng);
  p.W_y1 = Mat(c.vocab, c.hidden);
  fill_uniform(p.W_y1.flat(), -1.0, 1.0, rng);
  p.W_y2 = Mat(c.vocab, c.hidden);
  fill_uniform(p.W_y2.flat(), -1.0, 1.0, rng);
  p.concept_table = Mat(c.n_concepts, c.concept_dim);
  fill_uniform(p.concept_table.flat(), -1.0, 1.0, rng);
  return p;
}

void ModelParams::validate(const ModelConfig& c) const {
  c.validate();
  require_same_shape(W_e.rows(), W_e.cols(), c.embed, c.vocab, "W_e");
  lstm1.validate();
  require_same_shape(lstm1.hidden(), lstm1.input(), c.hidden, c.embed + c.hidden, "lstm1");
  lstm2.validate();
  require_same_shape(lstm2.hidden(), lstm2.input(), c.hidden,
                     c.region_dim + c.concept_dim + c.hidden, "lstm2");
  attn.validate();
  require_same_shape(attn.U_h.rows(), attn.U_h.cols(), c.attn, c.scenes, "U_h");
  require_same_shape(attn.V_h.rows(), attn.V_h.cols(), c.scenes, c.hidden, "V_h");
  require_same_shape(attn.W_va.rows(), attn.W_va.cols(), c.attn, c.region_dim, "W_va");
  require_same_shape(attn.W_vb.rows(), attn.W_vb.cols(), c.attn, c.concept_dim, "W_vb");
  require_same_shape(W_y1.rows(), W_y1.cols(), c.vocab, c.hidden, "W_y1");
  require_same_shape(W_y2.rows(), W_y2.cols(), c.vocab, c.hidden, "W_y2");
  require_same_shape(concept_table.rows(), concept_table.cols(), c.n_concepts, c.concept_dim,
                     "concept_table");
}

void ModelParams::for_each(const ParamVisitor& fn) {
  fn("W_e", W_e.flat(), W_e.rows(), W_e.cols());
  lstm1.for_each(fn, "lstm1.");
  lstm2.for_each(fn, "lstm2.");
  attn.for_each(fn, "attn.");
  fn("W_y1", W_y1.flat(), W_y1.rows(), W_y1.cols());
  fn("W_y2", W_y2.flat(), W_y2.rows(), W_y2.cols());
  fn("concept_table", concept_table.flat(), concept_table.rows(), concept_table.cols());
}

void ModelParams::for_each(const ConstParamVisitor& fn) const {
  // The mutable visitor never writes; it only hands out views.
  const_cast<ModelParams*>(this)->for_each(
      ParamVisitor([&](const std::string& name, std::span<Real> data, std::size_t rows,
                       std::size_t cols) { fn(name, data, rows, cols); }));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each(ConstParamVisitor(
      [&](const std::string&, std::span<const Real> d, std::size_t, std::size_t) { n += d.size(); }));
  return n;
}

DecoderState DecoderState::initial(const ModelConfig& config) {
  return {LstmState::zeros(config.hidden), LstmState::zeros(config.hidden), std::nullopt};
}

ModelVars bind(Tape& tape, const ModelParams& params, const ModelConfig& config) {
  ModelVars v;
  v.W_e = tape.param(params.W_e);
  v.lstm1 = bind(tape, params.lstm1);
  v.lstm2 = bind(tape, params.lstm2);
  v.attn = bind(tape, params.attn);
  v.W_y1 = tape.param(params.W_y1);
  v.W_y2 = config.tie_output ? v.W_y1 : tape.param(params.W_y2);
  v.concept_table = tape.param(params.concept_table);
  return v;
}

ImageVars bind_image(Tape& tape, const ModelVars& vars, const ImageRecord& image,
                     const ModelConfig& config) {
  if (image.regions.rows() == 0) throw std::invalid_argument("image " + image.id + " has no regions");
  if (image.regions.cols() != config.region_dim) {
    throw std::invalid_argument("image " + image.id + ": region dim " +
                                std::to_string(image.regions.cols()) + " != " +
                                std::to_string(config.region_dim));
  }
  if (image.concepts.empty()) throw std::invalid_argument("image " + image.id + " has an empty concept set");
  if (image.concepts.size() > config.max_concepts) {
    throw std::invalid_argument("image " + image.id + " has more than max_concepts concepts");
  }
  if (image.scene.size() != config.scenes) {
    throw std::invalid_argument("image " + image.id + ": scene length " +
                                std::to_string(image.scene.size()) + " != " +
                                std::to_string(config.scenes));
  }
  std::vector<std::size_t> rows;
  Vec scores;
  for (const DetectedConcept& c : image.concepts) {
    if (c.id >= config.n_concepts) {
      throw std::out_of_range("image " + image.id + ": concept id " + std::to_string(c.id) +
                              " out of range");
    }
    rows.push_back(c.id);
    scores.push_back(c.score);
  }
  ImageVars iv;
  iv.regions = prepare_regions(tape, tape.constant(image.regions), vars.attn);
  iv.concepts =
      prepare_concepts(tape, tape.gather_rows(vars.concept_table, rows), scores, vars.attn);
  iv.scene = tape.constant(config.uniform_scene ? SceneVector::uniform(config.scenes).values
                                                : image.scene);
  return iv;
}

DecoderStateVars bind(Tape& tape, const DecoderState& state) {
  return {bind(tape, state.s1), bind(tape, state.s2)};
}

DecoderStateVars initial_state(Tape& tape, const ModelConfig& config) {
  return bind(tape, DecoderState::initial(config));
}

StepVars decode_step(Tape& tape, const ModelVars& vars, const ImageVars& image, TokenId word,
                     const DecoderStateVars& state, const ModelConfig& config) {
  if (word < 0 || static_cast<std::size_t>(word) >= config.vocab) {
    throw std::out_of_range("word id " + std::to_string(word) + " outside vocabulary of " +
                            std::to_string(config.vocab));
  }
  StepVars out;
  const Var embedded = tape.column(vars.W_e, static_cast<std::size_t>(word));
  const Var x1 = tape.concat(embedded, state.s2.h);
  out.next.s1 = lstm_step(tape, x1, state.s1, vars.lstm1);
  const Var h1 = out.next.s1.h;
  out.logits1 = tape.matvec(vars.W_y1, h1);

  const Var g = scene_project(tape, image.scene, h1, vars.attn);
  out.alpha = attend_regions(tape, image.regions, g, vars.attn);
  out.beta = attend_concepts(tape, image.concepts, g, vars.attn);
  out.v_hat = fuse(tape, out.alpha.summary, out.beta.summary);

  const Var x2 = tape.concat(out.v_hat, h1);
  out.next.s2 = lstm_step(tape, x2, state.s2, vars.lstm2);
  out.logits2 = tape.matvec(vars.W_y2, out.next.s2.h);

  out.logp1 = tape.log_softmax(out.logits1);
  out.logp2 = tape.log_softmax(out.logits2);
  return out;
}

std::vector<StepVars> teacher_graph(Tape& tape, const ModelVars& vars, const ImageVars& image,
                                    std::span<const TokenId> tokens, const ModelConfig& config) {
  if (tokens.size() < 2) throw std::invalid_argument("teacher forcing needs at least BOS and one target");
  if (tokens.front() != kBos) throw std::invalid_argument("token sequence must start with BOS");
  if (tokens.size() > config.max_len + 2) {
    throw std::invalid_argument("token sequence longer than max_len words plus EOS");
  }
  std::vector<StepVars> steps;
  steps.reserve(tokens.size() - 1);
  DecoderStateVars state = initial_state(tape, config);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    steps.push_back(decode_step(tape, vars, image, tokens[t], state, config));
    state = steps.back().next;
  }
  return steps;
}

namespace {

AttnOutput read_attention(const Tape& tape, const StepVars& s) {
  AttnOutput a;
  a.alpha = to_vec(tape.value(s.alpha.weights));
  a.beta = to_vec(tape.value(s.beta.weights));
  a.v_hat_conv = to_vec(tape.value(s.alpha.summary));
  a.v_hat_obj = to_vec(tape.value(s.beta.summary));
  a.v_hat = to_vec(tape.value(s.v_hat));
  return a;
}

StepOutput read_output(const Tape& tape, const StepVars& s) {
  return {softmax(tape.value(s.logits1)), softmax(tape.value(s.logits2)), read_attention(tape, s)};
}

LstmState read_state(const Tape& tape, const LstmStateVars& s) {
  return {to_vec(tape.value(s.m)), to_vec(tape.value(s.h))};
}

}  // namespace

StepResult decode_step(TokenId word, const DecoderState& state, const ImageRecord& image,
                       const ModelParams& params, const ModelConfig& config) {
  Tape tape;
  const ModelVars vars = bind(tape, params, config);
  const ImageVars iv = bind_image(tape, vars, image, config);
  const StepVars s = decode_step(tape, vars, iv, word, bind(tape, state), config);
  StepResult r;
  r.output = read_output(tape, s);
  r.state.s1 = read_state(tape, s.next.s1);
  r.state.s2 = read_state(tape, s.next.s2);
  r.state.last_attn = r.output.attn;
  return r;
}

std::vector<StepOutput> forward_teacher(std::span<const TokenId> tokens, const ImageRecord& image,
                                        const ModelParams& params, const ModelConfig& config) {
  if (tokens.empty()) throw std::invalid_argument("empty token sequence");
  Tape tape;
  const ModelVars vars = bind(tape, params, config);
  const ImageVars iv = bind_image(tape, vars, image, config);
  const std::vector<StepVars> steps = teacher_graph(tape, vars, iv, tokens, config);
  std::vector<StepOutput> out;
  out.reserve(steps.size());
  for (const StepVars& s : steps) out.push_back(read_output(tape, s));
  return out;
}

TokenSeq wrap_caption(std::span<const TokenId> words, const ModelConfig& config) {
  TokenSeq seq;
  seq.reserve(std::min(words.size(), config.max_len) + 2);
  seq.push_back(kBos);
  for (std::size_t i = 0; i < words.size() && i < config.max_len; ++i) seq.push_back(words[i]);
  seq.push_back(kEos);
  return seq;
}

namespace {

// All hypotheses of one decode live on a single tape that grows step by step.
class DecodeSession {
 public:
  DecodeSession(const ImageRecord& image, const ModelParams& params, const ModelConfig& config)
      : config_(config),
        vars_(bind(tape_, params, config)),
        image_(bind_image(tape_, vars_, image, config)),
        start_(initial_state(tape_, config)) {}

  const DecoderStateVars& start() const { return start_; }

  StepVars step(TokenId word, const DecoderStateVars& state) {
    return decode_step(tape_, vars_, image_, word, state, config_);
  }

  std::span<const Real> logp2(const StepVars& s) const { return tape_.value(s.logp2); }
  Vec p2(const StepVars& s) const { return softmax(tape_.value(s.logits2)); }
  Vec alpha(const StepVars& s) const { return to_vec(tape_.value(s.alpha.weights)); }
  Vec beta(const StepVars& s) const { return to_vec(tape_.value(s.beta.weights)); }

 private:
  const ModelConfig& config_;
  Tape tape_;
  ModelVars vars_;
  ImageVars image_;
  DecoderStateVars start_;
};

// Shared driver for greedy and sampled decoding: `choose` picks the next
// token from the step's p2.
template <class Choose>
Decoded run_single(const ImageRecord& image, const ModelParams& params, const ModelConfig& config,
                   Choose&& choose) {
  DecodeSession session(image, params, config);
  Decoded out;
  DecoderStateVars state = session.start();
  TokenId word = kBos;
  for (std::size_t t = 0; t <= config.max_len; ++t) {
    const StepVars s = session.step(word, state);
    const TokenId next = choose(session, s);
    if (next == kEos) {
      out.logprob += session.logp2(s)[static_cast<std::size_t>(next)];
      out.finished = true;
      break;
    }
    // The step after max_len words may only terminate the caption.
    if (t == config.max_len) break;
    out.logprob += session.logp2(s)[static_cast<std::size_t>(next)];
    out.tokens.push_back(next);
    out.alpha.push_back(session.alpha(s));
    out.beta.push_back(session.beta(s));
    state = s.next;
    word = next;
  }
  return out;
}

}  // namespace

Decoded greedy_decode(const ImageRecord& image, const ModelParams& params,
                      const ModelConfig& config) {
  return run_single(image, params, config, [](DecodeSession& session, const StepVars& s) {
    return static_cast<TokenId>(argmax(session.logp2(s)));
  });
}

Decoded sample_decode(const ImageRecord& image, const ModelParams& params,
                      const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return run_single(image, params, config, [&](DecodeSession& session, const StepVars& s) {
    const Vec p = session.p2(s);
    const Real u = uniform01(rng);
    Real cumulative = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cumulative += p[i];
      if (u < cumulative) return static_cast<TokenId>(i);
    }
    // Rounding left u above the last partial sum; take the last token with mass.
    std::size_t last = p.size() - 1;
    while (last > 0 && p[last] == 0.0) --last;
    return static_cast<TokenId>(last);
  });
}

namespace {

struct Hypothesis {
  TokenSeq tokens;
  std::vector<Vec> alpha;
  std::vector<Vec> beta;
  Real logprob = 0.0;
  DecoderStateVars state;
};

Real rank_score(const Hypothesis& h, bool finished, const ModelConfig& config) {
  if (!config.length_normalize) return h.logprob;
  const std::size_t n = h.tokens.size() + (finished ? 1 : 0);
  return n == 0 ? h.logprob : h.logprob / static_cast<Real>(n);
}

}  // namespace

Decoded beam_decode(const ImageRecord& image, const ModelParams& params,
                    const ModelConfig& config, std::size_t beam_width) {
  if (beam_width == 0) throw std::invalid_argument("beam width must be at least 1");
  DecodeSession session(image, params, config);

  struct Candidate {
    std::size_t parent;
    TokenId token;
    Real logprob;
    Real score;
  };

  std::vector<Hypothesis> live(1);
  live[0].state = session.start();
  std::vector<Hypothesis> finished;

  for (std::size_t t = 0; t <= config.max_len && !live.empty(); ++t) {
    const bool last_step = t == config.max_len;
    std::vector<StepVars> steps;
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const TokenId input = live[h].tokens.empty() ? kBos : live[h].tokens.back();
      steps.push_back(session.step(input, live[h].state));
      const auto lp = session.logp2(steps.back());
      for (std::size_t w = 0; w < lp.size(); ++w) {
        const TokenId token = static_cast<TokenId>(w);
        // After max_len words only termination is allowed.
        if (last_step && token != kEos) continue;
        Hypothesis probe;
        probe.tokens.resize(live[h].tokens.size() + (token == kEos ? 0 : 1));
        probe.logprob = live[h].logprob + lp[w];
        candidates.push_back({h, token, probe.logprob, rank_score(probe, token == kEos, config)});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (candidates.size() > beam_width) candidates.resize(beam_width);

    std::vector<Hypothesis> next;
    for (const Candidate& c : candidates) {
      Hypothesis h;
      h.tokens = live[c.parent].tokens;
      h.alpha = live[c.parent].alpha;
      h.beta = live[c.parent].beta;
      h.logprob = c.logprob;
      if (c.token == kEos) {
        finished.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      h.alpha.push_back(session.alpha(steps[c.parent]));
      h.beta.push_back(session.beta(steps[c.parent]));
      h.state = steps[c.parent].next;
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  auto best_of = [&](const std::vector<Hypothesis>& pool, bool done) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (rank_score(pool[i], done, config) > rank_score(pool[best], done, config)) best = i;
    }
    return best;
  };

  Decoded out;
  if (!finished.empty()) {
    Hypothesis& h = finished[best_of(finished, true)];
    out.tokens = std::move(h.tokens);
    out.alpha = std::move(h.alpha);
    out.beta = std::move(h.beta);
    out.logprob = h.logprob;
    out.finished = true;
  } else if (!live.empty()) {
    Hypothesis& h = live[best_of(live, false)];
    out.tokens = std::move(h.tokens);
    out.alpha = std::move(h.alpha);
    out.beta = std::move(h.beta);
    out.logprob = h.logprob;
  }
  return out;
}

}  // namespace scenecap
