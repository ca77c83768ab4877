// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-layer captioning decoder.
//
// Per step t with input word z_t:
//   x1 = [W_e z_t, h2_{t-1}]      h1 = LSTM1(x1, h1_{t-1})     p1 = softmax(W_y1 h1)
//   v_hat = scene-factored attention over regions and concepts, queried by h1
//   x2 = [v_hat, h1]              h2 = LSTM2(x2, h2_{t-1})     p2 = softmax(W_y2 h2)
//
// p1 only feeds the training loss; every decoder reads p2.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenecap/attention.hpp"
#include "scenecap/image_record.hpp"
#include "scenecap/lstm.hpp"
#include "scenecap/tape.hpp"
#include "scenecap/tokens.hpp"

namespace scenecap {

struct ModelConfig {
  std::size_t hidden = 256;      // H
  std::size_t embed = 64;        // E
  std::size_t attn = 64;         // A
  std::size_t scenes = 4;        // s
  std::size_t region_dim = 16;   // C
  std::size_t concept_dim = 16;  // C_k
  std::size_t vocab = 0;         // Q, specials included
  std::size_t max_concepts = 3;  // K_max
  std::size_t max_len = 16;      // T_max, words per caption
  std::size_t n_concepts = 0;    // rows of the concept-embedding table

  bool tie_output = false;        // p1 and p2 share W_y1
  bool uniform_scene = false;     // ablation: replace every scene vector by uniform
  bool length_normalize = false;  // beam search ranks by mean log-probability

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

using ParamVisitor =
    std::function<void(const std::string&, std::span<Real>, std::size_t, std::size_t)>;
using ConstParamVisitor =
    std::function<void(const std::string&, std::span<const Real>, std::size_t, std::size_t)>;

struct ModelParams {
  Mat W_e;  // E x Q
  LstmParams lstm1;  // D_in = E + H
  LstmParams lstm2;  // D_in = C + C_k + H
  AttnParams attn;
  Mat W_y1;  // Q x H
  Mat W_y2;  // Q x H
  Mat concept_table;  // n_concepts x C_k

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  /// Throws when any block disagrees with `config`.
  void validate(const ModelConfig& config) const;

  /// Blocks in declaration order; this order is the checkpoint layout.
  void for_each(const ParamVisitor& fn);
  void for_each(const ConstParamVisitor& fn) const;

  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

struct DecoderState {
  LstmState s1;
  LstmState s2;
  std::optional<AttnOutput> last_attn;

  static DecoderState initial(const ModelConfig& config);
};

struct StepOutput {
  Vec p1;
  Vec p2;
  AttnOutput attn;
};

// Tape-level graph.

struct ModelVars {
  Var W_e;
  LstmVars lstm1;
  LstmVars lstm2;
  AttnVars attn;
  Var W_y1;
  Var W_y2;
  Var concept_table;
};

struct ImageVars {
  RegionContext regions;
  ConceptContext concepts;
  Var scene;
};

struct DecoderStateVars {
  LstmStateVars s1;
  LstmStateVars s2;
};

struct StepVars {
  Var logits1, logits2;
  Var logp1, logp2;
  AttendVars alpha;
  AttendVars beta;
  Var v_hat;
  DecoderStateVars next;
};

ModelVars bind(Tape& tape, const ModelParams& params, const ModelConfig& config);
/// Throws when the image has no regions or no concepts, or dims disagree.
ImageVars bind_image(Tape& tape, const ModelVars& vars, const ImageRecord& image,
                     const ModelConfig& config);
DecoderStateVars bind(Tape& tape, const DecoderState& state);
DecoderStateVars initial_state(Tape& tape, const ModelConfig& config);

StepVars decode_step(Tape& tape, const ModelVars& vars, const ImageVars& image, TokenId word,
                     const DecoderStateVars& state, const ModelConfig& config);

/// Teacher-forced graph: step t consumes tokens[t-1]; tokens must start with
/// BOS. Returns one StepVars per target (tokens.size() - 1 of them).
std::vector<StepVars> teacher_graph(Tape& tape, const ModelVars& vars, const ImageVars& image,
                                    std::span<const TokenId> tokens, const ModelConfig& config);

// Value-level API.

struct StepResult {
  StepOutput output;
  DecoderState state;
};

/// One decoder step. Throws std::out_of_range for word_id >= Q and
/// std::invalid_argument for an image without regions.
StepResult decode_step(TokenId word, const DecoderState& state, const ImageRecord& image,
                       const ModelParams& params, const ModelConfig& config);

/// tokens = [BOS, w_1, ..., w_n, EOS]; returns one output per target.
std::vector<StepOutput> forward_teacher(std::span<const TokenId> tokens, const ImageRecord& image,
                                        const ModelParams& params, const ModelConfig& config);

/// BOS + words + EOS, truncated to max_len words.
TokenSeq wrap_caption(std::span<const TokenId> words, const ModelConfig& config);

struct Decoded {
  TokenSeq tokens;          // emitted words, EOS excluded
  std::vector<Vec> alpha;   // one row per emitted word
  std::vector<Vec> beta;    // one row per emitted word
  Real logprob = 0.0;       // summed log p2 of every emitted token, EOS included
  bool finished = false;    // EOS was emitted within max_len steps
};

/// Argmax of p2 per step, lowest id on ties; stops at EOS or after max_len words.
Decoded greedy_decode(const ImageRecord& image, const ModelParams& params,
                      const ModelConfig& config);

/// Beam search over summed log p2. Throws for beam_width == 0.
Decoded beam_decode(const ImageRecord& image, const ModelParams& params,
                    const ModelConfig& config, std::size_t beam_width);

/// Multinomial draw from p2 per step (temperature 1).
Decoded sample_decode(const ImageRecord& image, const ModelParams& params,
                      const ModelConfig& config, std::uint64_t seed);

}  // namespace scenecap
