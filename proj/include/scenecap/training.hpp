// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dual-head likelihood loss, self-critical fine-tuning, Adam, and the
// epoch loop that drives them.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenecap/decoder.hpp"
#include "scenecap/metrics.hpp"

namespace scenecap {

class Vocabulary;

enum class Phase { kMle, kRl };

const char* phase_name(Phase phase);
Phase parse_phase(const std::string& name);

struct TrainConfig {
  Real gamma = 0.3;
  Real lr = 5e-4;
  Real rl_lr = 5e-5;
  Real lr_decay = 0.8;
  std::size_t decay_every = 3;
  std::size_t batch_size = 1;
  std::size_t epochs_mle = 200;
  std::size_t epochs_rl = 0;
  std::optional<Real> grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  /// Greedy CIDEr-D is logged every this many epochs (0: never; the last
  /// epoch always logs).
  std::size_t eval_every = 1;

  /// Throws std::invalid_argument naming the bad field.
  void validate() const;
  /// Learning rate for 1-based `epoch` of `phase`: base * decay^floor((epoch-1)/decay_every).
  Real lr_at(Phase phase, std::size_t epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Worker threads from SCENECAP_THREADS (default 1, clamped to >= 1).
std::size_t thread_count();

// Gradient containers share ModelParams' layout.

/// Graph handles in ModelParams::for_each order. With tied output heads the
/// W_y2 slot repeats W_y1's handle.
std::vector<Var> param_vars(const ModelVars& vars);
/// Adds the tape's gradients into `grads` (shaped like the model).
void accumulate_grads(const Tape& tape, const ModelVars& vars, ModelParams& grads);

Real global_norm(const ModelParams& grads);
/// Rescales so the global norm is at most `max_norm`; returns the pre-clip norm.
Real clip_global_norm(ModelParams& grads, Real max_norm);
void scale_in_place(ModelParams& grads, Real factor);
void add_in_place(ModelParams& into, const ModelParams& from);

// Loss.

/// -gamma sum log p1(y_t) - (1-gamma) sum log p2(y_t), skipping PAD targets.
/// Throws std::invalid_argument when steps and targets differ in length.
Var mle_loss(Tape& tape, std::span<const StepVars> steps, std::span<const TokenId> targets,
             Real gamma);
Real mle_loss(std::span<const StepOutput> outputs, std::span<const TokenId> targets, Real gamma);

struct MleResult {
  Real loss = 0.0;
  std::size_t correct = 0;  // p2 argmax hits, PAD excluded
  std::size_t total = 0;
  ModelParams grads;
};

/// Teacher-forced loss and gradient for one caption ([BOS, words..., EOS]).
MleResult mle_gradients(const ImageRecord& image, std::span<const TokenId> tokens,
                        const ModelParams& params, const ModelConfig& config, Real gamma);

/// Teacher-forced p2 argmax hits; with `slots`, only those word positions count.
struct TokenAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  Real rate() const { return total == 0 ? 0.0 : static_cast<Real>(correct) / static_cast<Real>(total); }
};
TokenAccuracy teacher_accuracy(const ImageRecord& image, std::span<const TokenId> tokens,
                               const ModelParams& params, const ModelConfig& config,
                               std::span<const std::size_t> slots = {});

// Self-critical sequence training.

struct RlSample {
  TokenSeq sampled;
  Real sampled_logprob = 0.0;
  bool sampled_finished = false;
  TokenSeq greedy;
  Real reward_sampled = 0.0;
  Real reward_greedy = 0.0;
  Real advantage() const { return reward_sampled - reward_greedy; }
};

/// Gradient of -advantage * sum_t log p2(y_t) over the sampled tokens,
/// EOS included when the sample finished.
ModelParams scst_gradients(const ImageRecord& image, std::span<const TokenId> sampled,
                           bool finished, Real advantage, const ModelParams& params,
                           const ModelConfig& config);

struct ScstResult {
  RlSample sample;
  ModelParams grads;
};

/// Draws one sample and the greedy baseline, scores both with CIDEr-D against
/// the image's references, and returns the policy gradient. Throws for an
/// image without references.
ScstResult scst_update(const ImageRecord& image, const CorpusStats& stats, const Vocabulary& vocab,
                       const ModelParams& params, const ModelConfig& config,
                       std::uint64_t sample_seed);

// Adam.

struct AdamState {
  Vec m;
  Vec v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

inline constexpr Real kAdamBeta1 = 0.9;
inline constexpr Real kAdamBeta2 = 0.999;
inline constexpr Real kAdamEpsilon = 1e-8;

/// Bias-corrected Adam on a flat parameter vector. Moments are sized on
/// first use. Throws "non-finite gradient" before touching anything.
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState& state, Real lr);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, Real lr);

// Loop.

struct EpochLog {
  std::size_t epoch = 0;
  Phase phase = Phase::kMle;
  Real lr = 0.0;
  Real mean_loss = 0.0;
  std::optional<Real> mean_cider_greedy;
  Real token_accuracy = 0.0;  // MLE only: teacher-forced p2 accuracy during the epoch
  Real wallclock_s = 0.0;

  std::string to_json() const;
};

/// Everything needed to continue a run exactly.
struct TrainState {
  ModelParams params;
  AdamState adam;
  Phase phase = Phase::kMle;
  std::size_t epoch = 0;  // completed epochs of `phase`
};

struct TrainData {
  std::vector<const ImageRecord*> images;  // each with >= 1 encoded caption
  const CorpusStats* stats = nullptr;      // CIDEr-D reward and logging
  const Vocabulary* vocab = nullptr;
};

/// Runs epochs of `phase` until state.epoch == target_epoch. Moving from MLE
/// to RL resets the optimizer. `on_epoch` sees each log record and the state
/// after the epoch. Throws for an empty dataset.
void train_loop(const TrainData& data, TrainState& state, const ModelConfig& config,
                const TrainConfig& train, Phase phase, std::size_t target_epoch,
                const std::function<void(const EpochLog&, const TrainState&)>& on_epoch = {});

/// Mean greedy CIDEr-D over `images` against their references.
Real mean_greedy_cider(std::span<const ImageRecord* const> images, const CorpusStats& stats,
                       const Vocabulary& vocab, const ModelParams& params,
                       const ModelConfig& config);

/// Seed for one item's randomness, derived from (seed, phase, epoch, item).
std::uint64_t item_seed(std::uint64_t seed, Phase phase, std::size_t epoch, std::size_t item);

}  // namespace scenecap
