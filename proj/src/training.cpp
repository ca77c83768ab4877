// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "scenecap/dataio.hpp"

namespace scenecap {

const char* phase_name(Phase phase) { return phase == Phase::kMle ? "mle" : "rl"; }

Phase parse_phase(const std::string& name) {
  if (name == "mle") return Phase::kMle;
  if (name == "rl") return Phase::kRl;
  throw std::invalid_argument("unknown phase '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (!(rl_lr > 0.0) || !std::isfinite(rl_lr)) throw std::invalid_argument("rl_lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (decay_every == 0) throw std::invalid_argument("decay_every must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
    throw std::invalid_argument("grad_clip_norm must be > 0 when set");
  }
}

Real TrainConfig::lr_at(Phase phase, std::size_t epoch) const {
  const Real base = phase == Phase::kMle ? lr : rl_lr;
  const std::size_t k = epoch == 0 ? 0 : (epoch - 1) / decay_every;
  return base * std::pow(lr_decay, static_cast<Real>(k));
}

std::size_t thread_count() {
  const char* env = std::getenv("SCENECAP_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// handled by exactly one worker; callers write results to slot i only.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Fn>
void for_each_block(ModelParams& p, Fn&& fn) {
  p.for_each(ParamVisitor(
      [&](const std::string&, std::span<Real> d, std::size_t, std::size_t) { fn(d); }));
}

template <class Fn>
void for_each_block(const ModelParams& p, Fn&& fn) {
  p.for_each(ConstParamVisitor(
      [&](const std::string&, std::span<const Real> d, std::size_t, std::size_t) { fn(d); }));
}

std::vector<std::span<Real>> blocks(ModelParams& p) {
  std::vector<std::span<Real>> out;
  for_each_block(p, [&](std::span<Real> d) { out.push_back(d); });
  return out;
}

std::vector<std::span<const Real>> blocks(const ModelParams& p) {
  std::vector<std::span<const Real>> out;
  for_each_block(p, [&](std::span<const Real> d) { out.push_back(d); });
  return out;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for_each_block(z, [](std::span<Real> d) { std::fill(d.begin(), d.end(), 0.0); });
  return z;
}

}  // namespace

std::vector<Var> param_vars(const ModelVars& v) {
  std::vector<Var> out = {v.W_e};
  for (const LstmVars* l : {&v.lstm1, &v.lstm2}) {
    out.insert(out.end(), {l->W_i, l->W_f, l->W_o, l->W_c, l->U_i, l->U_f, l->U_o, l->U_c,
                           l->b_i, l->b_f, l->b_o, l->b_c});
  }
  out.insert(out.end(), {v.attn.U_h, v.attn.V_h, v.attn.W_va, v.attn.w_a, v.attn.W_vb, v.attn.w_b,
                         v.W_y1, v.W_y2, v.concept_table});
  return out;
}

void accumulate_grads(const Tape& tape, const ModelVars& vars, ModelParams& grads) {
  const std::vector<Var> handles = param_vars(vars);
  const std::vector<std::span<Real>> dst = blocks(grads);
  if (handles.size() != dst.size()) throw std::logic_error("parameter block count mismatch");
  for (std::size_t b = 0; b < dst.size(); ++b) {
    // A tied head appears twice; its gradient belongs to the first slot only.
    bool repeat = false;
    for (std::size_t e = 0; e < b; ++e) repeat = repeat || handles[e].id == handles[b].id;
    if (repeat) continue;
    const auto g = tape.grad(handles[b]);
    if (g.size() != dst[b].size()) throw std::logic_error("gradient block size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) dst[b][i] += g[i];
  }
}

Real global_norm(const ModelParams& grads) {
  Real sq = 0.0;
  for_each_block(grads, [&](std::span<const Real> d) {
    for (Real x : d) sq += x * x;
  });
  return std::sqrt(sq);
}

Real clip_global_norm(ModelParams& grads, Real max_norm) {
  const Real norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) scale_in_place(grads, max_norm / norm);
  return norm;
}

void scale_in_place(ModelParams& grads, Real factor) {
  for_each_block(grads, [&](std::span<Real> d) {
    for (Real& x : d) x *= factor;
  });
}

void add_in_place(ModelParams& into, const ModelParams& from) {
  const auto dst = blocks(into);
  const auto src = blocks(from);
  if (dst.size() != src.size()) throw std::invalid_argument("add_in_place: layout mismatch");
  for (std::size_t b = 0; b < dst.size(); ++b) {
    require_same_shape(dst[b].size(), 1, src[b].size(), 1, "gradient block");
    for (std::size_t i = 0; i < src[b].size(); ++i) dst[b][i] += src[b][i];
  }
}

Var mle_loss(Tape& tape, std::span<const StepVars> steps, std::span<const TokenId> targets,
             Real gamma) {
  if (steps.size() != targets.size()) {
    throw std::invalid_argument("mle_loss: " + std::to_string(steps.size()) + " steps vs " +
                                std::to_string(targets.size()) + " targets");
  }
  Var l1, l2;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (targets[t] == kPad) continue;
    const auto y = static_cast<std::size_t>(targets[t]);
    const Var a = tape.pick(steps[t].logp1, y);
    const Var b = tape.pick(steps[t].logp2, y);
    l1 = l1.valid() ? tape.add(l1, a) : a;
    l2 = l2.valid() ? tape.add(l2, b) : b;
  }
  if (!l1.valid()) return tape.constant(Vec{0.0});
  return tape.add(tape.scale(l1, -gamma), tape.scale(l2, -(1.0 - gamma)));
}

Real mle_loss(std::span<const StepOutput> outputs, std::span<const TokenId> targets, Real gamma) {
  if (outputs.size() != targets.size()) {
    throw std::invalid_argument("mle_loss: " + std::to_string(outputs.size()) + " steps vs " +
                                std::to_string(targets.size()) + " targets");
  }
  Real l1 = 0.0, l2 = 0.0;
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    if (targets[t] == kPad) continue;
    const auto y = static_cast<std::size_t>(targets[t]);
    l1 += std::log(outputs[t].p1.at(y));
    l2 += std::log(outputs[t].p2.at(y));
  }
  return -gamma * l1 - (1.0 - gamma) * l2;
}

MleResult mle_gradients(const ImageRecord& image, std::span<const TokenId> tokens,
                        const ModelParams& params, const ModelConfig& config, Real gamma) {
  Tape tape;
  const ModelVars vars = bind(tape, params, config);
  const ImageVars iv = bind_image(tape, vars, image, config);
  const std::vector<StepVars> steps = teacher_graph(tape, vars, iv, tokens, config);
  const std::span<const TokenId> targets = tokens.subspan(1);
  const Var loss = mle_loss(tape, steps, targets, gamma);

  MleResult r;
  r.loss = tape.scalar(loss);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (targets[t] == kPad) continue;
    ++r.total;
    if (static_cast<TokenId>(argmax(tape.value(steps[t].logp2))) == targets[t]) ++r.correct;
  }
  tape.backward(loss);
  r.grads = zeros_like(params);
  accumulate_grads(tape, vars, r.grads);
  return r;
}

TokenAccuracy teacher_accuracy(const ImageRecord& image, std::span<const TokenId> tokens,
                               const ModelParams& params, const ModelConfig& config,
                               std::span<const std::size_t> slots) {
  const std::vector<StepOutput> out = forward_teacher(tokens, image, params, config);
  TokenAccuracy acc;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const TokenId target = tokens[t + 1];
    if (target == kPad) continue;
    if (!slots.empty() && std::find(slots.begin(), slots.end(), t) == slots.end()) continue;
    ++acc.total;
    if (static_cast<TokenId>(argmax(out[t].p2)) == target) ++acc.correct;
  }
  return acc;
}

ModelParams scst_gradients(const ImageRecord& image, std::span<const TokenId> sampled,
                           bool finished, Real advantage, const ModelParams& params,
                           const ModelConfig& config) {
  ModelParams grads = zeros_like(params);
  TokenSeq tokens = {kBos};
  tokens.insert(tokens.end(), sampled.begin(), sampled.end());
  if (finished) tokens.push_back(kEos);
  if (tokens.size() < 2) return grads;

  Tape tape;
  const ModelVars vars = bind(tape, params, config);
  const ImageVars iv = bind_image(tape, vars, image, config);
  const std::vector<StepVars> steps = teacher_graph(tape, vars, iv, tokens, config);
  Var total;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Var lp = tape.pick(steps[t].logp2, static_cast<std::size_t>(tokens[t + 1]));
    total = total.valid() ? tape.add(total, lp) : lp;
  }
  const Var loss = tape.scale(total, -advantage);
  tape.backward(loss);
  accumulate_grads(tape, vars, grads);
  return grads;
}

ScstResult scst_update(const ImageRecord& image, const CorpusStats& stats, const Vocabulary& vocab,
                       const ModelParams& params, const ModelConfig& config,
                       std::uint64_t sample_seed) {
  if (image.references.empty()) {
    throw std::invalid_argument("image " + image.id + " has no references for the reward");
  }
  ScstResult r;
  const Decoded sampled = sample_decode(image, params, config, sample_seed);
  const Decoded greedy = greedy_decode(image, params, config);
  r.sample.sampled = sampled.tokens;
  r.sample.sampled_logprob = sampled.logprob;
  r.sample.sampled_finished = sampled.finished;
  r.sample.greedy = greedy.tokens;
  r.sample.reward_sampled = cider_d(vocab.decode(sampled.tokens), image.references, stats);
  r.sample.reward_greedy = cider_d(vocab.decode(greedy.tokens), image.references, stats);
  r.grads = scst_gradients(image, sampled.tokens, sampled.finished, r.sample.advantage(), params,
                           config);
  return r;
}

void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState& state, Real lr) {
  require_same_shape(params.size(), 1, grads.size(), 1, "adam gradient");
  if (!all_finite(grads)) throw std::invalid_argument("non-finite gradient");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require_same_shape(state.m.size(), 1, params.size(), 1, "adam first moment");
  require_same_shape(state.v.size(), 1, params.size(), 1, "adam second moment");
  ++state.step;
  const Real t = static_cast<Real>(state.step);
  const Real c1 = 1.0 - std::pow(kAdamBeta1, t);
  const Real c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Real g = grads[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const Real m_hat = state.m[i] / c1;
    const Real v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, Real lr) {
  const auto p = blocks(params);
  const auto g = blocks(grads);
  if (p.size() != g.size()) throw std::invalid_argument("adam: layout mismatch");
  std::size_t total = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    require_same_shape(p[b].size(), 1, g[b].size(), 1, "adam gradient block");
    if (!all_finite(g[b])) throw std::invalid_argument("non-finite gradient");
    total += p[b].size();
  }
  Vec flat_p, flat_g;
  flat_p.reserve(total);
  flat_g.reserve(total);
  for (std::size_t b = 0; b < p.size(); ++b) {
    flat_p.insert(flat_p.end(), p[b].begin(), p[b].end());
    flat_g.insert(flat_g.end(), g[b].begin(), g[b].end());
  }
  adam_step(flat_p, flat_g, state, lr);
  std::size_t off = 0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    std::copy_n(flat_p.begin() + static_cast<std::ptrdiff_t>(off), p[b].size(), p[b].begin());
    off += p[b].size();
  }
}

std::string EpochLog::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["phase"] = phase_name(phase);
  j["lr"] = lr;
  j["mean_loss"] = mean_loss;
  j["mean_cider_greedy"] = mean_cider_greedy ? nlohmann::json(*mean_cider_greedy) : nlohmann::json();
  if (phase == Phase::kMle) j["token_accuracy"] = token_accuracy;
  j["wallclock_s"] = wallclock_s;
  return j.dump();
}

std::uint64_t item_seed(std::uint64_t seed, Phase phase, std::size_t epoch, std::size_t item) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(phase == Phase::kMle ? 1 : 2),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    static_cast<std::uint32_t>(item), static_cast<std::uint32_t>(item >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Real mean_greedy_cider(std::span<const ImageRecord* const> images, const CorpusStats& stats,
                       const Vocabulary& vocab, const ModelParams& params,
                       const ModelConfig& config) {
  if (images.empty()) throw std::invalid_argument("mean_greedy_cider: no images");
  Vec scores(images.size(), 0.0);
  parallel_for(images.size(), thread_count(), [&](std::size_t i) {
    const Decoded d = greedy_decode(*images[i], params, config);
    scores[i] = cider_d(vocab.decode(d.tokens), images[i]->references, stats);
  });
  Real total = 0.0;
  for (Real s : scores) total += s;
  return total / static_cast<Real>(images.size());
}

namespace {

constexpr std::size_t kShuffleStream = std::numeric_limits<std::size_t>::max();

struct ItemResult {
  Real loss = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  ModelParams grads;
};

}  // namespace

void train_loop(const TrainData& data, TrainState& state, const ModelConfig& config,
                const TrainConfig& train, Phase phase, std::size_t target_epoch,
                const std::function<void(const EpochLog&, const TrainState&)>& on_epoch) {
  train.validate();
  if (data.images.empty()) throw std::invalid_argument("empty training set");
  if (data.stats == nullptr || data.vocab == nullptr) {
    throw std::invalid_argument("train_loop: corpus stats and vocabulary are required");
  }
  for (const ImageRecord* img : data.images) {
    if (img->captions.empty()) throw std::invalid_argument("image " + img->id + " has no captions");
  }
  state.params.validate(config);
  if (state.phase != phase) {
    if (state.phase == Phase::kRl) throw std::invalid_argument("cannot return to MLE after RL");
    state.phase = phase;
    state.epoch = 0;
    state.adam = AdamState{};
  }

  const std::size_t n = data.images.size();
  const std::size_t threads = thread_count();
  while (state.epoch < target_epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t epoch = state.epoch + 1;
    const Real lr = train.lr_at(phase, epoch);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(item_seed(train.seed, phase, epoch, kShuffleStream));
    for (std::size_t k = n; k > 1; --k) {
      const auto j = static_cast<std::size_t>(uniform01(shuffle_rng) * static_cast<Real>(k));
      std::swap(order[k - 1], order[std::min(j, k - 1)]);
    }

    Real loss_sum = 0.0;
    std::size_t correct = 0, total = 0;
    for (std::size_t begin = 0; begin < n; begin += train.batch_size) {
      const std::size_t end = std::min(n, begin + train.batch_size);
      std::vector<ItemResult> results(end - begin);
      parallel_for(results.size(), threads, [&](std::size_t k) {
        const std::size_t item = order[begin + k];
        const ImageRecord& img = *data.images[item];
        const std::uint64_t seed = item_seed(train.seed, phase, epoch, item);
        ItemResult& r = results[k];
        if (phase == Phase::kMle) {
          const TokenSeq& words = img.captions[seed % img.captions.size()];
          const TokenSeq tokens = wrap_caption(words, config);
          MleResult m = mle_gradients(img, tokens, state.params, config, train.gamma);
          r.loss = m.loss;
          r.correct = m.correct;
          r.total = m.total;
          r.grads = std::move(m.grads);
        } else {
          ScstResult s = scst_update(img, *data.stats, *data.vocab, state.params, config, seed);
          r.loss = -s.sample.advantage() * s.sample.sampled_logprob;
          r.grads = std::move(s.grads);
        }
      });
      // Fixed reduction order keeps the sum independent of the thread count.
      ModelParams batch = std::move(results[0].grads);
      for (std::size_t k = 1; k < results.size(); ++k) add_in_place(batch, results[k].grads);
      for (const ItemResult& r : results) {
        loss_sum += r.loss;
        correct += r.correct;
        total += r.total;
      }
      scale_in_place(batch, 1.0 / static_cast<Real>(results.size()));
      if (train.grad_clip_norm) clip_global_norm(batch, *train.grad_clip_norm);
      adam_step(state.params, batch, state.adam, lr);
    }
    state.epoch = epoch;

    EpochLog log;
    log.epoch = epoch;
    log.phase = phase;
    log.lr = lr;
    log.mean_loss = loss_sum / static_cast<Real>(n);
    log.token_accuracy = total == 0 ? 0.0 : static_cast<Real>(correct) / static_cast<Real>(total);
    const bool eval_now =
        epoch == target_epoch || (train.eval_every != 0 && epoch % train.eval_every == 0);
    if (eval_now) {
      log.mean_cider_greedy =
          mean_greedy_cider(data.images, *data.stats, *data.vocab, state.params, config);
    }
    log.wallclock_s =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();
    if (on_epoch) on_epoch(log, state);
  }
}

}  // namespace scenecap
