// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace scenecap {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& item : obj.items()) {
    if (known.count(item.key()) == 0) {
      throw std::invalid_argument("config: unknown key '" + (where.empty() ? "" : where + ".") +
                                  item.key() + "'");
    }
  }
}

template <class T>
void read_key(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  const std::pair<const char*, std::size_t> sizes[] = {
      {"hidden", model.hidden},       {"embed", model.embed},
      {"attn", model.attn},           {"scenes", model.scenes},
      {"region_dim", model.region_dim}, {"concept_dim", model.concept_dim},
      {"max_concepts", model.max_concepts}, {"max_len", model.max_len}};
  for (const auto& [name, v] : sizes) {
    if (v == 0) throw std::invalid_argument(std::string("model.") + name + " must be positive");
  }
  if (decode.beam_width == 0) throw std::invalid_argument("decode.beam_width must be positive");
}

std::string RunConfig::to_json() const {
  json j;
  j["model"] = {{"hidden", model.hidden},
                {"embed", model.embed},
                {"attn", model.attn},
                {"scenes", model.scenes},
                {"region_dim", model.region_dim},
                {"concept_dim", model.concept_dim},
                {"vocab", model.vocab},
                {"max_concepts", model.max_concepts},
                {"max_len", model.max_len},
                {"n_concepts", model.n_concepts},
                {"tie_output", model.tie_output},
                {"uniform_scene", model.uniform_scene},
                {"length_normalize", model.length_normalize}};
  j["train"] = {{"gamma", train.gamma},
                {"lr", train.lr},
                {"rl_lr", train.rl_lr},
                {"lr_decay", train.lr_decay},
                {"decay_every", train.decay_every},
                {"batch_size", train.batch_size},
                {"epochs_mle", train.epochs_mle},
                {"epochs_rl", train.epochs_rl},
                {"grad_clip_norm", train.grad_clip_norm ? json(*train.grad_clip_norm) : json()},
                {"seed", train.seed},
                {"eval_every", train.eval_every}};
  j["data"] = {{"manifest", data.manifest}, {"min_count", data.min_count}};
  j["decode"] = {{"beam_width", decode.beam_width}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  try {
    reject_unknown(j, {"model", "train", "data", "decode"}, "");
    if (j.contains("model")) {
      const json& m = j["model"];
      reject_unknown(m,
                     {"hidden", "embed", "attn", "scenes", "region_dim", "concept_dim", "vocab",
                      "max_concepts", "max_len", "n_concepts", "tie_output", "uniform_scene",
                      "length_normalize"},
                     "model");
      read_key(m, "hidden", c.model.hidden);
      read_key(m, "embed", c.model.embed);
      read_key(m, "attn", c.model.attn);
      read_key(m, "scenes", c.model.scenes);
      read_key(m, "region_dim", c.model.region_dim);
      read_key(m, "concept_dim", c.model.concept_dim);
      read_key(m, "vocab", c.model.vocab);
      read_key(m, "max_concepts", c.model.max_concepts);
      read_key(m, "max_len", c.model.max_len);
      read_key(m, "n_concepts", c.model.n_concepts);
      read_key(m, "tie_output", c.model.tie_output);
      read_key(m, "uniform_scene", c.model.uniform_scene);
      read_key(m, "length_normalize", c.model.length_normalize);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t,
                     {"gamma", "lr", "rl_lr", "lr_decay", "decay_every", "batch_size",
                      "epochs_mle", "epochs_rl", "grad_clip_norm", "seed", "eval_every"},
                     "train");
      read_key(t, "gamma", c.train.gamma);
      read_key(t, "lr", c.train.lr);
      read_key(t, "rl_lr", c.train.rl_lr);
      read_key(t, "lr_decay", c.train.lr_decay);
      read_key(t, "decay_every", c.train.decay_every);
      read_key(t, "batch_size", c.train.batch_size);
      read_key(t, "epochs_mle", c.train.epochs_mle);
      read_key(t, "epochs_rl", c.train.epochs_rl);
      if (t.contains("grad_clip_norm")) {
        const json& g = t["grad_clip_norm"];
        c.train.grad_clip_norm = g.is_null() ? std::nullopt : std::optional<Real>(g.get<Real>());
      }
      read_key(t, "seed", c.train.seed);
      read_key(t, "eval_every", c.train.eval_every);
    }
    if (j.contains("data")) {
      const json& d = j["data"];
      reject_unknown(d, {"manifest", "min_count"}, "data");
      read_key(d, "manifest", c.data.manifest);
      read_key(d, "min_count", c.data.min_count);
    }
    if (j.contains("decode")) {
      const json& d = j["decode"];
      reject_unknown(d, {"beam_width"}, "decode");
      read_key(d, "beam_width", c.decode.beam_width);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_json(text.str());
}

void bind_dataset_dims(ModelConfig& model, const DatasetDims& dims, std::size_t vocab_size) {
  auto check = [](std::size_t have, std::size_t want, const char* name) {
    if (have != want) {
      throw std::invalid_argument(std::string("dimension mismatch: model ") + name + " = " +
                                  std::to_string(have) + " but dataset has " +
                                  std::to_string(want));
    }
  };
  check(model.region_dim, dims.region_dim, "region_dim (C)");
  check(model.concept_dim, dims.concept_dim, "concept_dim (C_k)");
  check(model.scenes, dims.scenes, "scenes (s)");
  if (dims.max_concepts > model.max_concepts) {
    check(model.max_concepts, dims.max_concepts, "max_concepts (K_max)");
  }
  if (model.n_concepts == 0) model.n_concepts = dims.n_concepts;
  check(model.n_concepts, dims.n_concepts, "n_concepts");
  if (model.vocab == 0) model.vocab = vocab_size;
  check(model.vocab, vocab_size, "vocab (Q)");
}

// SFCK.

namespace {

constexpr std::array<char, 4> kSfckMagic = {'S', 'F', 'C', 'K'};
constexpr std::uint32_t kSfckVersion = 1;

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, Real x) { put(out, std::bit_cast<std::uint64_t>(x)); }

void put_str(std::ostream& out, const std::string& s) {
  if (s.size() > 0xffffffffu) throw std::invalid_argument("string too long for checkpoint");
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    T v;
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof v)) {
      throw std::runtime_error(std::string("SFCK truncated in ") + what);
    }
    return to_le(v);
  }
  Real f64(const char* what) { return std::bit_cast<Real>(get<std::uint64_t>(what)); }
  std::string str(const char* what, std::size_t limit = std::size_t{1} << 28) {
    const std::uint32_t n = get<std::uint32_t>(what);
    if (n > limit) throw std::runtime_error(std::string("SFCK corrupt length in ") + what);
    std::string s(n, '\0');
    if (n > 0 && !in_.read(s.data(), n)) {
      throw std::runtime_error(std::string("SFCK truncated in ") + what);
    }
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  ckpt.params.validate(ckpt.config.model);
  if (ckpt.vocab.size() != ckpt.config.model.vocab) {
    throw std::invalid_argument("checkpoint vocabulary size disagrees with model.vocab");
  }
  out.write(kSfckMagic.data(), kSfckMagic.size());
  put(out, kSfckVersion);
  put_str(out, ckpt.config.to_json());
  put(out, static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const std::string& t : ckpt.vocab.tokens()) put_str(out, t);

  std::uint32_t blocks = 0;
  std::as_const(ckpt.params).for_each(ConstParamVisitor(
      [&](const std::string&, std::span<const Real>, std::size_t, std::size_t) { ++blocks; }));
  put(out, blocks);
  std::as_const(ckpt.params).for_each(ConstParamVisitor(
      [&](const std::string& name, std::span<const Real> d, std::size_t rows, std::size_t cols) {
        put_str(out, name);
        put(out, static_cast<std::uint32_t>(rows));
        put(out, static_cast<std::uint32_t>(cols));
        for (Real x : d) put_f64(out, x);
      }));

  put(out, static_cast<std::uint8_t>(ckpt.progress ? 1 : 0));
  if (ckpt.progress) {
    const TrainProgress& p = *ckpt.progress;
    put(out, static_cast<std::uint8_t>(p.phase == Phase::kMle ? 0 : 1));
    put(out, static_cast<std::uint64_t>(p.epoch));
    put(out, p.adam.step);
    if (p.adam.m.size() != p.adam.v.size()) throw std::invalid_argument("Adam moments differ in size");
    put(out, static_cast<std::uint64_t>(p.adam.m.size()));
    for (Real x : p.adam.m) put_f64(out, x);
    for (Real x : p.adam.v) put_f64(out, x);
  }
  if (!out) throw std::runtime_error("SFCK write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kSfckMagic) {
    throw std::runtime_error("not a SFCK file");
  }
  Reader rd(in);
  const auto version = rd.get<std::uint32_t>("header");
  if (version != kSfckVersion) throw std::runtime_error("unsupported SFCK version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config = RunConfig::from_json(rd.str("config"));
  ckpt.config.model.validate();

  const auto n_tokens = rd.get<std::uint32_t>("vocabulary");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < n_tokens; ++i) tokens.push_back(rd.str("vocabulary", 1 << 16));
  ckpt.vocab = Vocabulary::from_tokens(std::move(tokens));
  if (ckpt.vocab.size() != ckpt.config.model.vocab) {
    throw std::runtime_error("SFCK vocabulary size disagrees with model.vocab");
  }

  ckpt.params = ModelParams::zeros(ckpt.config.model);
  std::uint32_t expected = 0;
  std::as_const(ckpt.params).for_each(ConstParamVisitor(
      [&](const std::string&, std::span<const Real>, std::size_t, std::size_t) { ++expected; }));
  const auto blocks = rd.get<std::uint32_t>("block count");
  if (blocks != expected) {
    throw std::runtime_error("SFCK holds " + std::to_string(blocks) + " blocks, config implies " +
                             std::to_string(expected));
  }
  ckpt.params.for_each(
      ParamVisitor([&](const std::string& name, std::span<Real> d, std::size_t rows, std::size_t cols) {
        const std::string stored = rd.str("block name", 1 << 10);
        const auto r = rd.get<std::uint32_t>("block shape");
        const auto c = rd.get<std::uint32_t>("block shape");
        if (stored != name || r != rows || c != cols) {
          throw std::runtime_error("SFCK block '" + stored + "' " + shape_string(r, c) +
                                   " does not match expected '" + name + "' " +
                                   shape_string(rows, cols));
        }
        for (Real& x : d) x = rd.f64(name.c_str());
      }));

  const auto flag = rd.get<std::uint8_t>("progress flag");
  if (flag > 1) throw std::runtime_error("SFCK corrupt progress flag");
  if (flag == 1) {
    TrainProgress p;
    const auto phase = rd.get<std::uint8_t>("progress");
    if (phase > 1) throw std::runtime_error("SFCK corrupt phase");
    p.phase = phase == 0 ? Phase::kMle : Phase::kRl;
    p.epoch = rd.get<std::uint64_t>("progress");
    p.adam.step = rd.get<std::uint64_t>("progress");
    const auto n = rd.get<std::uint64_t>("progress");
    if (n != 0 && n != ckpt.params.parameter_count()) {
      throw std::runtime_error("SFCK Adam moments disagree with the parameter count");
    }
    p.adam.m.resize(n);
    p.adam.v.resize(n);
    for (Real& x : p.adam.m) x = rd.f64("Adam moments");
    for (Real& x : p.adam.v) x = rd.f64("Adam moments");
    ckpt.progress = std::move(p);
  }
  if (!rd.at_end()) throw std::runtime_error("SFCK has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream buf;
  write_checkpoint(buf, ckpt);
  // Write to a sibling and rename so an interrupted save never leaves a
  // half-written checkpoint behind.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    const std::string bytes = buf.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace scenecap
