// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenecap/checkpoint.hpp"
#include "scenecap/dataio.hpp"
#include "scenecap/metrics.hpp"
#include "scenecap/training.hpp"

namespace scenecap::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad flags or flag values; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig load_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = RunConfig::load(g.config);
  if (g.seed) cfg.train.seed = *g.seed;
  return cfg;
}

fs::path require_out(const Globals& g, const char* command) {
  if (g.out.empty()) throw UsageError(std::string(command) + ": --out <dir> is required");
  fs::create_directories(g.out);
  return g.out;
}

std::string pick_manifest(const std::string& flag, const std::string& fallback) {
  const std::string& m = flag.empty() ? fallback : flag;
  if (m.empty()) throw UsageError("no dataset: pass --data <manifest.json> or set data.manifest");
  return m;
}

std::vector<std::size_t> select_images(const Dataset& ds, const std::vector<std::string>& ids,
                                       const std::string& split) {
  if (ids.empty()) return ds.split(split);
  std::vector<std::size_t> out;
  for (const std::string& id : ids) out.push_back(ds.index_of(id));
  return out;
}

std::string join(const Words& words) {
  std::string s;
  for (const std::string& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::string fmt(Real x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Decoder flags shared by caption and eval.
struct DecodeFlags {
  std::optional<std::size_t> beam;
  bool greedy = false;

  void add(CLI::App* app) {
    app->add_option("--beam", beam, "beam width (default from config)")->check(CLI::PositiveNumber);
    app->add_flag("--greedy", greedy, "greedy decoding");
  }

  Decoded run(const ImageRecord& img, const Checkpoint& ck) const {
    if (greedy) return greedy_decode(img, ck.params, ck.config.model);
    return beam_decode(img, ck.params, ck.config.model, beam.value_or(ck.config.decode.beam_width));
  }
};

// A checkpoint together with the dataset it is applied to, encoded with the
// checkpoint's vocabulary.
struct Loaded {
  Checkpoint ck;
  Dataset ds;
};

Loaded load_for_inference(const std::string& ckpt_path, const std::string& data_flag) {
  Loaded l{load_checkpoint(ckpt_path), {}};
  l.ds = load_dataset(pick_manifest(data_flag, l.ck.config.data.manifest),
                      l.ck.config.data.min_count);
  l.ds.reencode(l.ck.vocab);
  ModelConfig model = l.ck.config.model;
  bind_dataset_dims(model, l.ds.manifest.dims, l.ck.vocab.size());
  return l;
}

// gen

struct GenFlags {
  SynthConfig synth;
};

int cmd_gen(const Globals& g, const GenFlags& f, std::ostream& out) {
  SynthConfig sc = f.synth;
  sc.seed = g.seed.value_or(sc.seed);
  const fs::path dir = require_out(g, "gen");
  const Dataset ds = gen_synthetic(sc);
  out << save_dataset(dir, ds).string() << "\n";
  return 0;
}

// train

struct TrainFlags {
  std::string data;
  std::optional<Real> gamma, lr;
  std::optional<std::size_t> epochs, rl, batch, eval_every;
  std::string resume;
};

int cmd_train(const Globals& g, const TrainFlags& f, std::ostream& out) {
  RunConfig cfg = load_config(g);
  if (f.gamma) cfg.train.gamma = *f.gamma;
  if (f.lr) cfg.train.lr = *f.lr;
  if (f.epochs) cfg.train.epochs_mle = *f.epochs;
  if (f.rl) cfg.train.epochs_rl = *f.rl;
  if (f.batch) cfg.train.batch_size = *f.batch;
  if (f.eval_every) cfg.train.eval_every = *f.eval_every;
  if (!f.data.empty()) cfg.data.manifest = f.data;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path dir = require_out(g, "train");
  Dataset ds = load_dataset(pick_manifest(cfg.data.manifest, ""), cfg.data.min_count);

  TrainState state;
  Vocabulary vocab = ds.vocab;
  if (!f.resume.empty()) {
    Checkpoint ck = load_checkpoint(f.resume);
    cfg.model = ck.config.model;
    vocab = ck.vocab;
    ds.reencode(vocab);
    bind_dataset_dims(cfg.model, ds.manifest.dims, vocab.size());
    state.params = std::move(ck.params);
    if (ck.progress) {
      state.phase = ck.progress->phase;
      state.epoch = ck.progress->epoch;
      state.adam = std::move(ck.progress->adam);
    }
  } else {
    bind_dataset_dims(cfg.model, ds.manifest.dims, vocab.size());
    state.params = ModelParams::init(cfg.model, cfg.train.seed);
  }

  std::vector<std::size_t> idx = ds.split("train");
  if (idx.empty()) idx = ds.split("all");
  std::vector<const ImageRecord*> images;
  std::vector<std::vector<Words>> refs;
  for (std::size_t i : idx) {
    images.push_back(&ds.records[i]);
    refs.push_back(ds.records[i].references);
  }
  const CorpusStats stats = build_corpus_stats(refs);
  const TrainData data{images, &stats, &vocab};

  const fs::path ckpt_path = dir / "checkpoint.sfck";
  std::ofstream log(dir / "train_log.jsonl", f.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot write " + (dir / "train_log.jsonl").string());
  auto save = [&](const TrainState& s) {
    save_checkpoint(ckpt_path, Checkpoint{cfg, vocab, s.params, TrainProgress{s.phase, s.epoch, s.adam}});
  };
  auto on_epoch = [&](const EpochLog& rec, const TrainState& s) {
    const std::string line = rec.to_json();
    log << line << "\n" << std::flush;
    out << line << "\n" << std::flush;
    save(s);
  };

  if (state.phase == Phase::kMle) {
    train_loop(data, state, cfg.model, cfg.train, Phase::kMle, cfg.train.epochs_mle, on_epoch);
  }
  if (cfg.train.epochs_rl > 0) {
    train_loop(data, state, cfg.model, cfg.train, Phase::kRl, cfg.train.epochs_rl, on_epoch);
  }
  save(state);
  out << ckpt_path.string() << "\n";
  return 0;
}

// caption

struct CaptionFlags {
  std::string checkpoint;
  std::string data;
  std::vector<std::string> images;
  std::string split = "all";
  DecodeFlags decode;
  bool dump_attn = false;
};

void write_attention_csv(const fs::path& path, const Decoded& d, const Vocabulary& vocab,
                         const ImageRecord& img) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "token";
  for (std::size_t i = 0; i < img.regions.rows(); ++i) f << ",alpha_" << i + 1;
  for (std::size_t j = 0; j < img.concepts.size(); ++j) f << ",beta_" << j + 1;
  f << "\n";
  for (std::size_t t = 0; t < d.alpha.size(); ++t) {
    f << (t < d.tokens.size() ? vocab.token(d.tokens[t]) : vocab.token(kEos));
    for (Real a : d.alpha[t]) f << "," << fmt(a);
    for (Real b : d.beta[t]) f << "," << fmt(b);
    f << "\n";
  }
}

int cmd_caption(const Globals& g, const CaptionFlags& f, std::ostream& out) {
  const Loaded l = load_for_inference(f.checkpoint, f.data);
  const std::vector<std::size_t> idx = select_images(l.ds, f.images, f.split);
  if (idx.empty()) throw std::runtime_error("split '" + f.split + "' is empty");
  fs::path dir;
  std::ofstream jsonl;
  if (!g.out.empty()) {
    dir = require_out(g, "caption");
    jsonl.open(dir / "captions.jsonl");
    if (!jsonl) throw std::runtime_error("cannot write " + (dir / "captions.jsonl").string());
  } else if (f.dump_attn) {
    throw UsageError("caption: --dump-attn needs --out <dir>");
  }
  if (f.dump_attn) fs::create_directories(dir / "attn");

  for (std::size_t i : idx) {
    const ImageRecord& img = l.ds.records[i];
    const Decoded d = f.decode.run(img, l.ck);
    const std::string caption = join(l.ck.vocab.decode(d.tokens));
    out << img.id << "\t" << caption << "\n";
    if (jsonl.is_open()) {
      jsonl << json{{"image_id", img.id}, {"caption", caption}, {"finished", d.finished}}.dump()
            << "\n";
    }
    if (f.dump_attn) write_attention_csv(dir / "attn" / (img.id + ".csv"), d, l.ck.vocab, img);
  }
  return 0;
}

// eval

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  DecodeFlags decode;
  bool self_refs = false;
};

int cmd_eval(const Globals& g, const EvalFlags& f, std::ostream& out) {
  Dataset ds;
  std::optional<Loaded> l;
  if (f.self_refs) {
    const RunConfig cfg = load_config(g);
    ds = load_dataset(pick_manifest(f.data, cfg.data.manifest), cfg.data.min_count);
  } else {
    if (f.checkpoint.empty()) throw UsageError("eval: --checkpoint is required");
    l.emplace(load_for_inference(f.checkpoint, f.data));
  }
  const Dataset& data = l ? l->ds : ds;
  const std::vector<std::size_t> idx = data.split(f.split);
  if (idx.empty()) throw std::runtime_error("split '" + f.split + "' is empty");

  std::vector<Words> cands;
  std::vector<std::vector<Words>> refs;
  for (std::size_t i : idx) {
    const ImageRecord& img = data.records[i];
    if (img.references.empty()) throw std::runtime_error("image " + img.id + " has no references");
    refs.push_back(img.references);
    cands.push_back(l ? l->ck.vocab.decode(f.decode.run(img, l->ck).tokens) : img.references[0]);
  }
  const MetricReport r = evaluate(cands, refs);
  const json j = {{"bleu1", r.bleu1}, {"bleu2", r.bleu2}, {"bleu3", r.bleu3},
                  {"bleu4", r.bleu4}, {"rouge_l", r.rouge_l}, {"cider_d", r.cider_d},
                  {"n_images", r.n_images}};
  out << j.dump() << "\n";
  if (!g.out.empty()) {
    const fs::path dir = require_out(g, "eval");
    std::ofstream file(dir / "eval.json");
    if (!(file << j.dump(2) << "\n")) throw std::runtime_error("cannot write " + (dir / "eval.json").string());
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene-conditioned captioning decoder: data generation, training, decoding, scoring."};
  app.name("scenecap");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config, "run configuration JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for every random draw of the command");
  app.add_option("--out", g.out, "output directory");

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
  gen_cmd->add_option("--images", gen.synth.n_images, "number of images")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--scenes", gen.synth.scenes, "scene classes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--concepts", gen.synth.n_concepts, "concept vocabulary size")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--val", gen.synth.n_val, "images held out as the val split");
  gen_cmd->add_option("--test", gen.synth.n_test, "images held out as the test split");
  gen_cmd->add_option("--noise", gen.synth.noise, "region noise amplitude");

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "likelihood training, then optional SCST");
  train_cmd->add_option("--data", train.data, "dataset manifest");
  train_cmd->add_option("--gamma", train.gamma, "weight of the first-layer loss");
  train_cmd->add_option("--lr", train.lr, "initial learning rate");
  train_cmd->add_option("--epochs", train.epochs, "likelihood epochs");
  train_cmd->add_option("--rl", train.rl, "SCST epochs after the likelihood phase");
  train_cmd->add_option("--batch", train.batch, "images per update");
  train_cmd->add_option("--eval-every", train.eval_every, "greedy CIDEr-D logging interval (0: last epoch only)");
  train_cmd->add_option("--resume", train.resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  CaptionFlags caption;
  CLI::App* caption_cmd = app.add_subcommand("caption", "decode captions");
  caption_cmd->add_option("--checkpoint", caption.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  caption_cmd->add_option("--data", caption.data, "dataset manifest (default: the training one)");
  caption_cmd->add_option("--image", caption.images, "image id (repeatable)");
  caption_cmd->add_option("--split", caption.split, "train, val, test or all");
  caption.decode.add(caption_cmd);
  caption_cmd->add_flag("--dump-attn", caption.dump_attn, "write <out>/attn/<id>.csv with per-word alpha and beta");

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score decoded captions against references");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data, "dataset manifest (default: the training one)");
  eval_cmd->add_option("--split", eval.split, "train, val, test or all");
  eval.decode.add(eval_cmd);
  eval_cmd->add_flag("--self-refs", eval.self_refs, "score each image's first reference instead of a model");

  std::vector<const char*> argv{"scenecap"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen(g, gen, out);
    if (*train_cmd) return cmd_train(g, train, out);
    if (*caption_cmd) return cmd_caption(g, caption, out);
    if (*eval_cmd) return cmd_eval(g, eval, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace scenecap::cli
