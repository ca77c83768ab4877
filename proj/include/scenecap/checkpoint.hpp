// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the self-describing checkpoint file.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "scenecap/dataio.hpp"
#include "scenecap/decoder.hpp"
#include "scenecap/training.hpp"

namespace scenecap {

struct DataConfig {
  std::string manifest;
  std::size_t min_count = 5;
  bool operator==(const DataConfig&) const = default;
};

struct DecodeConfig {
  std::size_t beam_width = 2;
  bool operator==(const DecodeConfig&) const = default;
};

/// Everything a command needs besides its flags. JSON form:
///   {"model": {...}, "train": {...}, "data": {...}, "decode": {...}}
/// Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  DecodeConfig decode;

  /// Model sizes taken from a dataset (vocab, n_concepts) may still be 0.
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  bool operator==(const RunConfig&) const = default;
};

struct TrainProgress {
  Phase phase = Phase::kMle;
  std::size_t epoch = 0;
  AdamState adam;
  bool operator==(const TrainProgress&) const = default;
};

/// SFCK: "SFCK", u32 version, u32 length + RunConfig JSON, u32 count + vocab
/// tokens (u32 length + bytes each), u32 block count, per block (u32 name
/// length + name, u32 rows, u32 cols, rows x cols f64), then u8 flag and,
/// when set, the training progress (u8 phase, u64 epoch, u64 Adam step,
/// u64 n, n f64 first moments, n f64 second moments). Little-endian.
struct Checkpoint {
  RunConfig config;
  Vocabulary vocab;
  ModelParams params;
  std::optional<TrainProgress> progress;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws "not a SFCK file" on bad magic and a clean error on truncation or
/// a block that disagrees with the stored config.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Fills the dataset-derived model sizes and checks the rest against the
/// manifest; throws naming the first disagreement.
void bind_dataset_dims(ModelConfig& model, const DatasetDims& dims, std::size_t vocab_size);

}  // namespace scenecap
