// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text preprocessing, dataset files and the synthetic generator.
//
// On-disk layout of a dataset directory:
//   manifest.json   {version, dims:{C, C_k, s, K_max, n_concepts}, features, captions, splits}
//   features.sfat   binary region/concept/scene payload (see write_features)
//   captions.jsonl  one {image_id, captions:[raw strings]} object per line

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenecap/image_record.hpp"
#include "scenecap/metrics.hpp"
#include "scenecap/tokens.hpp"

namespace scenecap {

inline constexpr std::size_t kMaxCaptionTokens = 16;

/// Lowercase, split on whitespace runs, keep the first 16 tokens.
Words tokenize(std::string_view raw);

class Vocabulary {
 public:
  static const std::vector<std::string>& special_tokens();

  /// Tokens seen at least `min_count` times, ordered by (count desc, token asc)
  /// after the four specials.
  static Vocabulary build(const std::vector<Words>& captions, std::size_t min_count = 5);
  /// Rebuilds from the full id->token list (specials first), as stored in a checkpoint.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  /// UNK for anything outside the vocabulary.
  TokenId id(const std::string& token) const;
  /// Throws std::out_of_range for a bad id.
  const std::string& token(TokenId id) const;

  TokenSeq encode(const Words& words) const;
  Words decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct DatasetDims {
  std::size_t region_dim = 0;    // C
  std::size_t concept_dim = 0;   // C_k
  std::size_t scenes = 0;        // s
  std::size_t max_concepts = 0;  // K_max
  std::size_t n_concepts = 0;    // concept ids lie in [0, n_concepts)

  bool operator==(const DatasetDims&) const = default;
};

struct Splits {
  std::vector<std::string> train, val, test;
  bool operator==(const Splits&) const = default;
};

struct Manifest {
  int version = 1;
  DatasetDims dims;
  std::string features = "features.sfat";
  std::string captions = "captions.jsonl";
  Splits splits;

  bool operator==(const Manifest&) const = default;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// SFAT: "SFAT", u32 version = 1, u32 count; per record: u32 id length, id
/// bytes, u32 L, L x C f32 regions, u32 K, K x (u32 id, f32 score), s x f32
/// scene. All little-endian. Doubles are narrowed to f32 on write, so a
/// round trip is exact for float-representable values.
void write_features(std::ostream& out, std::span<const ImageRecord> records,
                    const DatasetDims& dims);
/// Validates every record against `dims`; throws std::runtime_error naming
/// the record on any mismatch, and never returns a partial list.
std::vector<ImageRecord> read_features(std::istream& in, const DatasetDims& dims);

void write_features(const std::filesystem::path& path, std::span<const ImageRecord> records,
                    const DatasetDims& dims);
std::vector<ImageRecord> read_features(const std::filesystem::path& path, const DatasetDims& dims);

struct Dataset {
  Manifest manifest;
  std::vector<ImageRecord> records;
  std::vector<std::vector<std::string>> raw_captions;  // parallel to records
  Vocabulary vocab;

  /// Record index by image id; throws listing the available ids when absent.
  std::size_t index_of(const std::string& id) const;
  std::vector<std::size_t> split(const std::string& name) const;
  /// Re-encodes every caption with `vocabulary` (e.g. a checkpoint's).
  void reencode(const Vocabulary& vocabulary);
};

/// Loads manifest, features and captions; builds the vocabulary from the
/// train split (all records when the split is empty).
Dataset load_dataset(const std::filesystem::path& manifest_path, std::size_t min_count = 5);

/// Writes manifest.json, the feature file and the captions file under `dir`.
/// Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_images = 20;
  std::size_t scenes = 4;
  std::size_t n_concepts = 6;
  std::size_t region_dim = 16;
  std::size_t concept_dim = 16;
  std::size_t min_regions = 8;
  std::size_t max_regions = 10;
  std::size_t max_concepts = 3;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  double noise = 0.05;        // relative to the prototype range
  double feature_scale = 10.0;  // prototypes are uniform in [-scale, scale]

  void validate() const;
};

/// Word tables used by the generator. Word kVerbSlot of a caption is
/// verbs[(c0 + 2 z) mod 2s] and word kPlaceSlot is places[z].
struct SynthLexicon {
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
  std::vector<std::string> places;

  static SynthLexicon make(std::size_t scenes, std::size_t n_concepts);
};

inline constexpr std::size_t kVerbSlot = 3;   // word index of the verb
inline constexpr std::size_t kPlaceSlot = 6;  // word index of the place

/// Draws every image from (seed, image index) so prefixes agree across sizes.
/// Each image has a scene z, one to K_max distinct concepts, a softened
/// one-hot scene vector, and regions: one scene-neutral context region per
/// scene class, one per concept, and noise fillers. The vocabulary uses
/// min_count 1.
Dataset gen_synthetic(const SynthConfig& config);

/// Scene id planted in a synthetic record (argmax of its scene vector).
std::size_t planted_scene(const ImageRecord& record);

}  // namespace scenecap
