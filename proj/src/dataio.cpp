// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/dataio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "scenecap/attention.hpp"

namespace scenecap {

using json = nlohmann::json;

Words tokenize(std::string_view raw) {
  Words out;
  std::string cur;
  for (char ch : raw) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      if (out.size() == kMaxCaptionTokens) return out;
      continue;
    }
    cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  if (!cur.empty() && out.size() < kMaxCaptionTokens) out.push_back(std::move(cur));
  return out;
}

const std::vector<std::string>& Vocabulary::special_tokens() {
  static const std::vector<std::string> kSpecials = {"<bos>", "<eos>", "<unk>", "<pad>"};
  return kSpecials;
}

Vocabulary Vocabulary::build(const std::vector<Words>& captions, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const Words& c : captions) {
    for (const std::string& w : c) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  const auto& specials = special_tokens();
  for (const auto& [w, n] : counts) {
    if (n < min_count) continue;
    if (std::find(specials.begin(), specials.end(), w) != specials.end()) continue;
    kept.emplace_back(w, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens = specials;
  for (auto& [w, n] : kept) tokens.push_back(w);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw std::invalid_argument("vocabulary must start with <bos> <eos> <unk> <pad>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

TokenId Vocabulary::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq Vocabulary::encode(const Words& words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const std::string& w : words) out.push_back(id(w));
  return out;
}

Words Vocabulary::decode(std::span<const TokenId> ids) const {
  Words out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token(t));
  return out;
}

// Manifest.

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) {
      throw std::runtime_error("unsupported manifest version " + std::to_string(m.version));
    }
    const json& d = j.at("dims");
    m.dims.region_dim = d.at("C").get<std::size_t>();
    m.dims.concept_dim = d.at("C_k").get<std::size_t>();
    m.dims.scenes = d.at("s").get<std::size_t>();
    m.dims.max_concepts = d.at("K_max").get<std::size_t>();
    m.dims.n_concepts = d.value("n_concepts", std::size_t{0});
    m.features = j.at("features").get<std::string>();
    m.captions = j.at("captions").get<std::string>();
    const json& s = j.at("splits");
    m.splits.train = s.value("train", std::vector<std::string>{});
    m.splits.val = s.value("val", std::vector<std::string>{});
    m.splits.test = s.value("test", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  json j;
  j["version"] = m.version;
  j["dims"] = {{"C", m.dims.region_dim},
               {"C_k", m.dims.concept_dim},
               {"s", m.dims.scenes},
               {"K_max", m.dims.max_concepts},
               {"n_concepts", m.dims.n_concepts}};
  j["features"] = m.features;
  j["captions"] = m.captions;
  j["splits"] = {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// SFAT.

namespace {

constexpr std::array<char, 4> kSfatMagic = {'S', 'F', 'A', 'T'};
constexpr std::uint32_t kSfatVersion = 1;
constexpr std::uint32_t kMaxIdLength = 4096;

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f32(std::ostream& out, Real x) {
  const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

std::uint32_t checked_u32(std::size_t n, const std::string& what) {
  if (n > 0xffffffffu) throw std::invalid_argument(what + " does not fit in u32");
  return static_cast<std::uint32_t>(n);
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool has(std::size_t n) const { return remaining() >= n; }

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return to_le(v);
  }
  std::uint32_t peek_u32() const {
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    return to_le(v);
  }
  Real f32() { return static_cast<Real>(std::bit_cast<float>(u32())); }
  std::string str(std::size_t n) {
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void record_error(const std::string& id, const std::string& what) {
  throw std::runtime_error("SFAT record '" + id + "': " + what);
}

std::string dims_note(const DatasetDims& dims) {
  return "record does not match manifest dims (C=" + std::to_string(dims.region_dim) +
         ", s=" + std::to_string(dims.scenes) + ")";
}

}  // namespace

void write_features(std::ostream& out, std::span<const ImageRecord> records,
                    const DatasetDims& dims) {
  out.write(kSfatMagic.data(), kSfatMagic.size());
  put_u32(out, kSfatVersion);
  put_u32(out, checked_u32(records.size(), "record count"));
  for (const ImageRecord& r : records) {
    if (r.regions.cols() != dims.region_dim) {
      record_error(r.id, "region dim " + std::to_string(r.regions.cols()) + " != C " +
                             std::to_string(dims.region_dim));
    }
    if (r.scene.size() != dims.scenes) {
      record_error(r.id, "scene length " + std::to_string(r.scene.size()) + " != s " +
                             std::to_string(dims.scenes));
    }
    put_u32(out, checked_u32(r.id.size(), "id length"));
    out.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
    put_u32(out, checked_u32(r.regions.rows(), "region count"));
    for (Real x : r.regions.flat()) put_f32(out, x);
    put_u32(out, checked_u32(r.concepts.size(), "concept count"));
    for (const DetectedConcept& c : r.concepts) {
      put_u32(out, c.id);
      put_f32(out, c.score);
    }
    for (Real x : r.scene) put_f32(out, x);
  }
  if (!out) throw std::runtime_error("SFAT write failed");
}

std::vector<ImageRecord> read_features(std::istream& in, const DatasetDims& dims) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ByteReader rd(buffer.str());

  if (!rd.has(4) || rd.str(4) != std::string(kSfatMagic.data(), kSfatMagic.size())) {
    throw std::runtime_error("not a SFAT file");
  }
  if (!rd.has(8)) throw std::runtime_error("SFAT truncated in header");
  const std::uint32_t version = rd.u32();
  if (version != kSfatVersion) {
    throw std::runtime_error("unsupported SFAT version " + std::to_string(version));
  }
  const std::uint32_t count = rd.u32();

  std::vector<ImageRecord> records;
  std::vector<std::string> seen;
  std::string prev_id;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!rd.has(4)) {
      throw std::runtime_error("SFAT truncated: " + std::to_string(i) + " of " +
                               std::to_string(count) + " records present");
    }
    const std::uint32_t id_len = rd.peek_u32();
    if (id_len == 0 || id_len > kMaxIdLength || !rd.has(4 + std::size_t{id_len})) {
      // A sane length field is the first thing a misaligned read breaks.
      if (i > 0) record_error(prev_id, dims_note(dims) + ", or the file is truncated");
      throw std::runtime_error("SFAT truncated or corrupt at record 0");
    }
    rd.u32();
    ImageRecord r;
    r.id = rd.str(id_len);

    if (!rd.has(4)) record_error(r.id, "truncated before region count");
    const std::uint32_t L = rd.u32();
    if (L == 0) record_error(r.id, "image has no regions");
    const std::size_t region_bytes = std::size_t{L} * dims.region_dim * 4;
    if (!rd.has(region_bytes + 4)) record_error(r.id, "truncated in region block");
    r.regions = Mat(L, dims.region_dim);
    for (Real& x : r.regions.flat()) {
      x = rd.f32();
      if (!std::isfinite(x)) record_error(r.id, "non-finite region feature");
    }

    const std::uint32_t K = rd.u32();
    if (K == 0) record_error(r.id, "empty concept set");
    if (dims.max_concepts != 0 && K > dims.max_concepts) {
      record_error(r.id, std::to_string(K) + " concepts exceed K_max " +
                             std::to_string(dims.max_concepts));
    }
    if (!rd.has(std::size_t{K} * 8 + dims.scenes * 4)) record_error(r.id, "truncated in concept block");
    for (std::uint32_t k = 0; k < K; ++k) {
      DetectedConcept c;
      c.id = rd.u32();
      c.score = rd.f32();
      if (dims.n_concepts != 0 && c.id >= dims.n_concepts) {
        record_error(r.id, "concept id " + std::to_string(c.id) + " >= n_concepts " +
                               std::to_string(dims.n_concepts));
      }
      if (!(c.score >= 0.0 && c.score <= 1.0)) record_error(r.id, "concept score outside [0, 1]");
      r.concepts.push_back(c);
    }
    Vec scene(dims.scenes);
    for (Real& x : scene) x = rd.f32();
    try {
      r.scene = SceneVector::normalize(std::move(scene)).values;
    } catch (const std::invalid_argument& e) {
      record_error(r.id, e.what());
    }
    if (std::find(seen.begin(), seen.end(), r.id) != seen.end()) record_error(r.id, "duplicate id");
    seen.push_back(r.id);
    prev_id = r.id;
    records.push_back(std::move(r));
  }
  if (rd.remaining() != 0) {
    if (count > 0) {
      record_error(prev_id, dims_note(dims) + " (" + std::to_string(rd.remaining()) +
                                " trailing bytes)");
    }
    throw std::runtime_error("SFAT has trailing bytes after an empty record list");
  }
  return records;
}

void write_features(const std::filesystem::path& path, std::span<const ImageRecord> records,
                    const DatasetDims& dims) {
  std::ostringstream buf;
  write_features(buf, records, dims);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<ImageRecord> read_features(const std::filesystem::path& path,
                                       const DatasetDims& dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  return read_features(in, dims);
}

// Dataset.

std::size_t Dataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == id) return i;
  }
  std::string ids;
  for (const ImageRecord& r : records) ids += (ids.empty() ? "" : ", ") + r.id;
  throw std::out_of_range("unknown image id '" + id + "'; available: " + ids);
}

std::vector<std::size_t> Dataset::split(const std::string& name) const {
  const std::vector<std::string>* ids = nullptr;
  if (name == "train") ids = &manifest.splits.train;
  else if (name == "val") ids = &manifest.splits.val;
  else if (name == "test") ids = &manifest.splits.test;
  else if (name == "all") {
    std::vector<std::size_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  } else {
    throw std::invalid_argument("unknown split '" + name + "' (train, val, test, all)");
  }
  std::vector<std::size_t> out;
  out.reserve(ids->size());
  for (const std::string& id : *ids) out.push_back(index_of(id));
  return out;
}

void Dataset::reencode(const Vocabulary& vocabulary) {
  vocab = vocabulary;
  for (ImageRecord& r : records) {
    r.captions.clear();
    for (const Words& w : r.references) r.captions.push_back(vocab.encode(w));
  }
}

Dataset load_dataset(const std::filesystem::path& manifest_path, std::size_t min_count) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const std::filesystem::path dir = manifest_path.parent_path();
  ds.records = read_features(dir / ds.manifest.features, ds.manifest.dims);
  ds.raw_captions.resize(ds.records.size());

  std::ifstream in(dir / ds.manifest.captions);
  if (!in) throw std::runtime_error("cannot open captions file " + (dir / ds.manifest.captions).string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id;
    std::vector<std::string> caps;
    try {
      const json j = json::parse(line);
      id = j.at("image_id").get<std::string>();
      caps = j.at("captions").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw std::runtime_error("captions line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::size_t idx = ds.index_of(id);
    for (std::string& c : caps) ds.raw_captions[idx].push_back(std::move(c));
  }
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    for (const std::string& c : ds.raw_captions[i]) ds.records[i].references.push_back(tokenize(c));
  }
  // Validates split ids as a side effect.
  std::vector<std::size_t> train = ds.split("train");
  for (const char* name : {"val", "test"}) ds.split(name);
  if (train.empty()) train = ds.split("all");
  std::vector<Words> corpus;
  for (std::size_t i : train) {
    for (const Words& w : ds.records[i].references) corpus.push_back(w);
  }
  ds.reencode(Vocabulary::build(corpus, min_count));
  return ds;
}

std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  write_features(dir / dataset.manifest.features, dataset.records, dataset.manifest.dims);
  {
    std::ofstream out(dir / dataset.manifest.captions);
    if (!out) throw std::runtime_error("cannot write " + (dir / dataset.manifest.captions).string());
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      const json j = {{"image_id", dataset.records[i].id},
                      {"captions", i < dataset.raw_captions.size() ? dataset.raw_captions[i]
                                                                   : std::vector<std::string>{}}};
      out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for captions");
  }
  const std::filesystem::path manifest = dir / "manifest.json";
  write_manifest(manifest, dataset.manifest);
  return manifest;
}

// Synthetic data.

void SynthConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("synthetic config: ") + name + " must be positive");
  };
  positive(n_images, "images");
  positive(scenes, "scenes");
  positive(n_concepts, "concepts");
  positive(region_dim, "region dim");
  positive(concept_dim, "concept dim");
  positive(max_concepts, "max concepts");
  positive(min_regions, "min regions");
  if (max_regions < min_regions) throw std::invalid_argument("synthetic config: max regions < min regions");
  if (n_val + n_test >= n_images) throw std::invalid_argument("synthetic config: no training images left");
  if (!(noise >= 0.0)) throw std::invalid_argument("synthetic config: noise must be >= 0");
  if (!(feature_scale > 0.0) || !std::isfinite(feature_scale)) {
    throw std::invalid_argument("synthetic config: feature scale must be > 0");
  }
}

SynthLexicon SynthLexicon::make(std::size_t scenes, std::size_t n_concepts) {
  static const char* kNouns[] = {"dog", "cat", "man", "woman", "bird", "horse", "child", "cow",
                                 "sheep", "boy", "girl", "bear"};
  static const char* kVerbs[] = {"sitting", "sleeping", "laying", "standing", "running", "eating",
                                 "playing", "resting", "walking", "waiting", "jumping", "looking"};
  static const char* kPlaces[] = {"kitchen", "park", "street", "bedroom", "beach", "field"};
  auto fill = [](std::vector<std::string>& out, std::size_t n, const auto& table, const char* stem) {
    const std::size_t have = std::size(table);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(i < have ? std::string(table[i]) : stem + std::to_string(i));
    }
  };
  SynthLexicon lex;
  fill(lex.nouns, n_concepts, kNouns, "thing");
  fill(lex.verbs, 2 * scenes, kVerbs, "doing");
  fill(lex.places, scenes, kPlaces, "place");
  return lex;
}

namespace {

Real as_float(Real x) { return static_cast<Real>(static_cast<float>(x)); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<Real>(n)));
}

Real draw(std::mt19937_64& rng, Real lo, Real hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace

std::size_t planted_scene(const ImageRecord& record) { return argmax(record.scene); }

Dataset gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const SynthLexicon lex = SynthLexicon::make(cfg.scenes, cfg.n_concepts);
  const std::size_t k_max = std::min(cfg.max_concepts, cfg.n_concepts);

  // Prototypes are shared by every image.
  std::mt19937_64 proto_rng(mix_seed(cfg.seed, 0));
  auto prototype = [&] {
    Vec v(cfg.region_dim);
    for (Real& x : v) x = draw(proto_rng, -1.0, 1.0);
    return v;
  };
  std::vector<Vec> context_protos, concept_protos;
  for (std::size_t k = 0; k < cfg.scenes; ++k) context_protos.push_back(prototype());
  for (std::size_t c = 0; c < cfg.n_concepts; ++c) concept_protos.push_back(prototype());

  Dataset ds;
  ds.manifest.dims = {cfg.region_dim, cfg.concept_dim, cfg.scenes, cfg.max_concepts, cfg.n_concepts};
  const std::size_t n_train = cfg.n_images - cfg.n_val - cfg.n_test;

  std::vector<Words> corpus;
  for (std::size_t i = 0; i < cfg.n_images; ++i) {
    std::mt19937_64 rng(mix_seed(cfg.seed, i + 1));
    ImageRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "img%04zu", i);
    r.id = id;

    const std::size_t z = draw_index(rng, cfg.scenes);
    const std::size_t K = 1 + draw_index(rng, k_max);
    std::vector<std::size_t> pool(cfg.n_concepts);
    for (std::size_t c = 0; c < pool.size(); ++c) pool[c] = c;
    for (std::size_t k = 0; k < K; ++k) std::swap(pool[k], pool[k + draw_index(rng, pool.size() - k)]);
    for (std::size_t k = 0; k < K; ++k) {
      const Real score = k == 0 ? draw(rng, 0.8, 1.0) : draw(rng, 0.5, 0.8);
      r.concepts.push_back({static_cast<std::uint32_t>(pool[k]), as_float(score)});
    }
    // Captions name nouns by descending score, so noun order is recoverable
    // from the concept set alone.
    std::stable_sort(r.concepts.begin(), r.concepts.end(),
                     [](const DetectedConcept& a, const DetectedConcept& b) { return a.score > b.score; });
    for (std::size_t k = 0; k < K; ++k) pool[k] = r.concepts[k].id;

    // Softened one-hot: the peak keeps most of the mass. Entries are f32 so
    // the sum stays within 1e-6 of 1 and ingestion leaves them untouched.
    const Real peak = cfg.scenes == 1 ? 1.0 : as_float(draw(rng, 0.7, 0.9));
    r.scene.assign(cfg.scenes, cfg.scenes == 1 ? 1.0 : as_float((1.0 - peak) / static_cast<Real>(cfg.scenes - 1)));
    r.scene[z] = peak;

    const std::size_t base = cfg.scenes + K;
    const std::size_t L = std::max(base, cfg.min_regions + draw_index(rng, cfg.max_regions - cfg.min_regions + 1));
    std::vector<Vec> rows;
    for (const Vec& p : context_protos) rows.push_back(p);
    for (std::size_t k = 0; k < K; ++k) rows.push_back(concept_protos[pool[k]]);
    while (rows.size() < L) rows.push_back(Vec(cfg.region_dim, 0.0));
    for (std::size_t k = rows.size(); k > 1; --k) std::swap(rows[k - 1], rows[draw_index(rng, k)]);
    r.regions = Mat(L, cfg.region_dim);
    for (std::size_t row = 0; row < L; ++row) {
      for (std::size_t c = 0; c < cfg.region_dim; ++c) {
        r.regions(row, c) =
            as_float(cfg.feature_scale * (rows[row][c] + draw(rng, -cfg.noise, cfg.noise)));
      }
    }

    const std::size_t c0 = pool[0];
    std::string caption = "a " + lex.nouns[c0] + " is " +
                          lex.verbs[(c0 + 2 * z) % (2 * cfg.scenes)] + " in the " + lex.places[z];
    if (K > 1) caption += " with a " + lex.nouns[pool[1]];
    if (K > 2) caption += " and a " + lex.nouns[pool[2]];
    for (std::size_t k = 3; k < K; ++k) caption += " and a " + lex.nouns[pool[k]];

    r.references.push_back(tokenize(caption));
    corpus.push_back(r.references.back());
    ds.raw_captions.push_back({caption});
    (i < n_train ? ds.manifest.splits.train
                 : i < n_train + cfg.n_val ? ds.manifest.splits.val : ds.manifest.splits.test)
        .push_back(r.id);
    ds.records.push_back(std::move(r));
  }
  std::vector<Words> train_corpus(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.reencode(Vocabulary::build(train_corpus, 1));
  return ds;
}

}  // namespace scenecap
