// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = scenecap::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scenecap_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

// A small dataset and config shared by the tests below.
struct Workspace {
  fs::path root, data, manifest, config;

  Workspace() {
    root = scratch("ws");
    data = root / "data";
    const Result g = run({"--seed", "5", "--out", data.string(), "gen", "--images", "10", "--test", "3"});
    REQUIRE(g.code == 0);
    manifest = data / "manifest.json";
    config = root / "config.json";
    std::ofstream(config) << R"({"model": {"hidden": 16, "embed": 8, "attn": 8},
                                 "data": {"min_count": 1}})";
  }

  Result train(const fs::path& out, int epochs, const std::string& resume = "") {
    std::vector<std::string> args{"--config", config.string(), "--out", out.string(), "train",
                                  "--data", manifest.string(), "--epochs", std::to_string(epochs)};
    if (!resume.empty()) args.insert(args.end(), {"--resume", resume});
    return run(args);
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  const Result g = run({"gen"});
  CHECK(g.code == 2);
  CHECK(g.err.find("--out") != std::string::npos);
  CHECK(run({"--config", "/no/such/file.json", "gen"}).code == 2);
}

TEST_CASE("gen is deterministic under a fixed seed") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const Result ra = run({"--seed", "3", "--out", a.string(), "gen", "--images", "8"});
  const Result rb = run({"--seed", "3", "--out", b.string(), "gen", "--images", "8"});
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.out.find("manifest.json") != std::string::npos);
  for (const char* f : {"manifest.json", "features.sfat", "captions.jsonl"})
    CHECK(read_file(a / f) == read_file(b / f));
}

TEST_CASE("train validates the config before doing any work") {
  const fs::path out = scratch("bad_gamma");
  const Result r = run({"--out", out.string(), "train", "--data", ws().manifest.string(), "--gamma", "1.5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("gamma") != std::string::npos);
  CHECK(!fs::exists(out / "checkpoint.sfck"));
}

TEST_CASE("train logs one record per epoch and the loss falls") {
  const fs::path out = scratch("train");
  const Result r = ws().train(out, 6);
  REQUIRE(r.code == 0);
  const auto log = lines(read_file(out / "train_log.jsonl"));
  REQUIRE(log.size() == 6);
  const json first = json::parse(log.front()), last = json::parse(log.back());
  for (const char* key : {"epoch", "phase", "lr", "mean_loss", "mean_cider_greedy", "token_accuracy", "wallclock_s"})
    CHECK(first.contains(key));
  CHECK(last.at("mean_loss").get<double>() < first.at("mean_loss").get<double>());
  CHECK(fs::exists(out / "checkpoint.sfck"));
}

TEST_CASE("resumed training reproduces the uninterrupted checkpoint") {
  const fs::path full = scratch("full"), split = scratch("split");
  REQUIRE(ws().train(full, 4).code == 0);
  REQUIRE(ws().train(split, 2).code == 0);
  REQUIRE(ws().train(split, 4, (split / "checkpoint.sfck").string()).code == 0);
  CHECK(read_file(full / "checkpoint.sfck") == read_file(split / "checkpoint.sfck"));
  CHECK(lines(read_file(split / "train_log.jsonl")).size() == 4);
}

TEST_CASE("caption: beam 1 matches greedy, attention dumps, unknown ids") {
  const fs::path model = scratch("cap_model");
  REQUIRE(ws().train(model, 3).code == 0);
  const std::string ckpt = (model / "checkpoint.sfck").string();

  const Result greedy = run({"caption", "--checkpoint", ckpt, "--data", ws().manifest.string(), "--greedy"});
  const Result beam1 = run({"caption", "--checkpoint", ckpt, "--data", ws().manifest.string(), "--beam", "1"});
  REQUIRE(greedy.code == 0);
  CHECK(greedy.out == beam1.out);
  CHECK(lines(greedy.out).size() == 10);

  const fs::path dump = scratch("cap_dump");
  const Result d = run({"--out", dump.string(), "caption", "--checkpoint", ckpt, "--image", "img0002",
                        "--greedy", "--dump-attn"});
  REQUIRE(d.code == 0);
  CHECK(fs::exists(dump / "captions.jsonl"));
  const auto rows = lines(read_file(dump / "attn" / "img0002.csv"));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0].rfind("token,alpha_1", 0) == 0);
  std::size_t n_alpha = 0;
  {
    std::istringstream h(rows[0]);
    for (std::string cell; std::getline(h, cell, ',');) n_alpha += cell.rfind("alpha_", 0) == 0;
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::istringstream in(rows[r]);
    std::string cell;
    std::getline(in, cell, ',');
    double alpha_sum = 0.0;
    for (std::size_t i = 0; i < n_alpha; ++i) {
      std::getline(in, cell, ',');
      alpha_sum += std::stod(cell);
    }
    CHECK(std::abs(alpha_sum - 1.0) <= 1e-6);
  }

  const Result missing = run({"caption", "--checkpoint", ckpt, "--image", "img9999"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("img0000") != std::string::npos);
  CHECK(run({"caption", "--checkpoint", ckpt, "--dump-attn"}).code == 2);
}

TEST_CASE("eval: self references, report keys, empty splits and dimension checks") {
  const Result self = run({"eval", "--data", ws().manifest.string(), "--split", "all", "--self-refs"});
  REQUIRE(self.code == 0);
  const json j = json::parse(self.out);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"bleu1", "bleu2", "bleu3", "bleu4", "cider_d", "n_images", "rouge_l"});
  CHECK(j.at("bleu1").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("bleu4").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("rouge_l").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("n_images") == 10);

  const fs::path model = scratch("eval_model");
  REQUIRE(ws().train(model, 1).code == 0);
  const std::string ckpt = (model / "checkpoint.sfck").string();
  const fs::path report = scratch("eval_out");
  const Result e = run({"--out", report.string(), "eval", "--checkpoint", ckpt, "--data", ws().manifest.string()});
  REQUIRE(e.code == 0);
  CHECK(json::parse(read_file(report / "eval.json")).at("n_images") == 3);
  CHECK(run({"eval", "--checkpoint", ckpt, "--data", ws().manifest.string(), "--split", "val"}).code == 1);

  // A dataset with a different region width cannot be captioned by this model.
  const fs::path other = scratch("other_data");
  REQUIRE(run({"--out", other.string(), "gen", "--images", "4"}).code == 0);
  std::string m = read_file(other / "manifest.json");
  json mj = json::parse(m);
  mj["dims"]["C"] = 15;
  std::ofstream(other / "manifest.json") << mj.dump();
  const Result mismatch = run({"eval", "--checkpoint", ckpt, "--data", (other / "manifest.json").string(), "--split", "all"});
  CHECK(mismatch.code == 1);
  CHECK(!mismatch.err.empty());
}
