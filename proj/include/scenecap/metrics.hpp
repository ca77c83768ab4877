// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Caption metrics on whitespace tokens: BLEU-1..4, ROUGE-L, CIDEr-D.

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenecap/tensor.hpp"

namespace scenecap {

using Words = std::vector<std::string>;

inline constexpr std::size_t kMaxNgram = 4;

/// Clipped n-gram matches and candidate n-gram totals for n = 1..max_n,
/// plus the candidate length and the closest reference length.
struct BleuCounts {
  std::vector<std::size_t> matched;
  std::vector<std::size_t> total;
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
};

/// Throws std::invalid_argument for an empty reference list.
BleuCounts bleu_counts(const Words& candidate, const std::vector<Words>& references,
                       std::size_t max_n = kMaxNgram);

/// Sentence BLEU-1..max_n (cumulative, uniform weights). A zero precision
/// p_k, k >= 2, is replaced by 1e-9 / max(t_k, 1); without unigram overlap
/// every order scores 0. Empty candidates score 0.
Vec bleu(const Words& candidate, const std::vector<Words>& references,
         std::size_t max_n = kMaxNgram);

/// Corpus BLEU-1..max_n: counts and lengths summed before the ratio; no smoothing.
Vec corpus_bleu(const std::vector<Words>& candidates,
                const std::vector<std::vector<Words>>& references, std::size_t max_n = kMaxNgram);

inline constexpr Real kRougeBeta = 1.2;

/// LCS F-measure with beta = 1.2, max over references.
Real rouge_l(const Words& candidate, const std::vector<Words>& references);

/// Document frequencies of every reference n-gram (n = 1..4). An image
/// counts once per n-gram however many of its references contain it.
struct CorpusStats {
  std::array<std::unordered_map<std::string, std::size_t>, kMaxNgram> df;
  std::size_t n_images = 0;

  std::size_t document_frequency(const Words& ngram) const;
};

CorpusStats build_corpus_stats(const std::vector<std::vector<Words>>& reference_sets);

enum class CiderVariant {
  kD,      // clipped counts and a Gaussian length penalty, sigma = 6
  kPlain,  // plain cosine, no clipping or penalty
};

/// 10 x mean over n and over references of the TF-IDF cosine, with
/// idf = log(N) - log(max(1, df)). Throws for empty stats or references.
Real cider(const Words& candidate, const std::vector<Words>& references, const CorpusStats& stats,
           CiderVariant variant);

inline Real cider_d(const Words& candidate, const std::vector<Words>& references,
                    const CorpusStats& stats) {
  return cider(candidate, references, stats, CiderVariant::kD);
}

struct MetricReport {
  Real bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  Real rouge_l = 0.0;
  Real cider_d = 0.0;
  std::size_t n_images = 0;
};

/// Corpus BLEU, mean ROUGE-L and mean CIDEr-D against stats built from
/// `references`. Throws for an empty corpus or mismatched sizes.
MetricReport evaluate(const std::vector<Words>& candidates,
                      const std::vector<std::vector<Words>>& references);

}  // namespace scenecap
