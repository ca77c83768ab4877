// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenecap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace scenecap {

namespace {

constexpr Real kBleuEpsilon = 1e-9;
constexpr Real kCiderSigma = 6.0;

using NgramCounts = std::map<std::string, std::size_t>;

std::string join(const Words& w, std::size_t begin, std::size_t n) {
  std::string key = w[begin];
  for (std::size_t i = 1; i < n; ++i) {
    key += ' ';
    key += w[begin + i];
  }
  return key;
}

NgramCounts ngrams(const Words& w, std::size_t n) {
  NgramCounts counts;
  if (w.size() < n) return counts;
  for (std::size_t i = 0; i + n <= w.size(); ++i) ++counts[join(w, i, n)];
  return counts;
}

void require_references(const std::vector<Words>& references) {
  if (references.empty()) throw std::invalid_argument("empty references");
}

}  // namespace

BleuCounts bleu_counts(const Words& candidate, const std::vector<Words>& references,
                       std::size_t max_n) {
  require_references(references);
  BleuCounts c;
  c.matched.assign(max_n, 0);
  c.total.assign(max_n, 0);
  c.cand_len = candidate.size();
  // Closest reference length; ties go to the shorter one.
  c.ref_len = references.front().size();
  for (const Words& r : references) {
    const auto d = [&](std::size_t len) {
      return len > c.cand_len ? len - c.cand_len : c.cand_len - len;
    };
    if (d(r.size()) < d(c.ref_len) || (d(r.size()) == d(c.ref_len) && r.size() < c.ref_len)) {
      c.ref_len = r.size();
    }
  }
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCounts cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const Words& r : references) {
      for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    }
    for (const auto& [g, k] : cand) {
      c.total[n - 1] += k;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) c.matched[n - 1] += std::min(k, it->second);
    }
  }
  return c;
}

namespace {

Real brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<Real>(ref_len) / static_cast<Real>(cand_len));
}

Vec cumulative_bleu(const std::vector<std::size_t>& matched, const std::vector<std::size_t>& total,
                    std::size_t cand_len, std::size_t ref_len, bool smooth) {
  const std::size_t max_n = matched.size();
  Vec out(max_n, 0.0);
  if (cand_len == 0) return out;
  const Real bp = brevity_penalty(cand_len, ref_len);
  Real log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < max_n; ++n) {
    Real p;
    if (matched[n] == 0) {
      // No unigram overlap is a true zero even when smoothing.
      if (!smooth || n == 0) {
        zero = true;
        p = 0.0;
      } else {
        p = kBleuEpsilon / static_cast<Real>(std::max<std::size_t>(total[n], 1));
      }
    } else {
      p = static_cast<Real>(matched[n]) / static_cast<Real>(total[n]);
    }
    if (!zero) log_sum += std::log(p);
    out[n] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<Real>(n + 1));
  }
  return out;
}

}  // namespace

Vec bleu(const Words& candidate, const std::vector<Words>& references, std::size_t max_n) {
  const BleuCounts c = bleu_counts(candidate, references, max_n);
  return cumulative_bleu(c.matched, c.total, c.cand_len, c.ref_len, true);
}

Vec corpus_bleu(const std::vector<Words>& candidates,
                const std::vector<std::vector<Words>>& references, std::size_t max_n) {
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("corpus_bleu: candidate and reference counts differ");
  }
  if (candidates.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  std::vector<std::size_t> matched(max_n, 0), total(max_n, 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const BleuCounts c = bleu_counts(candidates[i], references[i], max_n);
    for (std::size_t n = 0; n < max_n; ++n) {
      matched[n] += c.matched[n];
      total[n] += c.total[n];
    }
    cand_len += c.cand_len;
    ref_len += c.ref_len;
  }
  return cumulative_bleu(matched, total, cand_len, ref_len, false);
}

namespace {

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Real rouge_l(const Words& candidate, const std::vector<Words>& references) {
  require_references(references);
  Real best = 0.0;
  for (const Words& r : references) {
    const std::size_t lcs = lcs_length(candidate, r);
    if (lcs == 0) continue;
    const Real p = static_cast<Real>(lcs) / static_cast<Real>(candidate.size());
    const Real rec = static_cast<Real>(lcs) / static_cast<Real>(r.size());
    const Real b2 = kRougeBeta * kRougeBeta;
    best = std::max(best, (1.0 + b2) * p * rec / (rec + b2 * p));
  }
  return best;
}

std::size_t CorpusStats::document_frequency(const Words& ngram) const {
  if (ngram.empty() || ngram.size() > kMaxNgram) return 0;
  const auto& table = df[ngram.size() - 1];
  const auto it = table.find(join(ngram, 0, ngram.size()));
  return it == table.end() ? 0 : it->second;
}

CorpusStats build_corpus_stats(const std::vector<std::vector<Words>>& reference_sets) {
  CorpusStats stats;
  stats.n_images = reference_sets.size();
  for (const auto& refs : reference_sets) {
    for (std::size_t n = 1; n <= kMaxNgram; ++n) {
      std::unordered_set<std::string> seen;
      for (const Words& r : refs) {
        for (const auto& entry : ngrams(r, n)) seen.insert(entry.first);
      }
      for (const std::string& g : seen) ++stats.df[n - 1][g];
    }
  }
  return stats;
}

namespace {

struct TfIdf {
  std::array<std::map<std::string, Real>, kMaxNgram> vec;
  std::array<Real, kMaxNgram> norm{};
  std::size_t length = 0;
};

TfIdf tfidf(const Words& w, const CorpusStats& stats) {
  TfIdf out;
  out.length = w.size();
  const Real log_n = std::log(static_cast<Real>(stats.n_images));
  for (std::size_t n = 1; n <= kMaxNgram; ++n) {
    const auto& table = stats.df[n - 1];
    Real sq = 0.0;
    for (const auto& [g, tf] : ngrams(w, n)) {
      const auto it = table.find(g);
      const Real df = it == table.end() ? 0.0 : static_cast<Real>(it->second);
      const Real x = static_cast<Real>(tf) * (log_n - std::log(std::max(1.0, df)));
      out.vec[n - 1][g] = x;
      sq += x * x;
    }
    out.norm[n - 1] = std::sqrt(sq);
  }
  return out;
}

Real similarity(const TfIdf& hyp, const TfIdf& ref, std::size_t n, CiderVariant variant) {
  Real val = 0.0;
  for (const auto& [g, h] : hyp.vec[n]) {
    const auto it = ref.vec[n].find(g);
    if (it == ref.vec[n].end()) continue;
    const Real r = it->second;
    val += (variant == CiderVariant::kD ? std::min(h, r) : h) * r;
  }
  if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
  if (variant == CiderVariant::kD) {
    const Real delta = static_cast<Real>(hyp.length) - static_cast<Real>(ref.length);
    val *= std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  }
  return val;
}

}  // namespace

Real cider(const Words& candidate, const std::vector<Words>& references, const CorpusStats& stats,
           CiderVariant variant) {
  if (stats.n_images == 0) throw std::invalid_argument("cider: empty corpus stats");
  require_references(references);
  const TfIdf hyp = tfidf(candidate, stats);
  Real total = 0.0;
  for (const Words& r : references) {
    const TfIdf ref = tfidf(r, stats);
    Real score = 0.0;
    for (std::size_t n = 0; n < kMaxNgram; ++n) score += similarity(hyp, ref, n, variant);
    total += score / static_cast<Real>(kMaxNgram);
  }
  return 10.0 * total / static_cast<Real>(references.size());
}

MetricReport evaluate(const std::vector<Words>& candidates,
                      const std::vector<std::vector<Words>>& references) {
  if (candidates.empty()) throw std::invalid_argument("evaluate: empty corpus");
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("evaluate: candidate and reference counts differ");
  }
  MetricReport report;
  report.n_images = candidates.size();
  const Vec b = corpus_bleu(candidates, references, kMaxNgram);
  report.bleu1 = b[0];
  report.bleu2 = b[1];
  report.bleu3 = b[2];
  report.bleu4 = b[3];
  const CorpusStats stats = build_corpus_stats(references);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    report.rouge_l += rouge_l(candidates[i], references[i]);
    report.cider_d += cider_d(candidates[i], references[i], stats);
  }
  report.rouge_l /= static_cast<Real>(candidates.size());
  report.cider_d /= static_cast<Real>(candidates.size());
  return report;
}

}  // namespace scenecap
