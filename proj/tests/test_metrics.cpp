// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "scenecap/metrics.hpp"

using namespace scenecap;

namespace {

Words w(const std::string& s) {
  std::istringstream in(s);
  Words out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::vector<Words> refs(std::initializer_list<const char*> list) {
  std::vector<Words> out;
  for (const char* s : list) out.push_back(w(s));
  return out;
}

struct Pair {
  Words cand;
  std::vector<Words> refs;
};

std::vector<Pair> toy_corpus() {
  return {{w("a dog runs on grass"), refs({"a dog runs on the grass", "the dog is running"})},
          {w("a cat is on the bed"), refs({"a cat sleeps on the bed", "a cat is sleeping"})},
          {w("two men play a game"), refs({"two men play football", "men playing a game on the grass"})}};
}

CorpusStats stats_of(const std::vector<Pair>& corpus) {
  std::vector<std::vector<Words>> all;
  for (const Pair& p : corpus) all.push_back(p.refs);
  return build_corpus_stats(all);
}

}  // namespace

TEST_CASE("bleu: golden cases") {
  CHECK(bleu(w("a b c"), refs({"a b c d"}), 1)[0] == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
  CHECK(bleu(w("a b c"), refs({"a b c d"}), 1)[0] == doctest::Approx(0.7165313105737893).epsilon(1e-12));

  const Vec same = bleu(w("the cat sat on the mat"), refs({"the cat sat on the mat"}));
  for (Real x : same) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bleu(w("x y z"), refs({"a b c"}))[0] == 0.0);

  // p1 = 1, p2 = 3/4, closest reference length 6 against 5.
  const Vec b = bleu(w("the cat sat on mat"), refs({"the cat sat on the mat"}), 2);
  const Real bp = std::exp(1.0 - 6.0 / 5.0);
  CHECK(b[0] == doctest::Approx(bp).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(bp * std::sqrt(0.75)).epsilon(1e-12));

  // Clipping: three "the" against one.
  CHECK(bleu(w("the the the"), refs({"the cat"}), 1)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Zero bigram matches are smoothed to 1e-9 / t_2.
  const Vec s = bleu(w("b a"), refs({"a b"}), 2);
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(std::sqrt(1e-9)).epsilon(1e-9));
  CHECK(bleu(Words{}, refs({"a b"}))[0] == 0.0);
  CHECK_THROWS_AS(bleu(w("a"), {}), std::invalid_argument);
}

TEST_CASE("bleu: counts take the closest reference length and clip per reference") {
  const BleuCounts c = bleu_counts(w("a a b"), refs({"a b b b b", "a a"}), 2);
  CHECK(c.matched[0] == 3);
  CHECK(c.total[0] == 3);
  CHECK(c.matched[1] == 2);  // "a a" from one reference, "a b" from the other
  CHECK(c.total[1] == 2);
  CHECK(c.cand_len == 3);
  CHECK(c.ref_len == 2);  // |3-2| = 1 beats |3-5| = 2
}

TEST_CASE("bleu: a new reference n-gram absent from the candidate never raises the numerator") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e"};
  auto draw = [&](std::size_t n) {
    Words out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(alphabet[rng() % alphabet.size()]);
    return out;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const Words cand = draw(6);
    std::vector<Words> rs{draw(5)};
    const BleuCounts before = bleu_counts(cand, rs, 2);
    rs[0].push_back("zz");  // cannot match anything in the candidate
    const BleuCounts after = bleu_counts(cand, rs, 2);
    CHECK(after.matched == before.matched);
  }
}

TEST_CASE("corpus bleu sums counts before the ratio") {
  const std::vector<Words> cands{w("a b"), w("c d e f")};
  const std::vector<std::vector<Words>> rs{refs({"a x"}), refs({"c d e f"})};
  const Vec b = corpus_bleu(cands, rs, 2);
  // unigrams 5/6, bigrams 3/4, lengths 6 vs 6.
  CHECK(b[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(std::sqrt(5.0 / 6.0 * 0.75)).epsilon(1e-12));
  CHECK(corpus_bleu({w("a b")}, {refs({"c d"})}, 2)[1] == 0.0);  // no smoothing
}

TEST_CASE("rouge-l") {
  const Real P = 2.0 / 3.0, R = 1.0, b2 = 1.2 * 1.2;
  CHECK(rouge_l(w("a b c"), refs({"a c"})) == doctest::Approx((1 + b2) * P * R / (R + b2 * P)).epsilon(1e-12));
  CHECK(rouge_l(w("a b c"), refs({"a c"})) == doctest::Approx(0.8299319727891156).epsilon(1e-12));
  CHECK(rouge_l(w("a b c"), refs({"a b c"})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l(w("a b c"), refs({"x y"})) == 0.0);
  CHECK(rouge_l(w("a b c"), refs({"x y", "a b c"})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l(Words{}, refs({"a"})) == 0.0);
  CHECK_THROWS_AS(rouge_l(w("a"), {}), std::invalid_argument);
}

TEST_CASE("corpus stats: per-image document frequency") {
  CorpusStats one = build_corpus_stats({refs({"a a"})});
  CHECK(one.document_frequency(w("a")) == 1);
  CHECK(one.document_frequency(w("a a")) == 1);
  CHECK(one.n_images == 1);
  const CorpusStats two = build_corpus_stats({refs({"the dog", "a dog"}), refs({"dog runs"})});
  CHECK(two.document_frequency(w("dog")) == 2);
  CHECK(two.document_frequency(w("the dog")) == 1);
  CHECK(two.document_frequency(w("cat")) == 0);
  const CorpusStats swapped = build_corpus_stats({refs({"dog runs"}), refs({"a dog", "the dog"})});
  CHECK(swapped.df == two.df);
  for (const auto& table : two.df)
    for (const auto& [gram, df] : table) CHECK(df <= two.n_images);
}

TEST_CASE("cider-d: three-image golden values from a brute-force evaluation") {
  const std::vector<Pair> corpus = toy_corpus();
  const CorpusStats stats = stats_of(corpus);
  const Real expected[] = {4.1610604053163005, 3.6547152711266477, 3.0979761717898944};
  Real mean = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Real got = cider_d(corpus[i].cand, corpus[i].refs, stats);
    CHECK(std::abs(got - expected[i]) <= 1e-9);
    mean += got / 3.0;
  }
  CHECK(std::abs(mean - 3.6379172827442807) <= 1e-9);
}

TEST_CASE("cider-d: identical captions reach the corpus maximum") {
  // One reference per image and no n-gram shared by every image.
  const std::vector<std::vector<Words>> rs{refs({"a dog runs on the grass"}), refs({"a cat sleeps on the bed"}),
                                           refs({"two men play football together"})};
  const CorpusStats stats = build_corpus_stats(rs);
  for (const auto& r : rs) CHECK(cider_d(r[0], r, stats) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(cider_d(w("zebra"), rs[0], stats) == 0.0);
  // Without 4-grams that order contributes nothing: the ceiling is 7.5.
  const std::vector<std::vector<Words>> shorts{refs({"a cat sleeps"}), refs({"two dogs run"})};
  CHECK(cider_d(w("a cat sleeps"), shorts[0], build_corpus_stats(shorts)) == doctest::Approx(7.5).epsilon(1e-12));
  // A single-image corpus has idf = 0 everywhere, so everything ties at zero.
  const CorpusStats alone = build_corpus_stats({rs[0]});
  CHECK(cider_d(rs[0][0], rs[0], alone) == 0.0);
  CHECK_THROWS_AS(cider_d(w("a"), rs[0], CorpusStats{}), std::invalid_argument);
  CHECK_THROWS_AS(cider_d(w("a"), {}, stats), std::invalid_argument);
}

TEST_CASE("cider: plain variant ignores clipping and length") {
  const std::vector<std::vector<Words>> rs{refs({"a dog runs fast"}), refs({"the cat sleeps now"})};
  const CorpusStats stats = build_corpus_stats(rs);
  // Doubling the candidate keeps the unigram vector parallel to the reference.
  const Words doubled = w("a dog runs fast a dog runs fast");
  const Real plain = cider(doubled, rs[0], stats, CiderVariant::kPlain);
  const Real d = cider(doubled, rs[0], stats, CiderVariant::kD);
  CHECK(plain > d);
  CHECK(cider(rs[0][0], rs[0], stats, CiderVariant::kPlain) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("metric properties: ranges, reference order and relabeling") {
  std::mt19937_64 rng(2);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "f"};
  auto draw = [&] {
    Words out;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) out.push_back(alphabet[rng() % alphabet.size()]);
    return out;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<Words>> corpus(4);
    for (auto& r : corpus) r = {draw(), draw(), draw()};
    const CorpusStats stats = build_corpus_stats(corpus);
    const Words cand = draw();
    const Vec b = bleu(cand, corpus[0]);
    for (Real x : b) CHECK((x >= 0.0 && x <= 1.0 + 1e-12));
    const Real r = rouge_l(cand, corpus[0]);
    CHECK((r >= 0.0 && r <= 1.0 + 1e-12));
    const Real c = cider_d(cand, corpus[0], stats);
    CHECK((c >= 0.0 && c <= 10.0 + 1e-9));

    std::vector<Words> rev(corpus[0].rbegin(), corpus[0].rend());
    CHECK(cider_d(cand, rev, stats) == doctest::Approx(c).epsilon(1e-12));
    CHECK(rouge_l(cand, rev) == r);
    std::vector<std::vector<Words>> shuffled = corpus;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(cider_d(cand, corpus[0], build_corpus_stats(shuffled)) == doctest::Approx(c).epsilon(1e-12));

    // Consistent renaming of every token.
    auto rename = [](Words ws) {
      for (auto& t : ws) t = "w_" + t;
      return ws;
    };
    std::vector<std::vector<Words>> renamed = corpus;
    for (auto& rs : renamed)
      for (auto& x : rs) x = rename(x);
    const CorpusStats rstats = build_corpus_stats(renamed);
    CHECK(cider_d(rename(cand), renamed[0], rstats) == doctest::Approx(c).epsilon(1e-12));
    CHECK(bleu(rename(cand), renamed[0]) == b);
    CHECK(rouge_l(rename(cand), renamed[0]) == r);
  }
}

TEST_CASE("evaluate: report on references scored against themselves") {
  const std::vector<Pair> corpus = toy_corpus();
  std::vector<Words> cands;
  std::vector<std::vector<Words>> rs;
  for (const Pair& p : corpus) {
    cands.push_back(p.refs[0]);
    rs.push_back({p.refs[0]});
  }
  const MetricReport m = evaluate(cands, rs);
  CHECK(m.bleu1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.bleu4 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.rouge_l == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.n_images == 3);
  CHECK(m.cider_d <= 10.0 + 1e-9);
  CHECK_THROWS_AS(evaluate({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(cands, {rs[0]}), std::invalid_argument);
}
