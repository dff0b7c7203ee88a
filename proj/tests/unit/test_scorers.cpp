#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kdrank/autodiff/gradcheck.hpp"
#include "kdrank/autodiff/ops.hpp"
#include "kdrank/error.hpp"
#include "kdrank/scorers/kernels.hpp"
#include "kdrank/scorers/passage_cache.hpp"
#include "kdrank/scorers/scorer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace kdrank {
namespace {

using test::random_sequence;
using test::tiny_config;

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols) { return normal_tensor({rows, cols}, 1.0, rng); }

TEST(Kernels, DefaultsAreIncreasingWithExactMatchKernel) {
  const KernelConfig k = KernelConfig::defaults();
  ASSERT_EQ(k.count(), 11u);
  EXPECT_EQ(k.centers.back(), 1.0);
  EXPECT_EQ(k.centers.front(), -0.9);
  EXPECT_EQ(k.sigma, 0.1);
  for (std::size_t i = 1; i < k.count(); ++i) EXPECT_LT(k.centers[i - 1], k.centers[i]);
  KernelConfig bad = k;
  std::swap(bad.centers[0], bad.centers[1]);
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = k;
  bad.sigma = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Kernels, ActivationAtExactMatch) {
  Tape t(Tape::Mode::kInference);
  KernelConfig k;
  k.centers = {0.9};
  k.sigma = 0.1;
  const Tensor act = kernel_activations(t.constant(Tensor::matrix({{1.0}})), k).value();
  EXPECT_NEAR(act[0], std::exp(-0.5), 1e-12);
  EXPECT_NEAR(act[0], 0.606531, 1e-6);
}

TEST(Kernels, PoolingMatchesNaiveLoopsBitwise) {
  Rng rng(11);
  const KernelConfig k = KernelConfig::defaults();
  for (int c = 0; c < 50; ++c) {
    const std::size_t m = 1 + rng() % 12, n = 1 + rng() % 12, d = 1 + rng() % 16;
    const Tensor q = random_matrix(rng, m, d);
    const Tensor p = random_matrix(rng, n, d);
    Tape t(Tape::Mode::kInference);
    const Tensor pooled = kernel_pooling(t.constant(q), t.constant(p), k).value();
    const std::vector<double> ref = test::oracle::kernel_pooling(q, p, k.centers, k.sigma);
    ASSERT_EQ(pooled.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(pooled[i], ref[i]) << "case " << c << " kernel " << i;
  }
}

TEST(Colbert, MaxSimMatchesNaiveLoopsBitwise) {
  Rng rng(12);
  for (int c = 0; c < 50; ++c) {
    const std::size_t m = 1 + rng() % 12, n = 1 + rng() % 12, d = 1 + rng() % 16;
    const Tensor q = random_matrix(rng, m, d);
    const Tensor p = random_matrix(rng, n, d);
    Tape t(Tape::Mode::kInference);
    EXPECT_EQ(colbert_maxsim(t.constant(q), t.constant(p)).value().item(), test::oracle::colbert_maxsim(q, p))
        << "case " << c;
  }
}

TEST(Scorers, KindNamesRoundTrip) {
  for (ScorerKind k : kAllScorerKinds) EXPECT_EQ(parse_scorer_kind(to_string(k)), k);
  EXPECT_EQ(parse_scorer_kind("ColBERT"), ScorerKind::kColbert);
  EXPECT_THROW(parse_scorer_kind("bm25"), ConfigError);
}

TEST(Scorers, CatIsNotCacheable) {
  const auto cat = make_scorer(tiny_config(ScorerKind::kCat));
  EXPECT_FALSE(cat->cacheable());
  Rng rng(1);
  const TokenSequence p = random_sequence(rng, 3, 6, 30);
  EXPECT_THROW(cat->precompute(p, 0), Error);
}

TEST(Scorers, ScoresAreFiniteScalars) {
  Rng rng(2);
  for (ScorerKind kind : kAllScorerKinds) {
    const auto s = make_scorer(tiny_config(kind));
    Tape t(Tape::Mode::kInference);
    const Var v = s->score(t, random_sequence(rng, 1, 4, 30), random_sequence(rng, 2, 9, 30));
    EXPECT_TRUE(v.shape().empty()) << to_string(kind);
    EXPECT_TRUE(std::isfinite(v.value().item()));
  }
}

TEST(Scorers, CachedScoresEqualFreshScoresBitwise) {
  Rng rng(3);
  for (ScorerKind kind : {ScorerKind::kDot, ScorerKind::kColbert, ScorerKind::kPrett, ScorerKind::kTk}) {
    const auto s = make_scorer(tiny_config(kind, 5));
    for (int i = 0; i < 25; ++i) {
      const TokenSequence q = random_sequence(rng, 1, 5, 30);
      const TokenSequence p = random_sequence(rng, 1, 12, 30);
      const PassageCacheEntry entry = s->precompute(p, i);
      Tape fresh(Tape::Mode::kInference), cached(Tape::Mode::kInference);
      EXPECT_EQ(s->score(fresh, q, p).value().item(), s->score_cached(cached, q, entry).value().item())
          << to_string(kind) << " pair " << i;
    }
  }
}

TEST(Scorers, PrettCacheIsSoundForEverySplit) {
  Rng rng(4);
  for (std::size_t split = 1; split < 4; ++split) {
    ScorerConfig c = tiny_config(ScorerKind::kPrett, 6);
    c.encoder.num_layers = 4;
    c.prett_split = split;
    const auto s = make_scorer(c);
    for (int i = 0; i < 10; ++i) {
      const TokenSequence q = random_sequence(rng, 1, 5, 30);
      const TokenSequence p = random_sequence(rng, 1, 10, 30);
      Tape fresh(Tape::Mode::kInference), cached(Tape::Mode::kInference);
      EXPECT_EQ(s->score(fresh, q, p).value().item(), s->score_cached(cached, q, s->precompute(p, 0)).value().item())
          << "split " << split;
    }
  }
  ScorerConfig bad = tiny_config(ScorerKind::kPrett);
  bad.prett_split = 2;
  EXPECT_THROW(make_scorer(bad), ConfigError);
}

TEST(Scorers, CacheRowsFollowStorageClass) {
  Rng rng(5);
  const TokenSequence p = random_sequence(rng, 7, 7, 30);
  EXPECT_EQ(make_scorer(tiny_config(ScorerKind::kDot))->precompute(p, 0).representation.rows(), 1u);
  for (ScorerKind kind : {ScorerKind::kColbert, ScorerKind::kPrett, ScorerKind::kTk}) {
    EXPECT_EQ(make_scorer(tiny_config(kind))->precompute(p, 0).representation.rows(), 7u) << to_string(kind);
  }
}

TEST(Scorers, TrailingPaddingDoesNotChangeScores) {
  Rng rng(6);
  const TokenSequence q = random_sequence(rng, 3, 3, 30);
  const TokenSequence p = random_sequence(rng, 6, 6, 30);
  TokenSequence padded = p;
  padded.ids.insert(padded.ids.end(), 3, SpecialTokens::kPad);
  for (ScorerKind kind : {ScorerKind::kDot, ScorerKind::kColbert, ScorerKind::kPrett, ScorerKind::kTk}) {
    const auto s = make_scorer(tiny_config(kind));
    Tape a(Tape::Mode::kInference), b(Tape::Mode::kInference);
    EXPECT_EQ(s->score(a, q, p).value().item(), s->score(b, q, padded).value().item()) << to_string(kind);
  }
}

TEST(Scorers, TkScoreIsWeightedKernelFeatures) {
  Rng rng(7);
  const auto s = make_scorer(tiny_config(ScorerKind::kTk));
  const TokenSequence q = random_sequence(rng, 3, 3, 30);
  const TokenSequence p = random_sequence(rng, 8, 8, 30);
  Tape t(Tape::Mode::kInference);
  const Tensor qr = s->encode_query(t, q).value();
  const Tensor pr = s->encode_passage(t, p).value();
  const auto& kc = s->config().kernels;
  const std::vector<double> features = test::oracle::kernel_pooling(qr, pr, kc.centers, kc.sigma);
  const Tensor& w = s->parameters()[s->parameters().index_of("tk.kernel_weights")].value;
  double expected = 0.0;
  for (std::size_t k = 0; k < features.size(); ++k) expected += features[k] * w[k];
  EXPECT_EQ(s->score(t, q, p).value().item(), expected);
}

TEST(Scorers, DotInteractionRejectsMismatchedVectors) {
  const auto s = make_scorer(tiny_config(ScorerKind::kDot));
  Tape t(Tape::Mode::kInference);
  EXPECT_THROW(s->interact(t, t.constant(Tensor(Shape{1, 6})), t.constant(Tensor(Shape{1, 5}))), ShapeError);
}

TEST(Scorers, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(8);
  for (ScorerKind kind : kAllScorerKinds) {
    const auto s = make_scorer(tiny_config(kind, 9));
    const TokenSequence q = random_sequence(rng, 2, 4, 30);
    const TokenSequence p = random_sequence(rng, 3, 8, 30);
    const ParameterFunction f = [&](Tape& t) { return s->score(t, q, p); };
    ParameterSet& params = s->parameters();
    for (std::size_t i = 0; i < params.size(); i += 3) {
      const std::size_t n = params[i].value.size();
      const std::vector<std::size_t> coords = {0, n / 2, n - 1};
      EXPECT_LT(finite_diff_check(f, params, i, coords), 1e-5) << to_string(kind) << " " << params[i].name;
    }
  }
}

TEST(PassageCache, FileRoundTripIsExact) {
  Rng rng(9);
  const auto s = make_scorer(tiny_config(ScorerKind::kColbert));
  PassageCache cache{ScorerKind::kColbert, s->representation_dim(), {}};
  for (int i = 0; i < 5; ++i) cache.entries.push_back(s->precompute(random_sequence(rng, 1, 9, 30), 100 + i));
  const auto path = test::temp_dir("cache") / "cache.bin";
  write_passage_cache(path, cache);
  const PassageCache back = read_passage_cache(path);
  EXPECT_EQ(back.kind, cache.kind);
  EXPECT_EQ(back.dim, cache.dim);
  ASSERT_EQ(back.entries.size(), cache.entries.size());
  for (std::size_t i = 0; i < cache.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].passage_id, cache.entries[i].passage_id);
    EXPECT_EQ(back.entries[i].representation, cache.entries[i].representation);
  }
  EXPECT_EQ(back.total_rows(), cache.total_rows());
}

TEST(PassageCache, ScoreAgainstCacheMatchesFreshScoring) {
  Rng rng(10);
  const auto s = make_scorer(tiny_config(ScorerKind::kTk));
  std::vector<TokenSequence> passages;
  for (int i = 0; i < 8; ++i) passages.push_back(random_sequence(rng, 2, 10, 30));
  std::vector<PassageCacheEntry> entries;
  std::vector<const TokenSequence*> ptrs;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    entries.push_back(s->precompute(passages[i], static_cast<std::int64_t>(i)));
    ptrs.push_back(&passages[i]);
  }
  const TokenSequence q = random_sequence(rng, 2, 4, 30);
  EXPECT_EQ(score_against_cache(*s, q, entries), score_fresh(*s, q, ptrs));
}

}  // namespace
}  // namespace kdrank
