#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "arfuse/fusion.hpp"
#include "arfuse/sim_matrix.hpp"
#include "test_util.hpp"

using namespace arfuse;

TEST(Softmax, SymmetricInputsAreUniform) {
  const auto p = softmax(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], 0.5);
  for (double c : {-50.0, 0.0, 3.25, 100.0}) {
    for (double v : softmax(std::vector<double>{c, c, c, c})) EXPECT_EQ(v, 0.25);
  }
}

TEST(Softmax, MatchesHighPrecisionValues) {
  // e^x / (e + e^2 + e^3) evaluated to 30 digits.
  const auto p = softmax(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_NEAR(p[0], 0.0900305731703804579980221014845, 1e-15);
  EXPECT_NEAR(p[1], 0.244728471054797652472959618341, 1e-15);
  EXPECT_NEAR(p[2], 0.665240955774821889529018280175, 1e-15);
}

TEST(Softmax, ShiftInvariantAndStableForLargeLogits) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> x(9);
    for (float& v : x) v = static_cast<float>(u(rng));
    std::vector<float> shifted = x;
    for (float& v : shifted) v += 1.0f;
    const auto a = softmax(x), b = softmax(shifted);
    double sum = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      EXPECT_GE(a[c], 0.0);
      EXPECT_NEAR(a[c], b[c], 1e-5);
      sum += a[c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{0.0, NAN}), DataError);
  EXPECT_THROW(softmax(std::vector<double>{INFINITY, 0.0}), DataError);
  EXPECT_THROW(softmax(std::vector<double>{}), ShapeError);
}

TEST(FusionWeight, RatioAndTau) {
  EXPECT_TRUE(std::isinf(FusionWeight(1.0).beta()));
  EXPECT_EQ(FusionWeight(1.0).tau(), 0.0);
  EXPECT_EQ(FusionWeight(0.5).beta(), 1.0);
  EXPECT_EQ(FusionWeight(0.75).beta(), 3.0);
  EXPECT_DOUBLE_EQ(FusionWeight::from_beta(3.0).w(), 0.75);
  EXPECT_EQ(FusionWeight::from_beta(INFINITY).w(), 1.0);
  EXPECT_THROW(FusionWeight(0.0), ArgumentError);
  EXPECT_THROW(FusionWeight(1.0001), ArgumentError);
  EXPECT_THROW(FusionWeight(NAN), ArgumentError);
  EXPECT_THROW(FusionWeight::from_beta(0.0), ArgumentError);
}

TEST(FusePair, IdentityAtPrimaryWeightOne) {
  const std::vector<double> p1{0.1, 0.2, 0.7}, p2{0.5, 0.25, 0.25};
  EXPECT_EQ(fuse_pair(p1, p2, FusionWeight(1.0)), p1);
}

TEST(FusePair, HandArithmetic) {
  const auto f = fuse_pair(std::vector<double>{0.6, 0.4}, std::vector<double>{0.2, 0.8}, FusionWeight(0.5));
  EXPECT_DOUBLE_EQ(f[0], 0.4);
  EXPECT_DOUBLE_EQ(f[1], 0.6);
}

TEST(FusePair, LengthMismatchIsShapeError) {
  EXPECT_THROW(fuse_pair(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}, FusionWeight(0.5)), ShapeError);
}

TEST(FusePair, ArgmaxMatchesDirectRecomputation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uw(0.01, 1.0);
  const auto p1 = arfuse::testing::random_probabilities(rng, 300, 12);
  const auto p2 = arfuse::testing::random_probabilities(rng, 300, 12);
  for (std::size_t s = 0; s < 300; ++s) {
    const double w = uw(rng);
    const auto f = fuse_pair(p1.row(s), p2.row(s), FusionWeight(w));
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t c = 0; c < 12; ++c) {
      const double v = w * p1.at(s, c) + (1.0 - w) * p2.at(s, c);
      if (v > best_v) best_v = v, best = c;
    }
    EXPECT_EQ(argmax(f), best);
    double sum = 0.0;
    for (double v : f) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(FusePair, DerivativeInWeightIsDifference) {
  std::mt19937_64 rng(3);
  const auto p1 = arfuse::testing::random_probabilities(rng, 20, 6);
  const auto p2 = arfuse::testing::random_probabilities(rng, 20, 6);
  constexpr double h = 1e-6;
  for (std::size_t s = 0; s < 20; ++s) {
    for (double w : {0.2, 0.5, 0.9}) {
      const auto lo = fuse_pair(p1.row(s), p2.row(s), FusionWeight(w - h));
      const auto hi = fuse_pair(p1.row(s), p2.row(s), FusionWeight(w + h));
      for (std::size_t c = 0; c < 6; ++c)
        EXPECT_NEAR((hi[c] - lo[c]) / (2 * h), static_cast<double>(p1.at(s, c)) - p2.at(s, c), 1e-6);
    }
  }
}

TEST(FusePair, MatrixWeightOneKeepsPrimaryArgmax) {
  std::mt19937_64 rng(4);
  const auto q = arfuse::testing::random_logits(rng, 100, 9);
  const auto q2 = arfuse::testing::random_logits(rng, 100, 9);
  const auto f = fuse_pair(q, q2, FusionWeight(1.0));
  for (std::size_t s = 0; s < 100; ++s) EXPECT_EQ(argmax(f.row(s)), argmax(q.row(s)));
  EXPECT_NO_THROW(f.validate());
}

TEST(GeometricWeights, ThreeModelsRatioTwo) {
  const GeometricWeights g(3, 2.0);
  EXPECT_NEAR(g[0], 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(g[1], 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(g[2], 4.0 / 7.0, 1e-15);
}

TEST(GeometricWeights, SumAndRatioAcrossRange) {
  for (std::size_t m = 2; m <= 8; ++m) {
    for (double r : {0.1, 0.25, 0.5, 0.9, 0.999999, 1.0, 1.000001, 1.5, 2.0, 3.0, 5.0, 10.0}) {
      const GeometricWeights g(m, r);
      double sum = 0.0;
      for (std::size_t h = 0; h < m; ++h) {
        EXPECT_GT(g[h], 0.0);
        sum += g[h];
        if (h + 1 < m) EXPECT_NEAR(g[h + 1] / g[h], r, 1e-9 * r);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12) << "m=" << m << " r=" << r;
    }
  }
  EXPECT_EQ(GeometricWeights(4, 1.0)[2], 0.25);
}

TEST(GeometricWeights, InvalidArguments) {
  EXPECT_THROW(GeometricWeights(1, 2.0), ArgumentError);
  EXPECT_THROW(GeometricWeights(9, 2.0), ArgumentError);
  EXPECT_THROW(GeometricWeights(3, 0.0), ArgumentError);
  EXPECT_THROW(GeometricWeights(3, -1.0), ArgumentError);
  EXPECT_THROW(GeometricWeights(3, INFINITY), ArgumentError);
}

TEST(FuseMulti, TwoModelsReproducePairFusion) {
  std::mt19937_64 rng(5);
  const auto a = arfuse::testing::random_probabilities(rng, 50, 7);
  const auto b = arfuse::testing::random_probabilities(rng, 50, 7);
  for (double beta : {0.5, 1.0, 3.0, 19.0}) {
    const GeometricWeights g(2, beta);
    const FusionWeight w(beta / (1.0 + beta));
    for (std::size_t s = 0; s < 50; ++s) {
      const std::vector<std::span<const float>> rows{b.row(s), a.row(s)};
      const auto multi = fuse_multi(std::span<const std::span<const float>>(rows), g);
      const auto pair = fuse_pair(a.row(s), b.row(s), w);
      for (std::size_t c = 0; c < 7; ++c) EXPECT_NEAR(multi[c], pair[c], 1e-12);
    }
  }
}

TEST(FuseMulti, IdenticalRowsAreFixedPoint) {
  std::mt19937_64 rng(6);
  const auto a = arfuse::testing::random_probabilities(rng, 10, 5);
  const GeometricWeights g(4, 1.7);
  for (std::size_t s = 0; s < 10; ++s) {
    const std::vector<std::span<const float>> rows(4, a.row(s));
    const auto f = fuse_multi(std::span<const std::span<const float>>(rows), g);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(f[c], a.at(s, c), 1e-7);
  }
}

TEST(FuseMulti, CountAndShapeChecks) {
  const std::vector<DistributionMatrix> two(2, DistributionMatrix(1, 2, DistributionKind::logits));
  EXPECT_THROW(fuse_multi(two, GeometricWeights(3, 2.0)), ShapeError);
  std::vector<DistributionMatrix> mixed{DistributionMatrix(1, 2, DistributionKind::logits),
                                        DistributionMatrix(1, 3, DistributionKind::logits)};
  EXPECT_THROW(fuse_multi(mixed, GeometricWeights(2, 2.0)), ShapeError);
}

TEST(FuseSimilarity, HandArithmetic) {
  const auto f = fuse_similarity(std::vector<double>{0.7, 0.3}, std::vector<double>{1.0, 0.5}, {1.0});
  EXPECT_NEAR(f[0], 0.823529411764705882, 1e-15);
  EXPECT_NEAR(f[1], 0.176470588235294118, 1e-15);
}

TEST(FuseSimilarity, PowerZeroAndUniformSimilarityAreIdentity) {
  const std::vector<double> p{0.5, 0.25, 0.125, 0.125};
  EXPECT_EQ(fuse_similarity(p, std::vector<double>{0.0, 0.2, 1.0, 0.6}, {0.0}), p);
  const auto u = fuse_similarity(p, std::vector<double>{0.6, 0.6, 0.6, 0.6}, {2.5});
  for (std::size_t c = 0; c < p.size(); ++c) EXPECT_NEAR(u[c], p[c], 1e-15);
}

TEST(FuseSimilarity, InvariantToScalingSimilarity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const auto p = arfuse::testing::random_probabilities(rng, 30, 10);
  for (std::size_t s = 0; s < 30; ++s) {
    std::vector<double> sim(10), scaled(10);
    for (std::size_t c = 0; c < 10; ++c) {
      sim[c] = u(rng);
      scaled[c] = sim[c] * 0.4;
    }
    for (double power : {0.5, 1.0, 3.0}) {
      const auto a = fuse_similarity(p.row(s), std::span<const double>(sim), {power});
      const auto b = fuse_similarity(p.row(s), std::span<const double>(scaled), {power});
      double sum = 0.0;
      for (std::size_t c = 0; c < 10; ++c) {
        EXPECT_NEAR(a[c], b[c], 1e-12);
        sum += a[c];
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(FuseSimilarity, Errors) {
  EXPECT_THROW(fuse_similarity(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}, {1.0}), DegenerateError);
  EXPECT_THROW(fuse_similarity(std::vector<double>{0.5, 0.5}, std::vector<double>{1.5, 1.0}, {1.0}), DataError);
  EXPECT_THROW(fuse_similarity(std::vector<double>{0.5, 0.5}, std::vector<double>{-0.1, 1.0}, {1.0}), DataError);
  EXPECT_THROW(fuse_similarity(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0}, {1.0}), ShapeError);
  EXPECT_THROW(fuse_similarity(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 1.0}, {-1.0}), ArgumentError);
  EXPECT_THROW(fuse_similarity(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 1.0}, {NAN}), ArgumentError);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{0.3, 0.3, 0.4, 0.4}), 2u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{1.0}), 0u);
}
