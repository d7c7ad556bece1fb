#include <cmath>

#include <gtest/gtest.h>

#include "arfuse/exchange.hpp"
#include "arfuse/sweep.hpp"
#include "arfuse/synth.hpp"

using namespace arfuse;

TEST(SplitMix64, ReferenceSequence) {
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
  SplitMix64 u(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    ASSERT_LT(u.below(7), 7u);
    const auto b = u.between(3, 5);
    ASSERT_TRUE(b >= 3 && b <= 5);
  }
}

TEST(Generate, DeterministicPerSeed) {
  SynthSpec spec;
  spec.seed = 17;
  const auto a = generate(spec);
  const auto b = generate(spec);
  EXPECT_EQ(a.q.values(), b.q.values());
  EXPECT_EQ(a.q2.values(), b.q2.values());
  EXPECT_EQ(a.labels.labels, b.labels.labels);
  spec.seed = 18;
  EXPECT_NE(generate(spec).q.values(), a.q.values());
}

TEST(Generate, RowsAreValidAndPartitionRecomputes) {
  SynthSpec spec;
  spec.n_samples = 300;
  spec.vocab_size = 12;
  const auto inst = generate(spec);
  EXPECT_NO_THROW(inst.q.validate());
  EXPECT_NO_THROW(inst.q2.validate());
  EXPECT_EQ(inst.ground_truth_partition, partition(inst.q, inst.q2, inst.labels));
}

TEST(Generate, LabelsFollowZipfHead) {
  SynthSpec spec;
  spec.n_samples = 5000;
  spec.vocab_size = 10;
  spec.zipf_exponent = 1.0;
  const auto inst = generate(spec);
  std::vector<double> freq(10, 0.0);
  for (auto l : inst.labels.labels) freq[l] += 1.0 / 5000;
  double h = 0.0;
  for (int c = 1; c <= 10; ++c) h += 1.0 / c;
  for (int c = 0; c < 10; ++c) EXPECT_NEAR(freq[c], 1.0 / ((c + 1) * h), 0.02);
}

TEST(Generate, ExchangeableModelsBalanceCorrectionsAndHarms) {
  double t = 0, f = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.sm_head_bias = 1.0;
    spec.lm_head_penalty = 0.0;
    spec.sm_skill_ratio = 1.0;
    const auto inst = generate(spec);
    t += static_cast<double>(inst.ground_truth_partition.t_set.size());
    f += static_cast<double>(inst.ground_truth_partition.f_set.size());
  }
  EXPECT_GT(t + f, 0.0);
  EXPECT_LE(std::abs(t - f), 3.0 * std::sqrt(t + f));
}

TEST(Generate, HeadBiasMakesSecondaryPredictTopClassMoreOften) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.sm_head_bias = 10.0;
    const auto inst = generate(spec);
    const auto h = frequent_classes(inst.labels, spec.vocab_size, 1).front();
    std::size_t n = 0, m = 0;
    for (std::size_t s = 0; s < spec.n_samples; ++s) {
      n += argmax(inst.q.row(s)) == h;
      m += argmax(inst.q2.row(s)) == h;
    }
    wins += m > n;
  }
  EXPECT_GE(wins, 95);
}

TEST(Generate, RejectsInvalidSpecs) {
  SynthSpec s;
  s.vocab_size = 1;
  EXPECT_THROW(generate(s), ArgumentError);
  s = {};
  s.sm_head_bias = 0.5;
  EXPECT_THROW(generate(s), ArgumentError);
  s = {};
  s.lm_tail_skill = 1.5;
  EXPECT_THROW(generate(s), ArgumentError);
  s = {};
  s.n_samples = 0;
  EXPECT_THROW(generate(s), ArgumentError);
}

TEST(OracleSweep, TrivialCases) {
  const auto inst = generate(SynthSpec{});
  EXPECT_EQ(oracle_sweep(inst, {1.0}).front(), *accuracy(inst.q, inst.labels).correct);
  SynthInstance same = inst;
  same.q2 = same.q;
  const auto flat = oracle_sweep(same, WeightGrid::standard().weights());
  for (auto c : flat) EXPECT_EQ(c, flat.front());
}

namespace {
SynthInstance single(std::vector<float> q, std::vector<float> q2, std::uint32_t label) {
  SynthInstance inst;
  const std::size_t v = q.size();
  inst.q = DistributionMatrix(1, v, DistributionKind::probabilities, std::move(q));
  inst.q2 = DistributionMatrix(1, v, DistributionKind::probabilities, std::move(q2));
  inst.labels = LabelVector{{label}};
  return inst;
}
}  // namespace

TEST(OracleExchange, NoSecondaryPreferenceMeansNoFlip) {
  const auto inst = single({0.5f, 0.3f, 0.2f}, {0.6f, 0.1f, 0.3f}, 1);
  EXPECT_TRUE(oracle_exchange(inst, 0).empty());
}

TEST(OracleExchange, ThreeClassExampleFlipsAtSixTenths) {
  const auto inst = single({0.5f, 0.3f, 0.2f}, {0.2f, 0.5f, 0.3f}, 1);
  const auto flips = oracle_exchange(inst, 0);
  ASSERT_EQ(flips.size(), 1u);
  EXPECT_EQ(flips[0].to_class, 1u);
  EXPECT_NEAR(flips[0].w_hi, 0.6, kScanStep);
  EXPECT_NEAR(flips[0].w_lo, kScanStep, 1e-12);
}

TEST(OracleExchange, ContainsAnalyticWindow) {
  const auto inst = construct_theorem_instance(TheoremKind::max_improvement);
  const auto rep = exchange_report(inst.q, inst.q2, inst.labels);
  ASSERT_TRUE(rep.window);
  for (std::size_t r : rep.sets.r_set) {
    const auto flips = oracle_exchange(inst, r);
    ASSERT_FALSE(flips.empty());
    const auto& f = flips.front();
    EXPECT_EQ(f.to_class, inst.labels[r]);
    EXPECT_GE(f.w_hi + kScanStep, rep.window->w_hi());
    EXPECT_LE(f.w_lo, rep.window->w_lo());
  }
}

class TheoremInstances : public ::testing::TestWithParam<TheoremKind> {};

TEST_P(TheoremInstances, SmallValidAndConsistent) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = construct_theorem_instance(GetParam(), seed);
    EXPECT_LE(inst.labels.n_samples(), 100u);
    EXPECT_LE(inst.q.vocab_size(), 10u);
    EXPECT_NO_THROW(inst.q.validate());
    EXPECT_NO_THROW(inst.q2.validate());
    EXPECT_EQ(inst.ground_truth_partition, partition(inst.q, inst.q2, inst.labels));
    const auto again = construct_theorem_instance(GetParam(), seed);
    EXPECT_EQ(again.q.values(), inst.q.values());
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, TheoremInstances,
                         ::testing::Values(TheoremKind::mainstay, TheoremKind::improvement,
                                           TheoremKind::max_improvement, TheoremKind::weight_variation,
                                           TheoremKind::variant_a32, TheoremKind::multi_model,
                                           TheoremKind::no_exchange),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(TheoremInstances, MaxImprovementExpectation) {
  const auto inst = construct_theorem_instance(TheoremKind::max_improvement);
  EXPECT_EQ(inst.labels.n_samples(), 100u);
  EXPECT_EQ(inst.expected.r_size, 7u);
  EXPECT_EQ(*inst.expected.best_delta_acc, 0.07);
  const auto counts = oracle_sweep(inst, WeightGrid::linear(0.01, 0.999, 0.001).weights());
  EXPECT_EQ(*std::max_element(counts.begin(), counts.end()) - counts.back(), 7u);
}

TEST(TheoremInstances, MainstayCounts) {
  const auto inst = construct_theorem_instance(TheoremKind::mainstay);
  const auto rep = mainstay_report(inst.q, inst.q2, inst.labels, 0);
  EXPECT_EQ(rep.n, 10u);
  EXPECT_EQ(rep.m, 20u);
  EXPECT_DOUBLE_EQ(rep.precision_primary, 0.8);
  EXPECT_DOUBLE_EQ(rep.precision_secondary, 0.5);
}

TEST(TheoremKindNames, RoundTrip) {
  for (auto k : {TheoremKind::mainstay, TheoremKind::variant_a32, TheoremKind::no_exchange})
    EXPECT_EQ(parse_theorem_kind(to_string(k)), k);
  EXPECT_STREQ(to_string(TheoremKind::variant_a32), "variant_A32");
  EXPECT_THROW(parse_theorem_kind("lemma"), ArgumentError);
}
