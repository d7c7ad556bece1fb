#pragma once

// Synthetic two-model instances with controlled relative overfitting, the
// brute-force oracles that check the analysis code, and small hand-built
// instances on which each theorem's hypotheses hold by construction.
//
// Random draws come from SplitMix64:
//     state += 0x9E3779B97F4A7C15
//     z = state
//     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//     return z ^ (z >> 31)
// and uniform reals are (z >> 11) * 2^-53.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arfuse/error.hpp"
#include "arfuse/exchange.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

 private:
  std::uint64_t state_;
};

struct SynthSpec {
  std::size_t n_samples = 200;
  std::size_t vocab_size = 20;
  double zipf_exponent = 1.1;
  double lm_tail_skill = 0.8;    ///< chance the primary ranks the label first on a tail class
  double sm_head_bias = 2.0;     ///< multiplier on the secondary's head-class mass
  std::uint64_t seed = 0;
  double lm_head_penalty = 0.05;  ///< primary skill on head classes is lm_tail_skill minus this
  double sm_skill_ratio = 0.8;    ///< secondary skill relative to the primary's tail skill

  void validate() const {
    if (vocab_size < 2) throw ArgumentError("synthetic vocabulary needs at least 2 classes");
    if (n_samples < 1) throw ArgumentError("synthetic instance needs at least 1 sample");
    if (!(zipf_exponent > 0.0)) throw ArgumentError("zipf exponent must be positive");
    if (!(lm_tail_skill >= 0.0 && lm_tail_skill <= 1.0)) throw ArgumentError("lm_tail_skill must lie in [0, 1]");
    if (!(sm_head_bias >= 1.0) || !std::isfinite(sm_head_bias)) throw ArgumentError("sm_head_bias must be >= 1");
    if (!(lm_head_penalty >= 0.0 && lm_head_penalty <= 1.0)) throw ArgumentError("lm_head_penalty must lie in [0, 1]");
    if (!(sm_skill_ratio >= 0.0 && sm_skill_ratio <= 1.0)) throw ArgumentError("sm_skill_ratio must lie in [0, 1]");
  }

  /// Head classes are the most frequent fifth of the vocabulary (at least one).
  std::size_t head_size() const { return std::max<std::size_t>(1, vocab_size / 5); }
};

enum class TheoremKind { mainstay, improvement, max_improvement, weight_variation, variant_a32, multi_model, no_exchange };

inline const char* to_string(TheoremKind k) {
  switch (k) {
    case TheoremKind::mainstay: return "mainstay";
    case TheoremKind::improvement: return "improvement";
    case TheoremKind::max_improvement: return "max_improvement";
    case TheoremKind::weight_variation: return "weight_variation";
    case TheoremKind::variant_a32: return "variant_A32";
    case TheoremKind::multi_model: return "multi_model";
    case TheoremKind::no_exchange: return "no_exchange";
  }
  return "?";
}

inline TheoremKind parse_theorem_kind(std::string_view s) {
  for (auto k : {TheoremKind::mainstay, TheoremKind::improvement, TheoremKind::max_improvement,
                 TheoremKind::weight_variation, TheoremKind::variant_a32, TheoremKind::multi_model,
                 TheoremKind::no_exchange})
    if (s == to_string(k)) return k;
  throw ArgumentError("unknown instance kind '" + std::string(s) + "'");
}

/// Conclusion values a constructed instance is built to exhibit.
struct Expectation {
  std::size_t r_size = 0;
  std::size_t risky_size = 0;   ///< |T \ A|
  std::size_t r_safe_size = 0;
  std::optional<double> best_delta_acc;  ///< against the primary model
  /// Smallest and largest correcting thresholds of R and the protection bound.
  double max_correcting = 0.0;
  double protection = kInfinity;
  // mainstay
  std::size_t h = 0, n = 0, m = 0, primary_correct = 0, secondary_correct = 0;
  // multi_model
  std::optional<double> ratio;
};

struct SynthInstance {
  DistributionMatrix q;   ///< primary model
  DistributionMatrix q2;  ///< secondary model
  LabelVector labels;
  SamplePartition ground_truth_partition;
  std::vector<DistributionMatrix> models;  ///< multi_model only, worst to best (q is the last one)
  Expectation expected;
};

namespace detail {

inline std::size_t first_max(std::span<const float> r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c)
    if (r[c] > r[best]) best = c;
  return best;
}

inline SamplePartition partition_by_count(const DistributionMatrix& q, const DistributionMatrix& q2,
                                          const LabelVector& y) {
  SamplePartition p;
  for (std::size_t s = 0; s < y.n_samples(); ++s) {
    const bool a = first_max(q.row(s)) == y[s];
    const bool b = first_max(q2.row(s)) == y[s];
    const SampleClass c = (!a && b) ? SampleClass::t : (a && !b) ? SampleClass::f : SampleClass::n;
    p.membership.push_back(c);
    (c == SampleClass::t ? p.t_set : c == SampleClass::f ? p.f_set : p.n_set).push_back(s);
  }
  return p;
}

inline void append_softmax(std::vector<float>& out, const std::vector<double>& logits) {
  for (double p : softmax(logits)) out.push_back(static_cast<float>(p));
}

/// A row dominated by `winner` and `loser` with q[winner] - q[loser] =
/// margin; every other class gets a mass in [0.001, 0.01].
inline void append_two_class_row(std::vector<float>& out, SplitMix64& rng, std::size_t vocab, std::size_t winner,
                                 std::size_t loser, double margin) {
  std::vector<double> row(vocab, 0.0);
  double rest = 1.0;
  for (std::size_t c = 0; c < vocab; ++c) {
    if (c == winner || c == loser) continue;
    row[c] = rng.uniform(0.001, 0.01);
    rest -= row[c];
  }
  row[winner] = (rest + margin) / 2.0;
  row[loser] = (rest - margin) / 2.0;
  for (double v : row) out.push_back(static_cast<float>(v));
}

inline std::size_t other_class(SplitMix64& rng, std::size_t vocab, std::size_t not_this) {
  const std::size_t c = rng.below(vocab - 1);
  return c >= not_this ? c + 1 : c;
}

inline std::size_t third_class(SplitMix64& rng, std::size_t vocab, std::size_t a, std::size_t b) {
  std::size_t c = rng.below(vocab - 2);
  const std::size_t lo = std::min(a, b), hi = std::max(a, b);
  if (c >= lo) ++c;
  if (c >= hi) ++c;
  return c;
}

/// Accumulates rows for a constructed two-model instance.
struct Builder {
  std::size_t vocab;
  SplitMix64 rng;
  std::vector<float> q, q2;
  LabelVector labels;

  Builder(std::size_t v, std::uint64_t seed) : vocab(v), rng(seed) {}

  /// Primary picks `lm` over `lm_alt` by g; secondary picks `sm` over `sm_alt` by h.
  void add(std::size_t label, std::size_t lm, std::size_t lm_alt, double g, std::size_t sm, std::size_t sm_alt, double h) {
    labels.labels.push_back(static_cast<std::uint32_t>(label));
    append_two_class_row(q, rng, vocab, lm, lm_alt, g);
    append_two_class_row(q2, rng, vocab, sm, sm_alt, h);
  }

  /// Primary wrong (i over k by g), secondary right (k over i by h). ET = g / h.
  void add_t(double g, double h) {
    const std::size_t k = rng.below(vocab);
    const std::size_t i = other_class(rng, vocab, k);
    add(k, i, k, g, k, i, h);
  }
  /// Primary right (k over j by g), secondary wrong (j over k by h). Harmful ET = g / h.
  void add_f(double g, double h) {
    const std::size_t k = rng.below(vocab);
    const std::size_t j = other_class(rng, vocab, k);
    add(k, k, j, g, j, k, h);
  }
  /// Both right, or (when vocab allows) both wrong with the label a minor class.
  void add_n(bool both_right) {
    const std::size_t k = rng.below(vocab);
    if (both_right || vocab < 3) {
      const std::size_t a = other_class(rng, vocab, k);
      const std::size_t b = other_class(rng, vocab, k);
      add(k, k, a, rng.uniform(0.05, 0.5), k, b, rng.uniform(0.05, 0.5));
      return;
    }
    const std::size_t i = other_class(rng, vocab, k);
    const std::size_t j = third_class(rng, vocab, k, i);
    add(k, i, j, rng.uniform(0.05, 0.5), j, i, rng.uniform(0.05, 0.5));
  }

  SynthInstance finish() {
    const std::size_t n = labels.n_samples();
    SynthInstance inst;
    inst.q = DistributionMatrix(n, vocab, DistributionKind::probabilities, std::move(q));
    inst.q2 = DistributionMatrix(n, vocab, DistributionKind::probabilities, std::move(q2));
    inst.labels = std::move(labels);
    inst.ground_truth_partition = partition_by_count(inst.q, inst.q2, inst.labels);
    return inst;
  }
};

/// Sample order is shuffled so that the classes are interleaved.
inline SynthInstance shuffled(SynthInstance inst, SplitMix64& rng) {
  const std::size_t n = inst.labels.n_samples(), v = inst.q.vocab_size();
  std::vector<std::size_t> order(n);
  for (std::size_t s = 0; s < n; ++s) order[s] = s;
  for (std::size_t s = n; s > 1; --s) std::swap(order[s - 1], order[rng.below(s)]);
  std::vector<float> q, q2;
  LabelVector y;
  for (std::size_t s : order) {
    q.insert(q.end(), inst.q.row(s).begin(), inst.q.row(s).end());
    q2.insert(q2.end(), inst.q2.row(s).begin(), inst.q2.row(s).end());
    y.labels.push_back(inst.labels[s]);
  }
  SynthInstance out;
  out.q = DistributionMatrix(n, v, DistributionKind::probabilities, std::move(q));
  out.q2 = DistributionMatrix(n, v, DistributionKind::probabilities, std::move(q2));
  out.labels = std::move(y);
  out.ground_truth_partition = partition_by_count(out.q, out.q2, out.labels);
  out.expected = inst.expected;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random generator

/// Labels follow Zipf(zipf_exponent) over the vocabulary (class 0 most
/// frequent). Each model aims its argmax at the label with its skill
/// probability, at a uniformly chosen other class otherwise; the row is
/// softmax(noise + boost on the aimed class). The secondary's head-class
/// entries are then multiplied by sm_head_bias and the row renormalized.
inline SynthInstance generate(const SynthSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const std::size_t vocab = spec.vocab_size;
  const std::size_t head = spec.head_size();
  constexpr double kBoost = 1.5;

  std::vector<double> cdf(vocab);
  double total = 0.0;
  for (std::size_t c = 0; c < vocab; ++c) {
    total += std::pow(static_cast<double>(c + 1), -spec.zipf_exponent);
    cdf[c] = total;
  }
  for (double& v : cdf) v /= total;

  std::vector<float> q, q2;
  LabelVector labels;
  q.reserve(spec.n_samples * vocab);
  q2.reserve(spec.n_samples * vocab);
  const auto aimed = [&](std::size_t label, double skill) {
    return rng.uniform() < skill ? label : detail::other_class(rng, vocab, label);
  };
  const auto noisy_logits = [&](std::size_t target) {
    std::vector<double> l(vocab);
    for (double& x : l) x = rng.uniform();
    l[target] += kBoost;
    return l;
  };

  for (std::size_t s = 0; s < spec.n_samples; ++s) {
    const double u = rng.uniform();
    const auto label = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin());
    labels.labels.push_back(static_cast<std::uint32_t>(label));
    const bool is_head = label < head;

    const double lm_skill = is_head ? std::max(0.0, spec.lm_tail_skill - spec.lm_head_penalty) : spec.lm_tail_skill;
    detail::append_softmax(q, noisy_logits(aimed(label, lm_skill)));

    std::vector<double> sm = softmax(noisy_logits(aimed(label, spec.lm_tail_skill * spec.sm_skill_ratio)));
    double sum = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      if (c < head) sm[c] *= spec.sm_head_bias;
      sum += sm[c];
    }
    for (double p : sm) q2.push_back(static_cast<float>(p / sum));
  }

  SynthInstance inst;
  inst.q = DistributionMatrix(spec.n_samples, vocab, DistributionKind::probabilities, std::move(q));
  inst.q2 = DistributionMatrix(spec.n_samples, vocab, DistributionKind::probabilities, std::move(q2));
  inst.labels = std::move(labels);
  inst.ground_truth_partition = detail::partition_by_count(inst.q, inst.q2, inst.labels);
  return inst;
}

// ---------------------------------------------------------------------------
// Brute-force oracles

/// Correct-prediction counts of w q + (1 - w) q2 for each w, by direct
/// recomputation of every fused row.
inline std::vector<std::size_t> oracle_sweep(const SynthInstance& inst, const std::vector<double>& grid) {
  std::vector<std::size_t> counts;
  const std::size_t vocab = inst.q.vocab_size();
  std::vector<double> fused(vocab);
  for (double w : grid) {
    const double v = 1.0 - w;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < inst.labels.n_samples(); ++s) {
      for (std::size_t c = 0; c < vocab; ++c)
        fused[c] = w * static_cast<double>(inst.q.at(s, c)) + v * static_cast<double>(inst.q2.at(s, c));
      std::size_t top = 0;
      for (std::size_t c = 1; c < vocab; ++c)
        if (fused[c] > fused[top]) top = c;
      correct += top == inst.labels[s];
    }
    counts.push_back(correct);
  }
  return counts;
}

/// Geometric-weight analogue of oracle_sweep at one ratio; models worst to best.
inline std::size_t oracle_multi_count(const std::vector<DistributionMatrix>& models, const LabelVector& labels,
                                      double ratio) {
  const std::size_t m = models.size();
  std::vector<double> w(m);
  double total = 0.0;
  for (std::size_t h = 0; h < m; ++h) total += (w[h] = std::pow(ratio, static_cast<double>(h)));
  for (double& x : w) x /= total;
  std::size_t correct = 0;
  const std::size_t vocab = models.front().vocab_size();
  for (std::size_t s = 0; s < labels.n_samples(); ++s) {
    std::size_t top = 0;
    double top_v = -1.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      double v = 0.0;
      for (std::size_t h = 0; h < m; ++h) v += w[h] * static_cast<double>(models[h].at(s, c));
      if (v > top_v) {
        top_v = v;
        top = c;
      }
    }
    correct += top == labels[s];
  }
  return correct;
}

inline constexpr double kScanStep = 1e-4;

/// Maximal run of scanned weights on which the fused argmax is `to_class`
/// instead of the primary's argmax. w_lo <= w_hi are scan points.
struct FlipInterval {
  std::size_t to_class = 0;
  double w_lo = 0.0;
  double w_hi = 0.0;
};

/// Scans w = 1 - k * 1e-4 for k = 1 .. 9999 and reports every run where the
/// fused argmax leaves the primary's argmax, in decreasing-w order.
inline std::vector<FlipInterval> oracle_exchange(const SynthInstance& inst, std::size_t sample) {
  const std::size_t vocab = inst.q.vocab_size();
  const auto q = inst.q.row(sample);
  const auto q2 = inst.q2.row(sample);
  const std::size_t base = detail::first_max(q);
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / kScanStep));

  std::vector<FlipInterval> out;
  std::optional<FlipInterval> open;
  for (std::size_t k = 1; k < steps; ++k) {
    const double w = 1.0 - static_cast<double>(k) * kScanStep;
    const double v = 1.0 - w;
    std::size_t top = 0;
    double top_v = w * static_cast<double>(q[0]) + v * static_cast<double>(q2[0]);
    for (std::size_t c = 1; c < vocab; ++c) {
      const double x = w * static_cast<double>(q[c]) + v * static_cast<double>(q2[c]);
      if (x > top_v) {
        top_v = x;
        top = c;
      }
    }
    if (open && open->to_class == top) {
      open->w_lo = w;
      continue;
    }
    if (open) out.push_back(*open);
    open.reset();
    if (top != base) open = FlipInterval{top, w, w};
  }
  if (open) out.push_back(*open);
  return out;
}

// ---------------------------------------------------------------------------
// Constructed instances

/// Small instances (|S| <= 100, V <= 10) realizing one theorem's hypotheses.
/// `seed` varies the minor masses, margins and (for `improvement`) the set sizes.
inline SynthInstance construct_theorem_instance(TheoremKind kind, std::uint64_t seed = 0) {
  SplitMix64 sizes(seed ^ 0x5EEDULL);
  switch (kind) {
    case TheoremKind::mainstay: {
      // Class 0: primary predicts it 10 times (8 right), secondary 20 times (10 right).
      constexpr std::size_t kV = 5;
      detail::Builder b(kV, seed);
      const auto row = [&](std::size_t label, std::size_t lm, std::size_t sm) {
        const std::size_t lm_alt = lm == 0 ? 1 : 0;
        const std::size_t sm_alt = sm == 0 ? 1 : 0;
        b.add(label, lm, lm_alt, b.rng.uniform(0.1, 0.5), sm, sm_alt, b.rng.uniform(0.1, 0.5));
      };
      for (int i = 0; i < 8; ++i) row(0, 0, 0);
      for (int i = 0; i < 2; ++i) row(1, 0, 0);
      for (int i = 0; i < 2; ++i) row(0, 1, 0);
      for (int i = 0; i < 8; ++i) row(2, 2, 0);
      for (int i = 0; i < 20; ++i) {
        const std::size_t c = 3 + static_cast<std::size_t>(i % 2);
        row(c, c, c);
      }
      SynthInstance inst = b.finish();
      inst.expected.h = 0;
      inst.expected.n = 10;
      inst.expected.m = 20;
      inst.expected.primary_correct = 8;
      inst.expected.secondary_correct = 10;
      return inst;
    }

    case TheoremKind::improvement:
    case TheoremKind::max_improvement:
    case TheoremKind::weight_variation: {
      // R = A = T: every correcting threshold is at most 1/3 and every
      // harmful threshold at least 4/3.
      std::size_t vocab = 6, n = 100, t = 7, f = 12;
      double f_margin_lo = 0.05, f_margin_hi = 0.15;
      if (kind == TheoremKind::improvement) {
        vocab = sizes.between(3, 10);
        n = sizes.between(20, 100);
        t = sizes.between(1, 5);
        f = sizes.between(t + 1, t + 10);
      } else if (kind == TheoremKind::weight_variation) {
        n = 60;
        t = 5;
        f = 9;
        f_margin_lo = 0.035;  // harmful thresholds spread over [4/3, ~11]
      }
      detail::Builder b(vocab, seed);
      double max_t = 0.0, min_f = kInfinity;
      for (std::size_t i = 0; i < t; ++i) {
        const double g = b.rng.uniform(0.02, 0.1), h = b.rng.uniform(0.3, 0.5);
        max_t = std::max(max_t, g / h);
        b.add_t(g, h);
      }
      for (std::size_t i = 0; i < f; ++i) {
        const double g = b.rng.uniform(0.2, 0.4), h = b.rng.uniform(f_margin_lo, f_margin_hi);
        min_f = std::min(min_f, g / h);
        b.add_f(g, h);
      }
      for (std::size_t i = t + f; i < n; ++i) b.add_n(b.rng.uniform() < 0.8);
      SynthInstance inst = detail::shuffled(b.finish(), b.rng);
      inst.expected.r_size = t;
      inst.expected.best_delta_acc = static_cast<double>(t) / static_cast<double>(n);
      inst.expected.max_correcting = max_t;
      inst.expected.protection = min_f;
      return inst;
    }

    case TheoremKind::variant_a32: {
      // Six stratified T samples and two that fail the primary-margin
      // condition (their thresholds exceed every harmful threshold).
      constexpr std::size_t kV = 6, kN = 60, kR = 6, kRisky = 2, kF = 10;
      detail::Builder b(kV, seed);
      double max_t = 0.0, min_f = kInfinity;
      for (std::size_t i = 0; i < kR; ++i) {
        const double g = b.rng.uniform(0.02, 0.1), h = b.rng.uniform(0.3, 0.5);
        max_t = std::max(max_t, g / h);
        b.add_t(g, h);
      }
      for (std::size_t i = 0; i < kRisky; ++i) b.add_t(b.rng.uniform(0.45, 0.5), b.rng.uniform(0.03, 0.05));
      for (std::size_t i = 0; i < kF; ++i) {
        const double g = b.rng.uniform(0.2, 0.4), h = b.rng.uniform(0.05, 0.15);
        min_f = std::min(min_f, g / h);
        b.add_f(g, h);
      }
      for (std::size_t i = kR + kRisky + kF; i < kN; ++i) b.add_n(true);
      SynthInstance inst = detail::shuffled(b.finish(), b.rng);
      inst.expected.r_size = kR;
      inst.expected.risky_size = kRisky;
      inst.expected.r_safe_size = kR - kRisky;
      inst.expected.best_delta_acc = static_cast<double>(kR) / kN;
      inst.expected.max_correcting = max_t;
      inst.expected.protection = min_f;
      return inst;
    }

    case TheoremKind::multi_model: {
      // Three models over 4 classes, worst to best. On "T" samples the best
      // model is wrong and both weaker ones right; on "F" samples model 0 is
      // wrong and models 1 and 2 right. The ratio window is (4/3, 2).
      constexpr std::size_t kV = 4, kN = 40, kT = 6, kF = 8;
      SplitMix64 rng(seed);
      std::vector<std::vector<float>> rows(3);
      LabelVector labels;
      for (std::size_t s = 0; s < kN; ++s) {
        const std::size_t k = rng.below(kV);
        const std::size_t other = detail::other_class(rng, kV, k);
        labels.labels.push_back(static_cast<std::uint32_t>(k));
        if (s < kT) {
          detail::append_two_class_row(rows[0], rng, kV, k, other, 0.4);
          detail::append_two_class_row(rows[1], rng, kV, k, other, 0.4);
          detail::append_two_class_row(rows[2], rng, kV, other, k, 0.1);
        } else if (s < kT + kF) {
          detail::append_two_class_row(rows[0], rng, kV, other, k, 0.4);
          detail::append_two_class_row(rows[1], rng, kV, k, other, 0.3);
          detail::append_two_class_row(rows[2], rng, kV, k, other, 0.4);
        } else {
          for (auto& r : rows) detail::append_two_class_row(r, rng, kV, k, other, rng.uniform(0.1, 0.5));
        }
      }
      SynthInstance inst;
      for (auto& r : rows) inst.models.emplace_back(kN, kV, DistributionKind::probabilities, std::move(r));
      inst.q = inst.models[2];
      inst.q2 = inst.models[1];
      inst.labels = std::move(labels);
      inst.ground_truth_partition = detail::partition_by_count(inst.q, inst.q2, inst.labels);
      const RatioWindow win = multi_model_window(inst.models, inst.labels);
      if (!win.nonempty()) throw DegenerateError("multi-model fixture has an empty ratio window");
      inst.expected.ratio = std::isfinite(win.hi) ? std::sqrt(win.lo * win.hi) : 2.0 * win.lo;
      return inst;
    }

    case TheoremKind::no_exchange: {
      // The secondary's top class is the primary's on every sample, so no
      // class satisfies the exchange condition anywhere.
      constexpr std::size_t kV = 8, kN = 50;
      detail::Builder b(kV, seed);
      for (std::size_t s = 0; s < kN; ++s) {
        const std::size_t k = b.rng.below(kV);
        const std::size_t top = b.rng.uniform() < 0.6 ? k : detail::other_class(b.rng, kV, k);
        const std::size_t a = detail::other_class(b.rng, kV, top);
        const std::size_t c = detail::other_class(b.rng, kV, top);
        b.add(k, top, a, b.rng.uniform(0.02, 0.5), top, c, b.rng.uniform(0.02, 0.5));
      }
      return b.finish();
    }
  }
  throw ArgumentError("unknown instance kind");
}

}  // namespace arfuse
