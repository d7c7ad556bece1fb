#pragma once

// Exchange analysis for linear fusion q_new = w q + (1 - w) q'.
//
// Dividing the fused scores by w shows the decision depends only on
// tau = (1 - w) / w: class j overtakes class i exactly when
//     (q_i - q_j) / (q'_j - q'_i) < tau,   with q'_j > q'_i.
// The left side is the exchange threshold ET(i -> j). A threshold equal to
// tau does not flip.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arfuse/error.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class SampleClass : std::uint8_t {
  t,  ///< primary wrong, secondary right
  f,  ///< primary right, secondary wrong
  n,  ///< both right or both wrong
};

inline const char* to_string(SampleClass c) {
  switch (c) {
    case SampleClass::t: return "T";
    case SampleClass::f: return "F";
    case SampleClass::n: return "N";
  }
  return "?";
}

struct SamplePartition {
  std::vector<std::size_t> t_set;
  std::vector<std::size_t> f_set;
  std::vector<std::size_t> n_set;
  std::vector<SampleClass> membership;

  std::size_t size() const noexcept { return membership.size(); }
  friend bool operator==(const SamplePartition&, const SamplePartition&) = default;
};

/// Open tau interval (lo, hi); hi may be infinite.
struct TauInterval {
  double lo = 0.0;
  double hi = kInfinity;

  bool empty() const noexcept { return !(lo < hi); }
  bool contains(double tau) const noexcept { return tau > lo && tau < hi; }
};

/// tau -> w, with tau = infinity mapping to 0.
inline double tau_to_w(double tau) { return std::isinf(tau) ? 0.0 : 1.0 / (1.0 + tau); }
inline double w_to_tau(double w) { return (1.0 - w) / w; }

namespace detail {
/// Holds a probability view of a matrix, converting logits once.
class ProbabilityView {
 public:
  explicit ProbabilityView(const DistributionMatrix& m) {
    if (m.is_probabilities()) {
      ptr_ = &m;
    } else {
      owned_ = to_probabilities(m);
      ptr_ = &*owned_;
    }
  }
  const DistributionMatrix& operator*() const { return *ptr_; }
  const DistributionMatrix* operator->() const { return ptr_; }

 private:
  std::optional<DistributionMatrix> owned_;
  const DistributionMatrix* ptr_ = nullptr;
};

inline void check_analysis_inputs(const DistributionMatrix& q, const DistributionMatrix& q2, const LabelVector& labels) {
  check_same_shape(q, q2);
  check_paired(q, labels);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Row-level primitives

/// ET(i -> j) when the exchange condition q2[j] > q2[i] holds, else nullopt.
template <std::floating_point T>
std::optional<double> exchange_threshold(std::span<const T> q, std::span<const T> q2, std::size_t i, std::size_t j) {
  if (i == j) throw ArgumentError("exchange threshold needs two distinct classes");
  if (i >= q.size() || j >= q.size() || q.size() != q2.size()) throw ShapeError("exchange threshold index/shape");
  const double gain = static_cast<double>(q2[j]) - static_cast<double>(q2[i]);
  if (!(gain > 0.0)) return std::nullopt;
  return (static_cast<double>(q[i]) - static_cast<double>(q[j])) / gain;
}

template <std::floating_point T>
std::optional<double> exchange_threshold(const std::vector<T>& q, const std::vector<T>& q2, std::size_t i, std::size_t j) {
  return exchange_threshold(std::span<const T>(q), std::span<const T>(q2), i, j);
}

/// Tau values at which class c is the fused argmax (lowest index wins ties).
/// The region is an intersection of half-lines, hence a single interval.
template <std::floating_point T>
std::optional<TauInterval> argmax_region(std::span<const T> q, std::span<const T> q2, std::size_t c) {
  TauInterval region{0.0, kInfinity};
  for (std::size_t d = 0; d < q.size() && !region.empty(); ++d) {
    if (d == c) continue;
    // fused_c - fused_d is proportional to a + tau * b.
    const double a = static_cast<double>(q[c]) - static_cast<double>(q[d]);
    const double b = static_cast<double>(q2[c]) - static_cast<double>(q2[d]);
    if (b > 0.0) {
      region.lo = std::max(region.lo, -a / b);
    } else if (b < 0.0) {
      region.hi = std::min(region.hi, a / -b);
    } else if (a < 0.0 || (a == 0.0 && d < c)) {
      return std::nullopt;
    }
  }
  if (region.empty()) return std::nullopt;
  return region;
}

/// Smallest threshold over all classes the secondary model prefers to
/// `from`, i.e. the first flip as tau grows. nullopt if none qualifies.
struct BindingExchange {
  std::size_t to_class = 0;
  double threshold = kInfinity;
};

template <std::floating_point T>
std::optional<BindingExchange> binding_exchange(std::span<const T> q, std::span<const T> q2, std::size_t from) {
  std::optional<BindingExchange> best;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (j == from) continue;
    if (auto et = exchange_threshold(q, q2, from, j); et && (!best || *et < best->threshold)) best = {j, *et};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Partition and per-sample exchanges

inline SamplePartition partition(const DistributionMatrix& q, const DistributionMatrix& q2, const LabelVector& labels) {
  detail::check_analysis_inputs(q, q2, labels);
  SamplePartition p;
  p.membership.resize(q.n_samples());
  parallel::for_each_index(q.n_samples(), [&](std::size_t s) {
    const bool lm_right = argmax(q.row(s)) == labels[s];
    const bool sm_right = argmax(q2.row(s)) == labels[s];
    p.membership[s] = (!lm_right && sm_right) ? SampleClass::t : (lm_right && !sm_right) ? SampleClass::f : SampleClass::n;
  });
  for (std::size_t s = 0; s < p.membership.size(); ++s) {
    switch (p.membership[s]) {
      case SampleClass::t: p.t_set.push_back(s); break;
      case SampleClass::f: p.f_set.push_back(s); break;
      case SampleClass::n: p.n_set.push_back(s); break;
    }
  }
  return p;
}

/// Per-sample record. For T samples it is the correcting exchange
/// (primary argmax -> label); otherwise the binding exchange out of the
/// primary argmax. `strict` means to_class actually becomes the fused argmax
/// for some tau above the threshold.
struct ExchangeRecord {
  std::size_t sample = 0;
  std::size_t from_class = 0;
  std::size_t to_class = 0;
  double threshold = kInfinity;
  bool strict = false;
};

inline std::optional<ExchangeRecord> exchange_record(const DistributionMatrix& q, const DistributionMatrix& q2,
                                                     const LabelVector& labels, std::size_t s, SampleClass cls) {
  const auto qr = q.row(s);
  const auto q2r = q2.row(s);
  const std::size_t from = argmax(qr);
  ExchangeRecord rec{s, from, 0, kInfinity, false};
  if (cls == SampleClass::t) {
    const auto et = exchange_threshold(qr, q2r, from, labels[s]);
    if (!et) return std::nullopt;
    rec.to_class = labels[s];
    rec.threshold = *et;
  } else {
    const auto b = binding_exchange(qr, q2r, from);
    if (!b) return std::nullopt;
    rec.to_class = b->to_class;
    rec.threshold = b->threshold;
  }
  if (rec.threshold < 0.0) throw NumericError("negative exchange threshold out of the primary argmax");
  rec.strict = argmax_region(qr, q2r, rec.to_class).has_value();
  return rec;
}

/// Threshold at which an F sample first loses its correct prediction
/// (infinite when the secondary model prefers no other class).
inline double harmful_threshold(const DistributionMatrix& q, const DistributionMatrix& q2, std::size_t s) {
  const auto b = binding_exchange(q.row(s), q2.row(s), argmax(q.row(s)));
  return b ? b->threshold : kInfinity;
}

/// Minimum harmful threshold over F: the upper edge of every safe window.
inline double protection_bound(const DistributionMatrix& q, const DistributionMatrix& q2, const SamplePartition& p) {
  double upper = kInfinity;
  for (std::size_t f : p.f_set) upper = std::min(upper, harmful_threshold(q, q2, f));
  return upper;
}

// ---------------------------------------------------------------------------
// Stratification sets

struct StratificationSets {
  std::vector<std::size_t> a_set;  ///< T samples separated from every F sample on both margins
  std::vector<std::size_t> r_set;  ///< members of A strictly correctable inside the safe window
};

/// a in T joins A when, against every f in F,
///   q_f[k_f] - max_{j != k_f} q_f[j]  >  q_a[i_a] - q_a[k_a]        (primary margins)
///   q'_a[k_a] - q'_a[i_a]             >  q'_f[j_f] - q'_f[k_f]      (secondary margins)
/// with i_a the primary's wrong prediction and j_f the secondary's. Together
/// these force ET(a) below every harmful threshold of F.
inline StratificationSets stratification_sets(const DistributionMatrix& q_in, const DistributionMatrix& q2_in,
                                              const LabelVector& labels, const SamplePartition& p) {
  detail::check_analysis_inputs(q_in, q2_in, labels);
  const detail::ProbabilityView q(q_in), q2(q2_in);

  // The quantifier over F reduces exactly to the tightest F sample on each side.
  double min_primary_margin = kInfinity;
  double max_secondary_gap = -kInfinity;
  for (std::size_t f : p.f_set) {
    const auto qr = q->row(f);
    const auto q2r = q2->row(f);
    const std::size_t k = labels[f];
    double runner_up = -kInfinity;
    for (std::size_t j = 0; j < qr.size(); ++j)
      if (j != k) runner_up = std::max(runner_up, static_cast<double>(qr[j]));
    min_primary_margin = std::min(min_primary_margin, static_cast<double>(qr[k]) - runner_up);
    const std::size_t j_f = argmax(q2r);
    max_secondary_gap = std::max(max_secondary_gap, static_cast<double>(q2r[j_f]) - static_cast<double>(q2r[k]));
  }
  const double upper = protection_bound(*q, *q2, p);

  StratificationSets out;
  for (std::size_t a : p.t_set) {
    const auto qr = q->row(a);
    const auto q2r = q2->row(a);
    const std::size_t i = argmax(qr);
    const std::size_t k = labels[a];
    const double primary_gap = static_cast<double>(qr[i]) - static_cast<double>(qr[k]);
    const double secondary_margin = static_cast<double>(q2r[k]) - static_cast<double>(q2r[i]);
    if (!(secondary_margin > 0.0)) continue;  // exchange condition fails
    if (!(min_primary_margin > primary_gap && secondary_margin > max_secondary_gap)) continue;
    out.a_set.push_back(a);
    const auto region = argmax_region(qr, q2r, k);
    if (region && region->lo < std::min(region->hi, upper)) out.r_set.push_back(a);
  }
  return out;
}

inline StratificationSets stratification_sets(const DistributionMatrix& q, const DistributionMatrix& q2,
                                              const LabelVector& labels) {
  return stratification_sets(q, q2, labels, partition(q, q2, labels));
}

// ---------------------------------------------------------------------------
// Safe window

struct SafeWindow {
  double lower = 0.0;
  double upper = kInfinity;
  bool nonempty = false;

  TauInterval tau() const noexcept { return {lower, upper}; }
  /// The same window as weights on the primary model: (w_lo, w_hi).
  double w_lo() const noexcept { return tau_to_w(upper); }
  double w_hi() const noexcept { return tau_to_w(lower); }
};

/// lower = max correcting threshold over `targets` (T samples), upper = min
/// harmful threshold over F.
inline SafeWindow safe_window(const DistributionMatrix& q_in, const DistributionMatrix& q2_in, const LabelVector& labels,
                              std::span<const std::size_t> targets) {
  if (targets.empty()) throw ArgumentError("safe window needs a nonempty target set");
  detail::check_analysis_inputs(q_in, q2_in, labels);
  const detail::ProbabilityView q(q_in), q2(q2_in);
  const SamplePartition p = partition(*q, *q2, labels);
  SafeWindow win;
  win.lower = -kInfinity;
  for (std::size_t t : targets) {
    if (t >= p.size() || p.membership[t] != SampleClass::t)
      throw ArgumentError("safe window target " + std::to_string(t) + " is not a T sample");
    const auto et = exchange_threshold(q->row(t), q2->row(t), argmax(q->row(t)), labels[t]);
    if (!et) throw ArgumentError("safe window target " + std::to_string(t) + " has no exchange toward its label");
    win.lower = std::max(win.lower, *et);
  }
  win.upper = protection_bound(*q, *q2, p);
  win.nonempty = win.lower < win.upper;
  return win;
}

inline SafeWindow safe_window(const DistributionMatrix& q, const DistributionMatrix& q2, const LabelVector& labels,
                              const std::vector<std::size_t>& targets) {
  return safe_window(q, q2, labels, std::span<const std::size_t>(targets));
}

/// The |R| - |T \ A| members of R with the lowest correcting thresholds
/// (ties broken by sample index). Empty when |R| <= |T \ A|.
inline std::vector<std::size_t> conservative_targets(const DistributionMatrix& q_in, const DistributionMatrix& q2_in,
                                                     const LabelVector& labels, const SamplePartition& p,
                                                     const StratificationSets& sets) {
  const detail::ProbabilityView q(q_in), q2(q2_in);
  const std::size_t risky = p.t_set.size() - sets.a_set.size();
  if (sets.r_set.size() <= risky) return {};
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t r : sets.r_set)
    ranked.emplace_back(*exchange_threshold(q->row(r), q2->row(r), argmax(q->row(r)), labels[r]), r);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sets.r_set.size() - risky; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Mainstay deviation

struct MainstayReport {
  std::size_t h = 0;
  std::size_t n = 0;  ///< primary predictions of h
  std::size_t m = 0;  ///< secondary predictions of h
  std::size_t primary_correct = 0;
  std::size_t secondary_correct = 0;
  double precision_primary = 0.0;
  double precision_secondary = 0.0;
  bool assumption_holds = false;
  bool deviation_holds = false;
};

/// Counts and precisions for class h. Both predicates are decided on the
/// integer counts: with P_L = c_L / n and P_S = c_S / m,
///   |P_L - P_S| < (m - n) P_S / n   <=>   |c_L m - c_S n| < (m - n) c_S
///   m P_S > n P_L                   <=>   c_S > c_L
inline MainstayReport mainstay_report(const DistributionMatrix& q, const DistributionMatrix& q2, const LabelVector& labels,
                                      std::size_t h) {
  detail::check_analysis_inputs(q, q2, labels);
  if (h >= q.vocab_size()) throw ArgumentError("class " + std::to_string(h) + " outside vocabulary");
  MainstayReport r;
  r.h = h;
  for (std::size_t s = 0; s < q.n_samples(); ++s) {
    const bool is_h = labels[s] == h;
    if (argmax(q.row(s)) == h) {
      ++r.n;
      r.primary_correct += is_h;
    }
    if (argmax(q2.row(s)) == h) {
      ++r.m;
      r.secondary_correct += is_h;
    }
  }
  if (r.n == 0) throw ArgumentError("primary model never predicts class " + std::to_string(h) + "; precision undefined");
  if (r.m == 0) throw ArgumentError("secondary model never predicts class " + std::to_string(h) + "; precision undefined");
  r.precision_primary = static_cast<double>(r.primary_correct) / static_cast<double>(r.n);
  r.precision_secondary = static_cast<double>(r.secondary_correct) / static_cast<double>(r.m);

  const auto cl_m = static_cast<long double>(r.primary_correct) * static_cast<long double>(r.m);
  const auto cs_n = static_cast<long double>(r.secondary_correct) * static_cast<long double>(r.n);
  const bool frequency = r.n < r.m;
  const bool bounded =
      frequency && std::abs(cl_m - cs_n) < static_cast<long double>(r.m - r.n) * static_cast<long double>(r.secondary_correct);
  r.assumption_holds = frequency && bounded;
  r.deviation_holds = r.secondary_correct > r.primary_correct;
  return r;
}

/// Classes ordered by label frequency, most frequent first, ties by index.
inline std::vector<std::size_t> frequent_classes(const LabelVector& labels, std::size_t vocab, std::size_t k) {
  std::vector<std::size_t> counts(vocab, 0);
  for (auto l : labels.labels) ++counts.at(l);
  std::vector<std::size_t> order(vocab);
  for (std::size_t c = 0; c < vocab; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  order.resize(std::min(k, vocab));
  return order;
}

/// Number of distinct argmax classes over all rows.
inline std::size_t vocab_coverage_report(const DistributionMatrix& q) {
  std::vector<bool> seen(q.vocab_size(), false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < q.n_samples(); ++s) {
    const std::size_t c = argmax(q.row(s));
    if (!seen[c]) {
      seen[c] = true;
      ++count;
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Whole-instance report

struct ExchangeReport {
  SamplePartition partition;
  std::vector<std::optional<ExchangeRecord>> records;  ///< one slot per sample
  StratificationSets sets;
  std::optional<SafeWindow> window;  ///< over R; absent when R is empty
  double protection_bound = kInfinity;

  std::size_t t_size() const noexcept { return partition.t_set.size(); }
  std::size_t f_size() const noexcept { return partition.f_set.size(); }
  std::size_t n_size() const noexcept { return partition.n_set.size(); }
  std::size_t a_size() const noexcept { return sets.a_set.size(); }
  std::size_t r_size() const noexcept { return sets.r_set.size(); }
};

inline ExchangeReport exchange_report(const DistributionMatrix& q_in, const DistributionMatrix& q2_in,
                                      const LabelVector& labels) {
  detail::check_analysis_inputs(q_in, q2_in, labels);
  const detail::ProbabilityView q(q_in), q2(q2_in);
  ExchangeReport rep;
  rep.partition = partition(*q, *q2, labels);
  rep.records.resize(q->n_samples());
  parallel::for_each_index(q->n_samples(), [&](std::size_t s) {
    rep.records[s] = exchange_record(*q, *q2, labels, s, rep.partition.membership[s]);
  });
  rep.sets = stratification_sets(*q, *q2, labels, rep.partition);
  rep.protection_bound = protection_bound(*q, *q2, rep.partition);
  if (!rep.sets.r_set.empty()) rep.window = safe_window(*q, *q2, labels, rep.sets.r_set);
  return rep;
}

// ---------------------------------------------------------------------------
// Multi-model extension

/// Open interval of common ratios r for geometric weights.
struct RatioWindow {
  double lo = 0.0;
  double hi = kInfinity;
  bool nonempty() const noexcept { return lo < hi; }
};

/// Intersects, over every pair of models x1 < x2 (ordered worst to best),
/// the safe window of the pair's weight ratio w_x1 / w_x2 = r^-(x2 - x1).
/// Each pair's lower edge is the largest correcting threshold over its T
/// samples with a defined exchange; the upper edge is its protection bound.
inline RatioWindow multi_model_window(const std::vector<DistributionMatrix>& models, const LabelVector& labels) {
  if (models.size() < 2 || models.size() > kMaxFusedModels) throw ArgumentError("need 2..8 models");
  std::vector<DistributionMatrix> probs;
  for (const auto& m : models) {
    detail::check_analysis_inputs(models.front(), m, labels);
    probs.push_back(to_probabilities(m));
  }
  RatioWindow win;
  for (std::size_t hi_model = 1; hi_model < probs.size(); ++hi_model) {
    for (std::size_t lo_model = 0; lo_model < hi_model; ++lo_model) {
      const auto& primary = probs[hi_model];
      const auto& secondary = probs[lo_model];
      const SamplePartition p = partition(primary, secondary, labels);
      double lower = -kInfinity;
      for (std::size_t t : p.t_set)
        if (auto et = exchange_threshold(primary.row(t), secondary.row(t), argmax(primary.row(t)), labels[t]))
          lower = std::max(lower, *et);
      const double upper = protection_bound(primary, secondary, p);
      const double inv_d = -1.0 / static_cast<double>(hi_model - lo_model);
      // rho = r^-d is decreasing in r: rho > lower bounds r above, rho < upper bounds it below.
      if (lower > 0.0) win.hi = std::min(win.hi, std::pow(lower, inv_d));
      if (std::isfinite(upper)) win.lo = std::max(win.lo, upper > 0.0 ? std::pow(upper, inv_d) : kInfinity);
    }
  }
  return win;
}

enum class PairwiseVerdict { correct, wrong, undetermined };

/// Predicts whether the geometric fusion puts the label first on sample s by
/// splitting sum_h w_h (q_h[k] - q_h[c]) into the C(m, 2) pairwise terms
/// w_x2 d_x2 + w_x1 d_x1 (their sum is (m - 1) times the total). When every
/// pair agrees on a comparison the total must agree too.
inline PairwiseVerdict pairwise_decomposition(const std::vector<DistributionMatrix>& probs, const GeometricWeights& g,
                                              const LabelVector& labels, std::size_t s) {
  const std::size_t k = labels[s];
  const std::size_t vocab = probs.front().vocab_size();
  bool all_beaten = true;
  for (std::size_t c = 0; c < vocab; ++c) {
    if (c == k) continue;
    bool pair_for_k = true;
    bool pair_for_c = true;
    for (std::size_t x2 = 1; x2 < probs.size(); ++x2) {
      for (std::size_t x1 = 0; x1 < x2; ++x1) {
        const double d2 = static_cast<double>(probs[x2].at(s, k)) - static_cast<double>(probs[x2].at(s, c));
        const double d1 = static_cast<double>(probs[x1].at(s, k)) - static_cast<double>(probs[x1].at(s, c));
        const double term = g[x2] * d2 + g[x1] * d1;
        pair_for_k = pair_for_k && term > 0.0;
        pair_for_c = pair_for_c && term < 0.0;
      }
    }
    if (pair_for_c) return PairwiseVerdict::wrong;
    if (!pair_for_k) all_beaten = false;
  }
  return all_beaten ? PairwiseVerdict::correct : PairwiseVerdict::undetermined;
}

}  // namespace arfuse
