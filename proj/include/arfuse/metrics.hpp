#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "arfuse/error.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

/// Floor applied to a label probability before taking its log.
inline constexpr double kProbabilityFloor = 1e-12;

enum class MetricKind { acc, ppl, bpc };
enum class Direction { higher_better, lower_better };

inline Direction direction_of(MetricKind k) { return k == MetricKind::acc ? Direction::higher_better : Direction::lower_better; }

inline const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::acc: return "acc";
    case MetricKind::ppl: return "ppl";
    case MetricKind::bpc: return "bpc";
  }
  return "?";
}

inline MetricKind parse_metric_kind(std::string_view s) {
  if (s == "acc") return MetricKind::acc;
  if (s == "ppl") return MetricKind::ppl;
  if (s == "bpc") return MetricKind::bpc;
  throw ArgumentError("unknown metric '" + std::string(s) + "' (expected acc, ppl or bpc)");
}

struct MetricValue {
  MetricKind kind = MetricKind::acc;
  double value = 0.0;
  Direction direction = Direction::higher_better;
  /// Exact correct count for accuracy, so differences stay integral.
  std::optional<std::size_t> correct;
  std::size_t n_samples = 0;

  /// True when this value is strictly better than `other`.
  bool better_than(const MetricValue& other) const {
    if (correct && other.correct) return *correct > *other.correct;
    return direction == Direction::higher_better ? value > other.value : value < other.value;
  }
};

inline MetricValue make_metric(MetricKind kind, double value) {
  return {kind, value, direction_of(kind), std::nullopt, 0};
}

namespace detail {
inline double label_log2_probability(double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw NumericError("label probability is not a finite nonnegative number");
  return std::log2(std::max(p, kProbabilityFloor));
}

inline MetricValue accuracy_from_count(std::size_t correct, std::size_t n) {
  MetricValue v{MetricKind::acc, n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n),
                Direction::higher_better, correct, n};
  return v;
}

// Totals are in bits, so a uniform row over 2^k classes gives PPL exactly 2^k.
inline MetricValue perplexity_from_bits(double total_bits, std::size_t n) {
  return {MetricKind::ppl, std::exp2(total_bits / static_cast<double>(n)), Direction::lower_better, std::nullopt, n};
}

inline MetricValue bpc_from_bits(double total_bits, std::size_t total_chars, std::size_t n) {
  return {MetricKind::bpc, total_bits / static_cast<double>(total_chars), Direction::lower_better, std::nullopt, n};
}

inline void require_samples(std::size_t n) {
  if (n == 0) throw ArgumentError("metric over zero samples");
}
}  // namespace detail

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
inline MetricValue accuracy(const DistributionMatrix& fused, const LabelVector& labels) {
  check_paired(fused, labels);
  detail::require_samples(fused.n_samples());
  const auto correct = parallel::reduce_sum<std::size_t>(
      fused.n_samples(), [&](std::size_t s) -> std::size_t { return argmax(fused.row(s)) == labels[s]; });
  return detail::accuracy_from_count(correct, fused.n_samples());
}

/// Sum over samples of -log2 max(p_s[k_s], 1e-12).
inline double negative_log2_likelihood(const DistributionMatrix& fused, const LabelVector& labels) {
  check_paired(fused, labels);
  if (!fused.is_probabilities()) throw ArgumentError("likelihood metrics need probabilities");
  return parallel::reduce_sum<double>(fused.n_samples(), [&](std::size_t s) {
    return -detail::label_log2_probability(static_cast<double>(fused.at(s, labels[s])));
  });
}

/// exp(-(1/n) sum ln p_s[k_s]).
inline MetricValue perplexity(const DistributionMatrix& fused, const LabelVector& labels) {
  detail::require_samples(fused.n_samples());
  return detail::perplexity_from_bits(negative_log2_likelihood(fused, labels), fused.n_samples());
}

/// (sum -log2 p_s[k_s]) / total_chars. The character count depends on the
/// tokenizer, so the caller supplies it.
inline MetricValue bits_per_char(const DistributionMatrix& fused, const LabelVector& labels, std::size_t total_chars) {
  if (total_chars == 0) throw ArgumentError("bits per character needs total_chars > 0");
  detail::require_samples(fused.n_samples());
  return detail::bpc_from_bits(negative_log2_likelihood(fused, labels), total_chars, fused.n_samples());
}

/// Relative improvement in percent, positive when the ensemble is better:
/// (baseline - ensemble) / baseline * 100 for lower-is-better metrics and
/// (ensemble - baseline) / baseline * 100 otherwise.
inline double improvement_pct(const MetricValue& baseline, const MetricValue& ensemble) {
  if (baseline.kind != ensemble.kind) throw ArgumentError("improvement between different metric kinds");
  if (baseline.value == 0.0) {
    if (ensemble.value == 0.0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    return ensemble.better_than(baseline) ? inf : -inf;
  }
  const double diff = baseline.direction == Direction::lower_better ? baseline.value - ensemble.value
                                                                    : ensemble.value - baseline.value;
  return diff / baseline.value * 100.0;
}

}  // namespace arfuse
