#pragma once

// Fusion kernels: softmax, two-model linear fusion, geometric-weight
// multi-model fusion and similarity-weighted fusion. Row kernels are
// templates over the element type and accumulate in double.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "arfuse/error.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

inline constexpr std::size_t kMaxFusedModels = 8;

/// Weight on the primary model; beta = w / (1 - w) is the weight ratio and
/// is infinite at w = 1.
class FusionWeight {
 public:
  explicit FusionWeight(double w) : w_(w) {
    if (!(w > 0.0 && w <= 1.0)) throw ArgumentError("fusion weight must lie in (0, 1], got " + std::to_string(w));
  }
  static FusionWeight from_beta(double beta) {
    if (!(beta > 0.0)) throw ArgumentError("weight ratio must be positive");
    return FusionWeight(std::isinf(beta) ? 1.0 : beta / (1.0 + beta));
  }

  double w() const noexcept { return w_; }
  double secondary() const noexcept { return 1.0 - w_; }
  double beta() const noexcept { return w_ == 1.0 ? std::numeric_limits<double>::infinity() : w_ / (1.0 - w_); }
  /// (1 - w) / w, the quantity exchange thresholds are compared against.
  double tau() const noexcept { return (1.0 - w_) / w_; }

 private:
  double w_;
};

/// Weights w_h = w_1 r^h for h = 0..m-1 with w_1 = (1 - r) / (1 - r^m), so
/// they sum to one. Models are ordered worst to best, hence r > 1 puts the
/// largest weight on the best model.
class GeometricWeights {
 public:
  GeometricWeights(std::size_t m, double r) : m_(m), r_(r) {
    if (m < 2 || m > kMaxFusedModels)
      throw ArgumentError("geometric weights need 2 <= m <= " + std::to_string(kMaxFusedModels) + ", got " +
                          std::to_string(m));
    if (!(r > 0.0) || !std::isfinite(r)) throw ArgumentError("common ratio must be positive and finite");
    const double log_r = std::log(r);
    // expm1 form of (1 - r) / (1 - r^m); exact limit 1/m at r = 1.
    const double base = log_r == 0.0 ? 1.0 / static_cast<double>(m)
                                     : std::expm1(log_r) / std::expm1(static_cast<double>(m) * log_r);
    weights_.resize(m);
    for (std::size_t h = 0; h < m; ++h) weights_[h] = base * std::pow(r, static_cast<double>(h));
  }

  std::size_t m() const noexcept { return m_; }
  double ratio() const noexcept { return r_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double operator[](std::size_t h) const { return weights_[h]; }

 private:
  std::size_t m_;
  double r_;
  std::vector<double> weights_;
};

struct SimilarityFusionConfig {
  double p = 1.0;

  void validate() const {
    if (!std::isfinite(p) || p < 0.0) throw ArgumentError("similarity power must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Row kernels

/// Index of the largest entry; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

template <class T>
std::size_t argmax(const std::vector<T>& row) {
  return argmax(std::span<const T>(row));
}

/// Max-subtracted softmax. Throws DataError on non-finite input.
template <std::floating_point T>
std::vector<double> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty row");
  double hi = -std::numeric_limits<double>::infinity();
  for (T x : logits) {
    if (!std::isfinite(x)) throw DataError("softmax input is not finite");
    hi = std::max(hi, static_cast<double>(x));
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(static_cast<double>(logits[c]) - hi);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
  return out;
}

template <std::floating_point T>
std::vector<double> softmax(const std::vector<T>& logits) {
  return softmax(std::span<const T>(logits));
}

/// w * p1 + (1 - w) * p2, elementwise.
template <std::floating_point T, std::floating_point U>
std::vector<double> fuse_pair(std::span<const T> p1, std::span<const U> p2, FusionWeight w) {
  if (p1.size() != p2.size())
    throw ShapeError("fuse_pair rows differ in length: " + std::to_string(p1.size()) + " vs " +
                     std::to_string(p2.size()));
  std::vector<double> out(p1.size());
  const double a = w.w();
  const double b = w.secondary();
  for (std::size_t c = 0; c < p1.size(); ++c) out[c] = a * static_cast<double>(p1[c]) + b * static_cast<double>(p2[c]);
  return out;
}

template <std::floating_point T>
std::vector<double> fuse_pair(const std::vector<T>& p1, const std::vector<T>& p2, FusionWeight w) {
  return fuse_pair(std::span<const T>(p1), std::span<const T>(p2), w);
}

/// sum_h g[h] * rows[h]; rows ordered worst to best model.
template <std::floating_point T>
std::vector<double> fuse_multi(std::span<const std::span<const T>> rows, const GeometricWeights& g) {
  if (rows.size() != g.m())
    throw ShapeError("fuse_multi got " + std::to_string(rows.size()) + " rows for " + std::to_string(g.m()) +
                     " weights");
  const std::size_t vocab = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != vocab) throw ShapeError("fuse_multi rows differ in length");
  std::vector<double> out(vocab, 0.0);
  for (std::size_t h = 0; h < rows.size(); ++h)
    for (std::size_t c = 0; c < vocab; ++c) out[c] += g[h] * static_cast<double>(rows[h][c]);
  return out;
}

/// p1 * sim^p, renormalized. sim entries must lie in [0, 1].
template <std::floating_point T, std::floating_point U>
std::vector<double> fuse_similarity(std::span<const T> p1, std::span<const U> sim, const SimilarityFusionConfig& cfg) {
  cfg.validate();
  if (p1.size() != sim.size())
    throw ShapeError("fuse_similarity rows differ in length: " + std::to_string(p1.size()) + " vs " +
                     std::to_string(sim.size()));
  std::vector<double> out(p1.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < p1.size(); ++c) {
    const double s = static_cast<double>(sim[c]);
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("similarity weight outside [0, 1] at index " + std::to_string(c));
    out[c] = static_cast<double>(p1[c]) * std::pow(s, cfg.p);
    sum += out[c];
  }
  if (!(sum > 0.0)) throw DegenerateError("similarity-weighted row has zero mass; cannot renormalize");
  for (double& v : out) v /= sum;
  return out;
}

template <std::floating_point T, std::floating_point U>
std::vector<double> fuse_similarity(const std::vector<T>& p1, const std::vector<U>& sim,
                                    const SimilarityFusionConfig& cfg) {
  return fuse_similarity(std::span<const T>(p1), std::span<const U>(sim), cfg);
}

// ---------------------------------------------------------------------------
// Matrix level

inline void store_row(std::span<float> dst, const std::vector<double>& src) {
  for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = static_cast<float>(src[c]);
}

/// Probabilities pass through unchanged; logits go through softmax.
inline DistributionMatrix to_probabilities(const DistributionMatrix& m) {
  if (m.is_probabilities()) return m;
  DistributionMatrix out(m.n_samples(), m.vocab_size(), DistributionKind::probabilities);
  parallel::for_each_index(m.n_samples(), [&](std::size_t s) { store_row(out.row(s), softmax(m.row(s))); });
  return out;
}

/// Fuses two models after converting both to probabilities.
inline DistributionMatrix fuse_pair(const DistributionMatrix& primary, const DistributionMatrix& secondary,
                                    FusionWeight w) {
  check_same_shape(primary, secondary);
  const DistributionMatrix p1 = to_probabilities(primary);
  const DistributionMatrix p2 = to_probabilities(secondary);
  DistributionMatrix out(p1.n_samples(), p1.vocab_size(), DistributionKind::probabilities);
  parallel::for_each_index(p1.n_samples(),
                           [&](std::size_t s) { store_row(out.row(s), fuse_pair(p1.row(s), p2.row(s), w)); });
  return out;
}

/// models ordered worst to best.
inline DistributionMatrix fuse_multi(const std::vector<DistributionMatrix>& models, const GeometricWeights& g) {
  if (models.size() != g.m())
    throw ShapeError("got " + std::to_string(models.size()) + " models for " + std::to_string(g.m()) + " weights");
  for (const auto& m : models) check_same_shape(models.front(), m);
  std::vector<DistributionMatrix> probs;
  probs.reserve(models.size());
  for (const auto& m : models) probs.push_back(to_probabilities(m));
  const auto& first = probs.front();
  DistributionMatrix out(first.n_samples(), first.vocab_size(), DistributionKind::probabilities);
  parallel::for_each_index(first.n_samples(), [&](std::size_t s) {
    std::vector<std::span<const float>> rows;
    rows.reserve(probs.size());
    for (const auto& p : probs) rows.push_back(p.row(s));
    store_row(out.row(s), fuse_multi(std::span<const std::span<const float>>(rows), g));
  });
  return out;
}

}  // namespace arfuse
