#pragma once

// Weight sweeps over the primary weight w (beta = w / (1 - w)), location of
// the optimal ratio alpha and of the improvement-domain boundary D, and the
// alpha-vs-k power-law report.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "arfuse/error.hpp"
#include "arfuse/exchange.hpp"
#include "arfuse/format.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/metrics.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

/// Sorted, de-duplicated primary weights in (0, 1]; always contains w = 1.
class WeightGrid {
 public:
  WeightGrid() : WeightGrid(std::vector<double>{}) {}
  explicit WeightGrid(std::vector<double> w) : w_(std::move(w)) {
    for (double v : w_)
      if (!(v > 0.0 && v <= 1.0))
        throw ArgumentError("grid weight " + fmt::real(v) + " outside (0, 1]; w = 0 leaves only the secondary model");
    w_.push_back(1.0);
    std::sort(w_.begin(), w_.end());
    w_.erase(std::unique(w_.begin(), w_.end()), w_.end());
  }

  /// w = lo, lo + step, ... <= hi (the k-th point is lo + k * step).
  static WeightGrid linear(double lo, double hi, double step) {
    if (!(step > 0.0) || !(lo <= hi)) throw ArgumentError("linear grid needs lo <= hi and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> w;
    for (std::size_t k = 0; k <= count; ++k) w.push_back(lo + static_cast<double>(k) * step);
    return WeightGrid(std::move(w));
  }

  /// `count` ratios geometrically spaced from beta_lo to beta_hi.
  static WeightGrid beta_geometric(double beta_lo, double beta_hi, std::size_t count) {
    if (!(beta_lo > 0.0) || !(beta_hi >= beta_lo) || count < 1) throw ArgumentError("beta grid needs 0 < lo <= hi, count >= 1");
    std::vector<double> w;
    for (std::size_t k = 0; k < count; ++k) {
      const double t = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
      const double beta = beta_lo * std::pow(beta_hi / beta_lo, t);
      w.push_back(beta / (1.0 + beta));
    }
    return WeightGrid(std::move(w));
  }

  /// 0.50, 0.505, ..., 0.995 and 1.
  static WeightGrid standard() { return linear(0.5, 0.995, 0.005); }

  /// "default", "linear:LO:HI:STEP", "beta:LO:HI:COUNT" or "list:W1,W2,...".
  static WeightGrid parse(std::string_view spec) {
    const auto fields = split(spec, ':');
    try {
      if (fields.size() == 1 && fields[0] == "default") return standard();
      if (fields.size() == 4 && fields[0] == "linear")
        return linear(std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]));
      if (fields.size() == 4 && fields[0] == "beta")
        return beta_geometric(std::stod(fields[1]), std::stod(fields[2]), std::stoul(fields[3]));
      if (fields.size() == 2 && fields[0] == "list") {
        std::vector<double> w;
        for (const auto& f : split(fields[1], ',')) w.push_back(std::stod(f));
        return WeightGrid(std::move(w));
      }
    } catch (const std::logic_error&) {
      // fall through: malformed number
    }
    throw ArgumentError("bad grid spec '" + std::string(spec) + "'");
  }

  const std::vector<double>& weights() const noexcept { return w_; }
  std::size_t size() const noexcept { return w_.size(); }

 private:
  static std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  }

  std::vector<double> w_;
};

struct SweepPoint {
  double w = 1.0;
  double beta = kInfinity;
  MetricValue metric;
  double improvement_pct = 0.0;  ///< vs the reference single model
  double delta = 0.0;            ///< absolute improvement vs the reference, positive = better
};

struct SweepResult {
  MetricKind kind = MetricKind::acc;
  std::vector<SweepPoint> grid;  ///< ascending w
  MetricValue baseline_primary;
  MetricValue baseline_secondary;
  bool reference_is_primary = true;  ///< better single model; the primary on ties
  std::size_t alpha_index = 0;
  std::optional<std::size_t> d_index;
  bool unimodal = true;

  const SweepPoint& alpha_point() const { return grid[alpha_index]; }
  double alpha() const { return alpha_point().beta; }
  std::optional<double> d() const {
    if (!d_index) return std::nullopt;
    return grid[*d_index].beta;
  }
  double improvement_at_alpha_pct() const { return alpha_point().improvement_pct; }
  double best_delta() const { return alpha_point().delta; }
  const MetricValue& reference() const { return reference_is_primary ? baseline_primary : baseline_secondary; }
};

namespace detail {

struct PairEvaluator {
  const DistributionMatrix& q;
  const DistributionMatrix& q2;
  const LabelVector& labels;
  MetricKind kind;
  std::size_t total_chars;

  /// Metric of a * q + b * q2.
  MetricValue operator()(double a, double b) const {
    const std::size_t n = q.n_samples();
    if (kind == MetricKind::acc) {
      const auto correct = parallel::reduce_sum<std::size_t>(n, [&](std::size_t s) -> std::size_t {
        const auto r1 = q.row(s);
        const auto r2 = q2.row(s);
        std::size_t best = 0;
        double best_v = a * static_cast<double>(r1[0]) + b * static_cast<double>(r2[0]);
        for (std::size_t c = 1; c < r1.size(); ++c) {
          const double v = a * static_cast<double>(r1[c]) + b * static_cast<double>(r2[c]);
          if (v > best_v) {
            best_v = v;
            best = c;
          }
        }
        return best == labels[s];
      });
      return accuracy_from_count(correct, n);
    }
    const double bits = parallel::reduce_sum<double>(n, [&](std::size_t s) {
      const std::size_t k = labels[s];
      return -label_log2_probability(a * static_cast<double>(q.at(s, k)) + b * static_cast<double>(q2.at(s, k)));
    });
    return kind == MetricKind::ppl ? perplexity_from_bits(bits, n) : bpc_from_bits(bits, total_chars, n);
  }
};

inline double absolute_improvement(const MetricValue& reference, const MetricValue& v) {
  if (v.correct && reference.correct)
    return (static_cast<double>(*v.correct) - static_cast<double>(*reference.correct)) / static_cast<double>(v.n_samples);
  return reference.direction == Direction::lower_better ? reference.value - v.value : v.value - reference.value;
}

/// -1, 0, +1 comparing a against b in the better direction.
inline int compare_quality(const MetricValue& a, const MetricValue& b) {
  if (a.better_than(b)) return 1;
  if (b.better_than(a)) return -1;
  return 0;
}

}  // namespace detail

/// Evaluates the fused metric at every grid weight. On ties alpha is the
/// first grid point (smallest w); D is the smallest beta of the maximal run
/// of non-negative improvement ending at beta = infinity.
inline SweepResult sweep(const DistributionMatrix& q_in, const DistributionMatrix& q2_in, const LabelVector& labels,
                         MetricKind kind, const WeightGrid& grid, std::size_t total_chars = 0) {
  check_same_shape(q_in, q2_in);
  check_paired(q_in, labels);
  if (q_in.n_samples() == 0) throw ArgumentError("sweep over zero samples");
  if (kind == MetricKind::bpc && total_chars == 0) throw ArgumentError("bpc sweep needs total_chars > 0");
  const detail::ProbabilityView q(q_in), q2(q2_in);
  const detail::PairEvaluator eval{*q, *q2, labels, kind, total_chars};

  SweepResult out;
  out.kind = kind;
  out.baseline_primary = eval(1.0, 0.0);
  out.baseline_secondary = eval(0.0, 1.0);
  out.reference_is_primary = !out.baseline_secondary.better_than(out.baseline_primary);
  const MetricValue& ref = out.reference();

  for (double w : grid.weights()) {
    const FusionWeight fw(w);
    SweepPoint pt;
    pt.w = w;
    pt.beta = fw.beta();
    pt.metric = eval(fw.w(), fw.secondary());
    pt.improvement_pct = improvement_pct(ref, pt.metric);
    pt.delta = detail::absolute_improvement(ref, pt.metric);
    out.grid.push_back(pt);
  }

  for (std::size_t i = 1; i < out.grid.size(); ++i)
    if (out.grid[i].metric.better_than(out.grid[out.alpha_index].metric)) out.alpha_index = i;

  // Walk from beta = infinity towards smaller beta.
  for (std::size_t i = out.grid.size(); i-- > 0;) {
    if (detail::compare_quality(out.grid[i].metric, ref) < 0) break;
    out.d_index = i;
  }

  // Unimodal in the beta-decreasing direction: improving until alpha,
  // declining afterwards.
  for (std::size_t i = out.grid.size() - 1; i > 0; --i) {
    const int step = detail::compare_quality(out.grid[i - 1].metric, out.grid[i].metric);
    if ((i > out.alpha_index && step < 0) || (i <= out.alpha_index && step > 0)) out.unimodal = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

/// Header `w,beta,metric,improvement_pct`, rows in ascending w.
inline std::string sweep_csv(const SweepResult& r) {
  std::string out = "w,beta,metric,improvement_pct\n";
  for (const auto& p : r.grid)
    out += fmt::real(p.w) + ',' + fmt::real(p.beta) + ',' + fmt::real(p.metric.value) + ',' + fmt::real(p.improvement_pct) + '\n';
  return out;
}

inline nlohmann::json metric_json(const MetricValue& v) {
  nlohmann::json j;
  j["kind"] = to_string(v.kind);
  j["value"] = fmt::json_real(v.value);
  j["direction"] = v.direction == Direction::higher_better ? "higher_better" : "lower_better";
  if (v.correct) j["correct"] = *v.correct;
  return j;
}

inline nlohmann::json sweep_summary_json(const SweepResult& r) {
  nlohmann::json j;
  j["metric"] = to_string(r.kind);
  j["alpha"] = fmt::json_real(r.alpha());
  j["alpha_w"] = r.alpha_point().w;
  j["D"] = r.d() ? fmt::json_real(*r.d()) : nlohmann::json(nullptr);
  j["D_w"] = r.d_index ? nlohmann::json(r.grid[*r.d_index].w) : nlohmann::json(nullptr);
  j["baseline_primary"] = metric_json(r.baseline_primary);
  j["baseline_secondary"] = metric_json(r.baseline_secondary);
  j["reference"] = r.reference_is_primary ? "primary" : "secondary";
  j["best_metric"] = fmt::json_real(r.alpha_point().metric.value);
  j["best_improvement"] = fmt::json_real(r.best_delta());
  j["improvement_at_alpha_pct"] = fmt::json_real(r.improvement_at_alpha_pct());
  j["grid_points"] = r.grid.size();
  j["unimodal"] = r.unimodal;
  return j;
}

// ---------------------------------------------------------------------------
// alpha vs k

struct PairMeta {
  double theta_llm = 0.0;
  double theta_slm = 0.0;

  double k() const { return theta_llm / theta_slm; }
};

struct AlphaVsKRow {
  double k = 0.0;
  double alpha = 0.0;
  double improvement_at_alpha_pct = 0.0;
};

struct AlphaVsKReport {
  std::vector<AlphaVsKRow> rows;  ///< ascending k
  double exponent = 0.0;          ///< slope of log alpha against log k
  double log_intercept = 0.0;
};

/// Least-squares fit of log alpha = c + p log k over pairs sharing theta_llm.
inline AlphaVsKReport alpha_vs_k_report(const std::vector<std::pair<PairMeta, SweepResult>>& results) {
  if (results.size() < 2) throw ArgumentError("alpha-vs-k needs at least two model pairs");
  AlphaVsKReport rep;
  const double theta = results.front().first.theta_llm;
  for (const auto& [meta, sweep_result] : results) {
    if (meta.theta_llm != theta) throw ArgumentError("alpha-vs-k pairs must share the primary parameter count");
    if (!(meta.theta_slm > 0.0) || meta.k() < 1.0) throw ArgumentError("parameter ratio k must be >= 1");
    const double alpha = sweep_result.alpha();
    if (!std::isfinite(alpha) || !(alpha > 0.0))
      throw ArgumentError("alpha at beta = infinity cannot enter the power-law fit");
    rep.rows.push_back({meta.k(), alpha, sweep_result.improvement_at_alpha_pct()});
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) { return a.k < b.k; });

  const double n = static_cast<double>(rep.rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto& r : rep.rows) {
    mx += std::log(r.k);
    my += std::log(r.alpha);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : rep.rows) {
    const double dx = std::log(r.k) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r.alpha) - my);
  }
  if (sxx == 0.0) throw ArgumentError("alpha-vs-k needs at least two distinct k values");
  rep.exponent = sxy / sxx;
  rep.log_intercept = my - rep.exponent * mx;
  return rep;
}

inline std::string alpha_vs_k_csv(const AlphaVsKReport& rep) {
  std::string out = "k,alpha,improvement_at_alpha_pct\n";
  for (const auto& r : rep.rows) out += fmt::real(r.k) + ',' + fmt::real(r.alpha) + ',' + fmt::real(r.improvement_at_alpha_pct) + '\n';
  return out;
}

}  // namespace arfuse
