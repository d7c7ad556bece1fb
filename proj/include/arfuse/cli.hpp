#pragma once

// Command-line front end. run() parses the arguments, executes one
// subcommand and returns the exit status: 0 on success, 2 on argument
// errors, 1 on data errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arfuse/error.hpp"
#include "arfuse/exchange.hpp"
#include "arfuse/format.hpp"
#include "arfuse/fusion.hpp"
#include "arfuse/metrics.hpp"
#include "arfuse/parallel.hpp"
#include "arfuse/plot.hpp"
#include "arfuse/sim_matrix.hpp"
#include "arfuse/sweep.hpp"
#include "arfuse/synth.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ArgumentError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw ArgumentError(std::string("--") + what + " file not found: " + path);
}

inline void prepare_dir(const std::string& dir) {
  if (dir.empty()) throw ArgumentError("missing --out-dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline json window_json(const SafeWindow& w) {
  json j;
  j["lower"] = fmt::json_real(w.lower);
  j["upper"] = fmt::json_real(w.upper);
  j["nonempty"] = w.nonempty;
  j["w_lo"] = w.w_lo();
  j["w_hi"] = w.w_hi();
  return j;
}

inline json mainstay_json(const MainstayReport& r) {
  json j;
  j["h"] = r.h;
  j["n"] = r.n;
  j["m"] = r.m;
  j["primary_correct"] = r.primary_correct;
  j["secondary_correct"] = r.secondary_correct;
  j["precision_primary"] = r.precision_primary;
  j["precision_secondary"] = r.precision_secondary;
  j["assumption_holds"] = r.assumption_holds;
  j["deviation_holds"] = r.deviation_holds;
  return j;
}

struct Inputs {
  std::string llm, slm, labels;
};

inline void add_pair_options(CLI::App* cmd, Inputs& in, bool with_labels) {
  cmd->add_option("--llm", in.llm, "primary model distributions (ARLG)");
  cmd->add_option("--slm", in.slm, "secondary model distributions (ARLG)");
  if (with_labels) cmd->add_option("--labels", in.labels, "labels (ARLB)");
}

// -- fuse ------------------------------------------------------------------

struct FuseArgs {
  Inputs in;
  std::optional<double> w;
  std::vector<std::string> models;
  std::optional<double> ratio;
  std::string sim;
  std::optional<double> p;
  std::string out;
};

inline void run_fuse(const FuseArgs& a) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  const int modes = a.w.has_value() + !a.models.empty() + !a.sim.empty();
  if (modes != 1) throw ArgumentError("fuse needs exactly one of --w, --models or --sim");
  DistributionMatrix out;
  if (!a.models.empty()) {
    if (!a.ratio) throw ArgumentError("--models needs --ratio");
    for (const auto& m : a.models) require_file(m, "models");
    std::vector<DistributionMatrix> ms;
    for (const auto& m : a.models) ms.push_back(read_distributions(m));
    out = fuse_multi(ms, GeometricWeights(ms.size(), *a.ratio));
  } else {
    require_file(a.in.llm, "llm");
    require_file(a.in.slm, "slm");
    if (a.w) {
      const FusionWeight w(*a.w);
      out = fuse_pair(read_distributions(a.in.llm), read_distributions(a.in.slm), w);
    } else {
      require_file(a.sim, "sim");
      const SimilarityFusionConfig cfg{a.p.value_or(1.0)};
      cfg.validate();
      out = fuse_similarity(read_distributions(a.in.llm), read_distributions(a.in.slm), read_packed(a.sim), cfg);
    }
  }
  write_distributions(out, a.out);
}

// -- sweep -----------------------------------------------------------------

struct SweepArgs {
  Inputs in;
  std::string metric = "acc";
  std::size_t total_chars = 0;
  std::string grid = "default";
  std::string out_dir;
};

inline void run_sweep(const SweepArgs& a) {
  const MetricKind kind = parse_metric_kind(a.metric);
  const WeightGrid grid = WeightGrid::parse(a.grid);
  require_file(a.in.llm, "llm");
  require_file(a.in.slm, "slm");
  require_file(a.in.labels, "labels");
  if (kind == MetricKind::bpc && a.total_chars == 0) throw ArgumentError("--metric bpc needs --total-chars");
  prepare_dir(a.out_dir);
  const SweepResult r = sweep(read_distributions(a.in.llm), read_distributions(a.in.slm), read_labels(a.in.labels), kind,
                              grid, a.total_chars);
  const fs::path dir(a.out_dir);
  io::write_text(dir / "sweep.csv", sweep_csv(r));
  io::write_text(dir / "sweep.json", fmt::json(sweep_summary_json(r)));
  emit_plot(r, dir / "sweep.svg");
}

// -- exchange --------------------------------------------------------------

struct ExchangeArgs {
  Inputs in;
  std::string out_dir;
};

inline void run_exchange(const ExchangeArgs& a) {
  require_file(a.in.llm, "llm");
  require_file(a.in.slm, "slm");
  require_file(a.in.labels, "labels");
  prepare_dir(a.out_dir);
  const DistributionMatrix q = to_probabilities(read_distributions(a.in.llm));
  const DistributionMatrix q2 = to_probabilities(read_distributions(a.in.slm));
  const LabelVector y = read_labels(a.in.labels);
  const ExchangeReport rep = exchange_report(q, q2, y);

  std::string csv = "sample,class_from,class_to,threshold,strict,partition\n";
  for (std::size_t s = 0; s < rep.records.size(); ++s) {
    const char* cls = to_string(rep.partition.membership[s]);
    if (const auto& r = rep.records[s]) {
      csv += std::to_string(s) + ',' + std::to_string(r->from_class) + ',' + std::to_string(r->to_class) + ',' +
             fmt::real(r->threshold) + ',' + (r->strict ? "true" : "false") + ',' + cls + '\n';
    } else {
      csv += std::to_string(s) + ',' + std::to_string(argmax(q.row(s))) + ",,,false," + cls + '\n';
    }
  }

  json j;
  j["sizes"] = {{"T", rep.t_size()}, {"F", rep.f_size()}, {"N", rep.n_size()}, {"A", rep.a_size()}, {"R", rep.r_size()}};
  j["a_set"] = rep.sets.a_set;
  j["r_set"] = rep.sets.r_set;
  j["protection_bound"] = fmt::json_real(rep.protection_bound);
  j["window"] = rep.window ? window_json(*rep.window) : json(nullptr);
  const auto safe = conservative_targets(q, q2, y, rep.partition, rep.sets);
  j["r_safe"] = safe;
  j["r_safe_window"] = safe.empty() ? json(nullptr) : window_json(safe_window(q, q2, y, safe));

  const fs::path dir(a.out_dir);
  io::write_text(dir / "exchange.csv", csv);
  io::write_text(dir / "window.json", fmt::json(j));
}

// -- mainstay --------------------------------------------------------------

struct MainstayArgs {
  Inputs in;
  std::vector<std::size_t> classes;
  std::optional<std::size_t> top_k;
  std::string out;
};

inline void run_mainstay(const MainstayArgs& a) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  if (a.classes.empty() == !a.top_k) throw ArgumentError("mainstay needs exactly one of --class or --top-k");
  require_file(a.in.llm, "llm");
  require_file(a.in.slm, "slm");
  require_file(a.in.labels, "labels");
  const DistributionMatrix q = read_distributions(a.in.llm);
  const DistributionMatrix q2 = read_distributions(a.in.slm);
  const LabelVector y = read_labels(a.in.labels);
  check_same_shape(q, q2);
  check_paired(q, y);
  const std::vector<std::size_t> classes = a.top_k ? frequent_classes(y, q.vocab_size(), *a.top_k) : a.classes;
  for (std::size_t h : classes)
    if (h >= q.vocab_size()) throw ArgumentError("class " + std::to_string(h) + " outside vocabulary");

  json list = json::array();
  for (std::size_t h : classes) {
    try {
      list.push_back(mainstay_json(mainstay_report(q, q2, y, h)));
    } catch (const ArgumentError& e) {
      list.push_back({{"h", h}, {"undefined", e.message()}});
    }
  }
  json j;
  j["classes"] = list;
  io::write_text(a.out, fmt::json(j));
}

// -- simmatrix -------------------------------------------------------------

struct SimArgs {
  std::string embeddings;
  std::size_t chunk = 256;
  std::string matrix;
  std::size_t column = 0;
  std::string out;
};

inline void run_sim_build(const SimArgs& a) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  require_file(a.embeddings, "embeddings");
  write_packed(build_sim_matrix(read_embeddings(a.embeddings), a.chunk), a.out);
}

inline void run_sim_column(const SimArgs& a) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  require_file(a.matrix, "matrix");
  const PackedSimMatrix m = read_packed(a.matrix);
  const auto col = m.sim_column(a.column);
  std::string csv = "class,similarity\n";
  for (std::size_t i = 0; i < col.size(); ++i) csv += std::to_string(i) + ',' + fmt::real(col[i]) + '\n';
  io::write_text(a.out, csv);
}

// -- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string kind = "random";
  SynthSpec spec;
  std::string out_dir;
};

inline void run_synth(const SynthArgs& a) {
  prepare_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  SynthInstance inst;
  json j;
  j["kind"] = a.kind;
  j["seed"] = a.spec.seed;
  if (a.kind == "random") {
    inst = generate(a.spec);
  } else {
    const TheoremKind kind = parse_theorem_kind(a.kind);
    inst = construct_theorem_instance(kind, a.spec.seed);
    const Expectation& e = inst.expected;
    if (e.best_delta_acc) j["expected_best_delta_acc"] = *e.best_delta_acc;
    if (e.ratio) j["ratio"] = *e.ratio;
    if (kind == TheoremKind::mainstay)
      j["mainstay"] = {{"h", e.h}, {"n", e.n}, {"m", e.m}, {"primary_correct", e.primary_correct},
                       {"secondary_correct", e.secondary_correct}};
    if (e.r_size) j["R"] = e.r_size;
  }
  const auto& p = inst.ground_truth_partition;
  j["sizes"] = {{"S", inst.labels.n_samples()}, {"T", p.t_set.size()}, {"F", p.f_set.size()}, {"N", p.n_set.size()}};
  j["vocab_size"] = inst.q.vocab_size();

  write_distributions(inst.q, dir / "llm.arlg");
  write_distributions(inst.q2, dir / "slm.arlg");
  write_labels(inst.labels, dir / "labels.arlb");
  for (std::size_t h = 0; h < inst.models.size(); ++h)
    write_distributions(inst.models[h], dir / ("model" + std::to_string(h) + ".arlg"));
  io::write_text(dir / "instance.json", fmt::json(j));
}

// -- metrics ---------------------------------------------------------------

struct MetricsArgs {
  std::string pred, labels, baseline;
  std::string metric = "acc";
  std::size_t total_chars = 0;
  std::string out;
};

inline MetricValue evaluate(const DistributionMatrix& m, const LabelVector& y, MetricKind kind, std::size_t chars) {
  switch (kind) {
    case MetricKind::acc: return accuracy(m, y);
    case MetricKind::ppl: return perplexity(to_probabilities(m), y);
    case MetricKind::bpc: return bits_per_char(to_probabilities(m), y, chars);
  }
  throw ArgumentError("unknown metric");
}

inline void run_metrics(const MetricsArgs& a) {
  if (a.out.empty()) throw ArgumentError("missing --out");
  const MetricKind kind = parse_metric_kind(a.metric);
  if (kind == MetricKind::bpc && a.total_chars == 0) throw ArgumentError("--metric bpc needs --total-chars");
  require_file(a.pred, "pred");
  require_file(a.labels, "labels");
  if (!a.baseline.empty()) require_file(a.baseline, "baseline");
  const DistributionMatrix m = read_distributions(a.pred);
  const LabelVector y = read_labels(a.labels);
  const MetricValue v = evaluate(m, y, kind, a.total_chars);
  json j = metric_json(v);
  j["n_samples"] = v.n_samples;
  j["distinct_argmax"] = vocab_coverage_report(m);
  if (!a.baseline.empty()) {
    const MetricValue b = evaluate(read_distributions(a.baseline), y, kind, a.total_chars);
    j["baseline"] = fmt::json_real(b.value);
    j["improvement_pct"] = fmt::json_real(improvement_pct(b, v));
  }
  io::write_text(a.out, fmt::json(j));
}

}  // namespace detail

/// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& err = std::cerr, std::ostream& out = std::cout) {
  CLI::App app{"Accept-reject fusion of model output distributions", "arfuse"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "worker threads (default: AR_FUSE_THREADS or 1)")->check(CLI::PositiveNumber);

  detail::FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "fuse two or more models into one ARLG file");
  detail::add_pair_options(c_fuse, fuse.in, false);
  c_fuse->add_option("--w", fuse.w, "primary weight in (0, 1]");
  c_fuse->add_option("--models", fuse.models, "model files ordered worst to best")->delimiter(',');
  c_fuse->add_option("--ratio", fuse.ratio, "common ratio of the geometric weights");
  c_fuse->add_option("--sim", fuse.sim, "packed similarity matrix (ARSM)");
  c_fuse->add_option("--p", fuse.p, "similarity power (default 1)");
  c_fuse->add_option("--out", fuse.out, "output ARLG path");

  detail::SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "metric against primary weight");
  detail::add_pair_options(c_sweep, sw.in, true);
  c_sweep->add_option("--metric", sw.metric, "acc, ppl or bpc");
  c_sweep->add_option("--total-chars", sw.total_chars, "character count for bpc");
  c_sweep->add_option("--grid", sw.grid, "default | linear:LO:HI:STEP | beta:LO:HI:COUNT | list:W1,W2,...");
  c_sweep->add_option("--out-dir", sw.out_dir, "directory for sweep.csv, sweep.json, sweep.svg");

  detail::ExchangeArgs ex;
  auto* c_ex = app.add_subcommand("exchange", "per-sample exchange thresholds and safe window");
  detail::add_pair_options(c_ex, ex.in, true);
  c_ex->add_option("--out-dir", ex.out_dir, "directory for exchange.csv and window.json");

  detail::MainstayArgs ms;
  auto* c_ms = app.add_subcommand("mainstay", "frequency/precision report per class");
  detail::add_pair_options(c_ms, ms.in, true);
  c_ms->add_option("--class", ms.classes, "class index (repeatable)");
  c_ms->add_option("--top-k", ms.top_k, "the K most frequent label classes");
  c_ms->add_option("--out", ms.out, "output JSON path");

  detail::SimArgs sim;
  auto* c_sim = app.add_subcommand("simmatrix", "quantized similarity matrix");
  c_sim->require_subcommand(1);
  auto* c_build = c_sim->add_subcommand("build", "build from an embedding matrix (AREM)");
  c_build->add_option("--embeddings", sim.embeddings, "embedding matrix (AREM)");
  c_build->add_option("--chunk", sim.chunk, "chunk size")->check(CLI::PositiveNumber);
  c_build->add_option("--out", sim.out, "output ARSM path");
  auto* c_col = c_sim->add_subcommand("column", "dump one similarity column as CSV");
  c_col->add_option("--matrix", sim.matrix, "packed similarity matrix (ARSM)");
  c_col->add_option("--class", sim.column, "column class index");
  c_col->add_option("--out", sim.out, "output CSV path");

  detail::SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic instance");
  c_synth->add_option("--kind", sy.kind,
                      "random, mainstay, improvement, max_improvement, weight_variation, variant_A32, multi_model, "
                      "no_exchange");
  c_synth->add_option("--seed", sy.spec.seed);
  c_synth->add_option("--n", sy.spec.n_samples);
  c_synth->add_option("--vocab", sy.spec.vocab_size);
  c_synth->add_option("--zipf", sy.spec.zipf_exponent);
  c_synth->add_option("--tail-skill", sy.spec.lm_tail_skill);
  c_synth->add_option("--head-bias", sy.spec.sm_head_bias);
  c_synth->add_option("--head-penalty", sy.spec.lm_head_penalty);
  c_synth->add_option("--skill-ratio", sy.spec.sm_skill_ratio);
  c_synth->add_option("--out-dir", sy.out_dir, "output directory");

  detail::MetricsArgs me;
  auto* c_me = app.add_subcommand("metrics", "evaluate one distribution file");
  c_me->add_option("--pred", me.pred, "distributions (ARLG)");
  c_me->add_option("--labels", me.labels, "labels (ARLB)");
  c_me->add_option("--metric", me.metric, "acc, ppl or bpc");
  c_me->add_option("--total-chars", me.total_chars, "character count for bpc");
  c_me->add_option("--baseline", me.baseline, "optional baseline distributions for improvement_pct");
  c_me->add_option("--out", me.out, "output JSON path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "arfuse: " << e.what() << '\n';
    return 2;
  }

  try {
    parallel::set_threads(threads.value_or(parallel::env_threads()));
    if (*c_fuse) detail::run_fuse(fuse);
    else if (*c_sweep) detail::run_sweep(sw);
    else if (*c_ex) detail::run_exchange(ex);
    else if (*c_ms) detail::run_mainstay(ms);
    else if (*c_build) detail::run_sim_build(sim);
    else if (*c_col) detail::run_sim_column(sim);
    else if (*c_synth) detail::run_synth(sy);
    else if (*c_me) detail::run_metrics(me);
  } catch (const Error& e) {
    err << "arfuse: " << e.what() << '\n';
    return e.kind() == ErrorKind::argument ? 2 : 1;
  } catch (const std::exception& e) {
    err << "arfuse: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace arfuse::cli
