#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpinfer/csv.hpp"
#include "cpinfer/pls.hpp"
#include "cpinfer/report.hpp"
#include "cpinfer/simbench.hpp"

namespace cpinfer::cli {

/// Exit codes: 0 ok, 1 error, 2 no interval produced (no change detected,
/// or a change that could not be located).
enum exit_code : int { ok = 0, failure = 1, no_change = 2 };

struct RunConfig {
  std::string subcommand;
  std::string input;   // "-" reads standard input
  std::string output;  // empty writes to standard output
  bool has_header = false;
  double alpha = 0.05;
  std::optional<double> lambda;
  std::optional<double> gamma;
  double tau_init = 0.5;
  bool gamma_off = false;
  bool center = true;
  bool mad_scale = false;
  bool fixed_lambda_in_gamma_bic = false;
  std::optional<double> critical_value;
  bool diagnostics = false;
  SimConfig sim;
  QuantileSettings quantile;
  Vec alphas{0.05};
  std::string cache;
  bool no_cache = false;
  std::string csv_out;
  bool records = true;
  unsigned workers = 0;
  Vec tau_inits;
  std::uint64_t rep = 0;
};

struct CommandOutput {
  json report;
  int exit_code = ok;
};

/// $CPINFER_CACHE, else $XDG_CACHE_HOME/cpinfer/quantiles.txt, else
/// ~/.cache/cpinfer/quantiles.txt; empty when none of these is set.
inline std::filesystem::path default_cache_path() {
  if (const char* p = std::getenv("CPINFER_CACHE"); p && *p) return p;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) {
    return std::filesystem::path(x) / "cpinfer" / "quantiles.txt";
  }
  if (const char* h = std::getenv("HOME"); h && *h) {
    return std::filesystem::path(h) / ".cache" / "cpinfer" / "quantiles.txt";
  }
  return {};
}

inline std::filesystem::path cache_path(const RunConfig& cfg) {
  if (cfg.no_cache) return {};
  if (!cfg.cache.empty()) return cfg.cache;
  return default_cache_path();
}

inline QuantileSettings quantile_settings(const RunConfig& cfg) {
  QuantileSettings q = cfg.quantile;
  q.workers = cfg.workers;
  return q;
}

inline TuningConfig tuning(const RunConfig& cfg) {
  TuningConfig t;
  t.lambda = cfg.lambda;
  t.gamma = cfg.gamma;
  t.scale_by_mad = cfg.mad_scale;
  t.retune_lambda_for_gamma = !cfg.fixed_lambda_in_gamma_bic;
  return t;
}

inline PipelineOptions pipeline_options(const RunConfig& cfg, Stage stage) {
  PipelineOptions opt;
  opt.tuning = tuning(cfg);
  opt.tau_init = cfg.tau_init;
  opt.gamma_off = cfg.gamma_off;
  opt.stage = stage;
  opt.alpha = cfg.alpha;
  opt.critical_value = cfg.critical_value;
  opt.quantile = quantile_settings(cfg);
  opt.quantile_cache = cache_path(cfg);
  opt.center = cfg.center;
  return opt;
}

inline SimConfig sim_config(const RunConfig& cfg) {
  SimConfig s = cfg.sim;
  s.alpha = cfg.alpha;
  s.tau_init = cfg.tau_init;
  s.gamma_off = cfg.gamma_off;
  s.tuning = tuning(cfg);
  s.critical_value = cfg.critical_value;
  s.quantile = quantile_settings(cfg);
  s.quantile_cache = cache_path(cfg);
  s.workers = cfg.workers;
  return s;
}

inline TimeSeries load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) throw error(errc::invalid_argument, "--input is required");
  if (cfg.input == "-") return read_csv(std::cin, cfg.has_header, "<stdin>");
  return read_csv(std::filesystem::path(cfg.input), cfg.has_header);
}

inline CommandOutput cmd_pipeline(const RunConfig& cfg, const TimeSeries& y, Stage stage) {
  const PipelineResult r = full_pipeline(y, pipeline_options(cfg, stage));
  const char* name = stage == Stage::detect ? "detect" : stage == Stage::estimate ? "estimate" : "infer";
  CommandOutput out{pipeline_json(name, r, cfg.diagnostics), ok};
  if (stage == Stage::infer && !r.inference) out.exit_code = no_change;
  return out;
}

inline CommandOutput cmd_detect(const RunConfig& cfg) { return cmd_pipeline(cfg, load_input(cfg), Stage::detect); }
inline CommandOutput cmd_estimate(const RunConfig& cfg) { return cmd_pipeline(cfg, load_input(cfg), Stage::estimate); }
inline CommandOutput cmd_infer(const RunConfig& cfg) { return cmd_pipeline(cfg, load_input(cfg), Stage::infer); }

inline CommandOutput cmd_simulate(const RunConfig& cfg) {
  const MetricsReport m = run_monte_carlo(sim_config(cfg));
  if (!cfg.csv_out.empty()) {
    std::ofstream f(cfg.csv_out, std::ios::trunc);
    if (!f) throw error(errc::io, "cannot write " + cfg.csv_out);
    write_records_csv(f, m.per_rep_records);
  }
  return {metrics_json(m, cfg.records), ok};
}

inline CommandOutput cmd_quantile(const RunConfig& cfg) {
  const QuantileSettings s = quantile_settings(cfg);
  s.validate();
  const auto path = cache_path(cfg);
  Vec alphas = cfg.alphas;
  for (double a : alphas) check_alpha(a);
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

  if (!path.empty()) {
    const auto cache = QuantileCache::load(path);
    json rows = json::array();
    Vec hits;
    for (double a : alphas) {
      if (auto c = cache.find(a, s)) hits.push_back(*c);
    }
    if (hits.size() == alphas.size()) {
      json j = detail::header("quantile");
      j["settings"] = quantile_settings_json(s);
      for (std::size_t i = 0; i < alphas.size(); ++i) rows.push_back({{"alpha", alphas[i]}, {"c_alpha", hits[i]}});
      j["table"] = std::move(rows);
      if (alphas.size() == 1) {
        j["alpha"] = alphas.front();
        j["c_alpha"] = hits.front();
      }
      j["cached"] = true;
      return {j, ok};
    }
  }
  const QuantileTable t = quantile_table(alphas, s);
  if (!path.empty()) {
    auto cache = QuantileCache::load(path);
    for (std::size_t i = 0; i < t.alphas.size(); ++i) cache.insert(t.alphas[i], s, t.critical_values[i]);
    cache.save(path);
  }
  json j = quantile_json(t);
  j["cached"] = false;
  return {j, ok};
}

inline CommandOutput cmd_sweep(const RunConfig& cfg) {
  const SimConfig s = sim_config(cfg);
  s.validate();
  Vec inits = cfg.tau_inits;
  if (inits.empty()) {
    for (int i = 15; i <= 85; i += 5) inits.push_back(i / 100.0);
  }
  const auto rows = initializer_sweep(s, inits, cfg.rep);
  if (!cfg.csv_out.empty()) {
    std::ofstream f(cfg.csv_out, std::ios::trunc);
    if (!f) throw error(errc::io, "cannot write " + cfg.csv_out);
    write_sweep_csv(f, rows);
  }
  return {sweep_json(s, cfg.rep, rows), ok};
}

/// Writes one simulated dataset as CSV to --csv-out.
inline CommandOutput cmd_generate(const RunConfig& cfg) {
  const SimConfig s = sim_config(cfg);
  const Dataset d = gen_dataset(s, cfg.rep);
  const std::string path = cfg.csv_out;
  if (path.empty()) throw error(errc::invalid_argument, "generate needs --csv-out");
  write_csv(std::filesystem::path(path), d.y);
  json j = detail::header("generate");
  j["config"] = config_json(s);
  j["rep"] = cfg.rep;
  j["k0"] = d.k0;
  j["path"] = path;
  return {j, ok};
}

inline CommandOutput dispatch(const RunConfig& cfg) {
  if (cfg.subcommand == "detect") return cmd_detect(cfg);
  if (cfg.subcommand == "estimate") return cmd_estimate(cfg);
  if (cfg.subcommand == "infer") return cmd_infer(cfg);
  if (cfg.subcommand == "simulate") return cmd_simulate(cfg);
  if (cfg.subcommand == "quantile") return cmd_quantile(cfg);
  if (cfg.subcommand == "sweep") return cmd_sweep(cfg);
  if (cfg.subcommand == "generate") return cmd_generate(cfg);
  throw error(errc::invalid_argument, "unknown subcommand '" + cfg.subcommand + "'");
}

namespace detail {

struct OptionalSlots {
  double lambda = 0.0, gamma = 0.0, critical_value = 0.0;
  std::vector<CLI::Option*> lambda_opts, gamma_opts, critical_opts;

  void apply(RunConfig& cfg) const {
    auto any = [](const std::vector<CLI::Option*>& v) {
      for (auto* o : v) {
        if (o->count() > 0) return true;
      }
      return false;
    };
    if (any(lambda_opts)) cfg.lambda = lambda;
    if (any(gamma_opts)) cfg.gamma = gamma;
    if (any(critical_opts)) cfg.critical_value = critical_value;
  }
};

}  // namespace detail

/// Parses argv into a RunConfig. Returns nullopt and sets `code` when the
/// parser handled the request itself (help) or rejected it.
inline std::optional<RunConfig> parse(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                                      int& code) {
  RunConfig cfg;
  detail::OptionalSlots slots;
  std::string estimator = "al1_pls";
  std::string noise = "ar1";

  CLI::App app{"High-dimensional single change point detection, estimation and inference"};
  app.name("cpinfer");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto tuning_opts = [&](CLI::App* s) {
    slots.lambda_opts.push_back(s->add_option("--lambda", slots.lambda, "Fixed soft-threshold level")->check(CLI::NonNegativeNumber));
    slots.gamma_opts.push_back(s->add_option("--gamma", slots.gamma, "Fixed detection penalty")->check(CLI::NonNegativeNumber));
    s->add_option("--tau-init", cfg.tau_init, "Initializer fraction in (0,1)")->capture_default_str();
    s->add_flag("--gamma-off", cfg.gamma_off, "Set gamma = 0 so a change is always reported");
    s->add_flag("--mad-scale", cfg.mad_scale, "Rescale the lambda grid by the MAD of the data");
    s->add_flag("--gamma-bic-fixed-lambda", cfg.fixed_lambda_in_gamma_bic,
                "In BIC(gamma) keep the Step 0 lambda instead of re-selecting it per partition");
  };
  auto quantile_opts = [&](CLI::App* s, const char* seed_flag) {
    s->add_option("--paths", cfg.quantile.paths, "Monte Carlo paths for c_alpha")->capture_default_str();
    s->add_option("--grid-R", cfg.quantile.grid_half_width, "Half width of the simulation grid")->capture_default_str();
    s->add_option("--grid-h", cfg.quantile.grid_step, "Grid step")->capture_default_str();
    s->add_option("--cutoff", cfg.quantile.tail_cutoff, "Early-stop margin of each half path")->capture_default_str();
    s->add_option(seed_flag, cfg.quantile.seed, "Seed of the quantile simulation")->capture_default_str();
    s->add_option("--cache", cfg.cache, "Quantile cache file (default: user cache directory)");
    s->add_flag("--no-cache", cfg.no_cache, "Do not read or write the quantile cache");
  };
  auto common = [&](CLI::App* s) {
    s->add_option("--output,-o", cfg.output, "Write the JSON report here instead of stdout");
    s->add_option("--workers", cfg.workers, "Worker threads (0 = hardware concurrency)");
  };
  auto alpha_opt = [&](CLI::App* s) {
    s->add_option("--alpha", cfg.alpha, "Confidence level alpha")->capture_default_str();
    slots.critical_opts.push_back(
        s->add_option("--critical-value", slots.critical_value, "Use this c_alpha instead of simulating it")
            ->check(CLI::PositiveNumber));
  };
  auto data_opts = [&](CLI::App* s) {
    s->add_option("--input,-i", cfg.input, "CSV file of T rows and p columns ('-' for stdin)")->required();
    s->add_flag("--header,!--no-header", cfg.has_header, "First row is a header");
    s->add_flag("--center,!--no-center", cfg.center, "Subtract column means first (default on)");
    s->add_flag("--diagnostics", cfg.diagnostics, "Add supports, profiles and initializer distances");
  };
  auto design_opts = [&](CLI::App* s) {
    s->add_option("--T", cfg.sim.T, "Sample size")->capture_default_str();
    s->add_option("--p", cfg.sim.p, "Dimension")->capture_default_str();
    s->add_option("--s", cfg.sim.s, "Sparsity of each mean")->capture_default_str();
    s->add_option("--tau0", cfg.sim.tau0, "True change fraction (1 = no change)")->capture_default_str();
    s->add_option("--rho", cfg.sim.rho, "AR(1) noise correlation")->capture_default_str();
    s->add_option("--seed", cfg.sim.seed, "Data seed")->capture_default_str();
    s->add_option("--noise-scale", cfg.sim.noise_scale, "Noise multiplier (0 = noiseless)")->capture_default_str();
    s->add_option("--noise", noise, "Noise generator")->check(CLI::IsMember({"ar1", "dense"}))->capture_default_str();
    s->add_flag("--center,!--no-center", cfg.sim.center, "Center each replication before estimation (default off)");
  };

  for (const char* name : {"detect", "estimate", "infer"}) {
    const std::string n = name;
    CLI::App* s = app.add_subcommand(
        n, n == "detect"     ? "Detect a change with BIC-tuned lambda and gamma"
           : n == "estimate" ? "Detect, then locate the change by projected least squares"
                             : "Detect, locate and build a confidence interval");
    data_opts(s);
    tuning_opts(s);
    common(s);
    if (n == "infer") {
      alpha_opt(s);
      quantile_opts(s, "--quantile-seed");
    }
  }
  {
    CLI::App* s = app.add_subcommand("simulate", "Monte Carlo study of the simulation design");
    design_opts(s);
    s->add_option("--reps", cfg.sim.reps, "Replications")->capture_default_str();
    s->add_option("--estimator", estimator, "al1, al1_pls or al1_pls_ci")
        ->check(CLI::IsMember({"al1", "al1_pls", "al1_pls_ci"}))
        ->capture_default_str();
    s->add_flag("--records,!--no-records", cfg.records, "Include per-replication records");
    s->add_option("--csv-out", cfg.csv_out, "Also write per-replication records as CSV");
    tuning_opts(s);
    alpha_opt(s);
    quantile_opts(s, "--quantile-seed");
    common(s);
  }
  {
    CLI::App* s = app.add_subcommand("quantile", "Critical values of argmin(|v| - 2W(v))");
    s->add_option("--alpha", cfg.alphas, "One or more levels")->capture_default_str();
    quantile_opts(s, "--seed");
    common(s);
  }
  {
    CLI::App* s = app.add_subcommand("sweep", "Detection on one dataset across initializers");
    design_opts(s);
    s->add_option("--rep", cfg.rep, "Replication index of the dataset")->capture_default_str();
    s->add_option("--tau-inits", cfg.tau_inits, "Initializers (default 0.15, 0.20, ..., 0.85)");
    s->add_option("--csv-out", cfg.csv_out, "Also write the table as CSV");
    tuning_opts(s);
    common(s);
  }
  {
    CLI::App* s = app.add_subcommand("generate", "Write one simulated dataset as CSV");
    design_opts(s);
    s->add_option("--rep", cfg.rep, "Replication index")->capture_default_str();
    s->add_option("--csv-out", cfg.csv_out, "Destination CSV")->required();
    common(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      code = app.exit(e, out, err);
      return std::nullopt;
    }
    err << error_json("usage", e.what()).dump() << '\n';
    code = failure;
    return std::nullopt;
  }
  for (CLI::App* s : app.get_subcommands()) cfg.subcommand = s->get_name();
  slots.apply(cfg);
  cfg.sim.estimator = estimator == "al1"      ? EstimatorKind::al1
                      : estimator == "al1_pls" ? EstimatorKind::al1_pls
                                               : EstimatorKind::al1_pls_ci;
  cfg.sim.noise = noise == "dense" ? NoiseModel::dense : NoiseModel::ar1;
  return cfg;
}

inline void emit(const RunConfig& cfg, const json& report, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (cfg.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(cfg.output, std::ios::trunc);
  if (!f) throw error(errc::io, "cannot write " + cfg.output);
  f << text;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  int code = ok;
  const auto cfg = parse(argc, argv, out, err, code);
  if (!cfg) return code;
  try {
    const CommandOutput r = dispatch(*cfg);
    emit(*cfg, r.report, out);
    return r.exit_code;
  } catch (const error& e) {
    err << error_json(to_string(e.code()), e.what()).dump() << '\n';
  } catch (const std::exception& e) {
    err << error_json("internal", e.what()).dump() << '\n';
  }
  return failure;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cpinfer"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cpinfer::cli
