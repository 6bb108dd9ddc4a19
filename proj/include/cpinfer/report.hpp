#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cpinfer/csv.hpp"
#include "cpinfer/infer.hpp"
#include "cpinfer/pls.hpp"
#include "cpinfer/simbench.hpp"

namespace cpinfer {

using json = nlohmann::ordered_json;

inline constexpr std::string_view schema_version = "cpinfer/1";

namespace detail {

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json pair_json(const std::pair<double, double>& p) { return json::array({p.first, p.second}); }

inline json location_json(const LocationMetrics& m) {
  return {{"n", m.n}, {"bias", m.bias}, {"rmse", m.rmse}, {"bias_x100", 100.0 * m.bias}, {"rmse_x100", 100.0 * m.rmse}};
}

inline json header(std::string_view command) {
  return {{"schema", schema_version}, {"command", command}};
}

}  // namespace detail

inline json error_json(std::string_view code, std::string_view message) {
  return {{"schema", schema_version}, {"error", {{"code", code}, {"message", message}}}};
}

/// Report of detect / estimate / infer. Sections appear as far as the
/// pipeline got; `diagnostics` adds supports, profiles and the initializer
/// distance to the sample boundary.
inline json pipeline_json(std::string_view command, const PipelineResult& r, bool diagnostics = false) {
  const DetectionResult& d = r.detection;
  const std::size_t T = d.estimate.T;
  json j = detail::header(command);
  j["status"] = to_string(r.status);
  j["T"] = T;
  j["p"] = d.step0_means.dim();
  j["changed"] = d.changed;
  j["k_hat"] = d.estimate.k;
  j["tau_hat"] = d.estimate.tau;
  j["lambda"] = d.lambda_used;
  j["gamma"] = d.gamma_used;
  if (r.lambda_refined) j["lambda_refined"] = *r.lambda_refined;
  if (r.pls) {
    j["k_tilde"] = r.pls->estimate.k;
    j["tau_tilde"] = r.pls->estimate.tau;
  }
  if (r.pls && command == "infer") j["inference_degenerate"] = r.inference_degenerate;
  if (r.inference) {
    const InferenceResult& inf = *r.inference;
    j["xi_sq"] = inf.xi_sq_hat;
    j["sigma_sq"] = inf.sigma_sq_hat;
    j["se"] = inf.sigma_sq_hat / inf.xi_sq_hat;
    j["c_alpha"] = inf.c_alpha;
    j["alpha"] = inf.alpha;
    j["ci_int"] = detail::pair_json(inf.interval_int);
    j["ci_frac"] = detail::pair_json(inf.interval_frac);
    j["ci_rounded"] = json::array({inf.interval_rounded.first, inf.interval_rounded.second});
  }
  if (diagnostics) {
    json g;
    g["init_k"] = d.init_k;
    g["init_distance_to_boundary"] = std::min(d.init_k, T - d.init_k);
    g["lambda_grid_scale"] = r.lambda_grid_scale;
    g["step0_support1"] = d.step0_means.support1;
    g["step0_support2"] = d.step0_means.support2;
    g["objective_profile"] = d.objective_profile;
    if (r.refined_means) {
      g["refined_support1"] = r.refined_means->support1;
      g["refined_support2"] = r.refined_means->support2;
      g["jump_size"] = r.refined_means->jump_size();
    }
    if (r.pls) {
      g["theta1"] = r.pls->theta1;
      g["theta2"] = r.pls->theta2;
      g["pls_profile"] = r.pls->loss_profile;
    }
    j["diagnostics"] = std::move(g);
  }
  return j;
}

inline json config_json(const SimConfig& c) {
  return {{"T", c.T},
          {"p", c.p},
          {"s", c.s},
          {"tau0", c.tau0},
          {"k0", c.true_index()},
          {"rho", c.rho},
          {"reps", c.reps},
          {"seed", c.seed},
          {"alpha", c.alpha},
          {"tau_init", c.tau_init},
          {"gamma_off", c.gamma_off},
          {"estimator", to_string(c.estimator)},
          {"noise_scale", c.noise_scale},
          {"noise", c.noise == NoiseModel::ar1 ? "ar1" : "dense"},
          {"center", c.center},
          {"lambda", detail::optional_json(c.tuning.lambda)},
          {"gamma", detail::optional_json(c.tuning.gamma)},
          {"retune_lambda_for_gamma", c.tuning.retune_lambda_for_gamma}};
}

inline json record_json(const RepRecord& r) {
  json j = {{"rep", r.rep},
            {"k0", r.k0},
            {"changed", r.changed},
            {"k_hat", r.k_hat},
            {"lambda", r.lambda},
            {"gamma", r.gamma},
            {"status", r.status},
            {"k_tilde", detail::optional_json(r.k_tilde)},
            {"xi_sq", detail::optional_json(r.xi_sq)},
            {"sigma_sq", detail::optional_json(r.sigma_sq)},
            {"ci_frac", r.ci_frac ? detail::pair_json(*r.ci_frac) : json(nullptr)},
            {"covered", detail::optional_json(r.covered)}};
  if (!r.plugin_k.empty()) {
    json k = json::array();
    for (const auto& v : r.plugin_k) k.push_back(detail::optional_json(v));
    j["plugin_k"] = std::move(k);
  }
  return j;
}

inline json metrics_json(const MetricsReport& m, bool records = true) {
  json j = detail::header("simulate");
  j["config"] = config_json(m.config);
  json s;
  s["reps_used"] = m.reps_used;
  s["tpr"] = detail::optional_json(m.tpr);
  s["tnr"] = detail::optional_json(m.tnr);
  s["al1"] = detail::location_json(m.al1);
  s["al1_all"] = detail::location_json(m.al1_all);
  s["pls"] = m.pls ? detail::location_json(*m.pls) : json(nullptr);
  s["pls_all"] = m.pls_all ? detail::location_json(*m.pls_all) : json(nullptr);
  s["coverage"] = detail::optional_json(m.coverage);
  s["se_mean"] = detail::optional_json(m.se_mean);
  s["critical_value"] = detail::optional_json(m.critical_value);
  s["n_intervals"] = m.n_intervals;
  s["n_unlocatable"] = m.n_unlocatable;
  s["n_degenerate_inference"] = m.n_degenerate_inference;
  json plugins = json::object();
  for (const auto& [name, loc] : m.plugins) plugins[name] = detail::location_json(loc);
  s["plugins"] = std::move(plugins);
  j["metrics"] = std::move(s);
  if (records) {
    json rs = json::array();
    for (const RepRecord& r : m.per_rep_records) rs.push_back(record_json(r));
    j["records"] = std::move(rs);
  }
  return j;
}

/// One row per replication; empty cells where a stage was not reached.
inline void write_records_csv(std::ostream& out, const std::vector<RepRecord>& records) {
  out << "rep,k0,changed,k_hat,lambda,gamma,status,k_tilde,xi_sq,sigma_sq,ci_lo,ci_hi,covered\n";
  auto num = [](const std::optional<double>& v) { return v ? detail::shortest(*v) : std::string(); };
  for (const RepRecord& r : records) {
    out << r.rep << ',' << r.k0 << ',' << (r.changed ? 1 : 0) << ',' << r.k_hat << ',' << detail::shortest(r.lambda)
        << ',' << detail::shortest(r.gamma) << ',' << r.status << ','
        << (r.k_tilde ? std::to_string(*r.k_tilde) : std::string()) << ',' << num(r.xi_sq) << ','
        << num(r.sigma_sq) << ',' << (r.ci_frac ? detail::shortest(r.ci_frac->first) : std::string()) << ','
        << (r.ci_frac ? detail::shortest(r.ci_frac->second) : std::string()) << ','
        << (r.covered ? (*r.covered ? "1" : "0") : "") << '\n';
  }
}

inline json quantile_settings_json(const QuantileSettings& s) {
  return {{"R", s.grid_half_width}, {"h", s.grid_step}, {"paths", s.paths}, {"seed", s.seed},
          {"tail_cutoff", s.tail_cutoff}};
}

inline json quantile_json(const QuantileTable& t) {
  json j = detail::header("quantile");
  j["settings"] = quantile_settings_json(t.settings);
  json rows = json::array();
  for (std::size_t i = 0; i < t.alphas.size(); ++i) {
    rows.push_back({{"alpha", t.alphas[i]}, {"c_alpha", t.critical_values[i]}});
  }
  j["table"] = std::move(rows);
  if (t.alphas.size() == 1) {
    j["alpha"] = t.alphas.front();
    j["c_alpha"] = t.critical_values.front();
  }
  j["median"] = t.median;
  j["median_band"] = detail::pair_json(t.median_band);
  j["median_symmetric"] = t.median_symmetric();
  return j;
}

inline json sweep_json(const SimConfig& cfg, std::uint64_t rep, const std::vector<SweepRow>& rows) {
  json j = detail::header("sweep");
  j["config"] = config_json(cfg);
  j["rep"] = rep;
  json rs = json::array();
  std::size_t lo = cfg.T, hi = 0;
  for (const SweepRow& r : rows) {
    rs.push_back({{"tau_init", r.tau_init},
                  {"changed", r.changed},
                  {"k_hat", r.k_hat},
                  {"tau_hat", r.tau_hat},
                  {"lambda", r.lambda},
                  {"gamma", r.gamma}});
    lo = std::min(lo, r.k_hat);
    hi = std::max(hi, r.k_hat);
  }
  j["rows"] = std::move(rs);
  j["spread"] = rows.empty() ? 0 : hi - lo;
  return j;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "tau_init,changed,k_hat,tau_hat,lambda,gamma\n";
  for (const SweepRow& r : rows) {
    out << detail::shortest(r.tau_init) << ',' << (r.changed ? 1 : 0) << ',' << r.k_hat << ','
        << detail::shortest(r.tau_hat) << ',' << detail::shortest(r.lambda) << ',' << detail::shortest(r.gamma)
        << '\n';
  }
}

}  // namespace cpinfer
