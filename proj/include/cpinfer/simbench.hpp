#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/random/normal_distribution.hpp>

#include "cpinfer/core.hpp"
#include "cpinfer/infer.hpp"
#include "cpinfer/parallel.hpp"
#include "cpinfer/pls.hpp"

namespace cpinfer {

enum class EstimatorKind { al1, al1_pls, al1_pls_ci };

constexpr const char* to_string(EstimatorKind e) noexcept {
  switch (e) {
    case EstimatorKind::al1: return "al1";
    case EstimatorKind::al1_pls: return "al1_pls";
    case EstimatorKind::al1_pls_ci: return "al1_pls_ci";
  }
  return "unknown";
}

enum class NoiseModel { ar1, dense };

/// Simulation design: mu1 = (1_s, 0), mu2 = (0_s, 1_s, 0), noise N(0, Sigma)
/// with Sigma_ij = rho^|i-j|. tau0 = 1 is the no-change design.
struct SimConfig {
  std::size_t T = 350;
  std::size_t p = 500;
  std::size_t s = 5;
  double tau0 = 0.2;
  double rho = 0.5;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double tau_init = 0.5;
  bool gamma_off = false;
  EstimatorKind estimator = EstimatorKind::al1_pls;
  /// Multiplies the noise; 0 gives noiseless data.
  double noise_scale = 1.0;
  NoiseModel noise = NoiseModel::ar1;
  bool center = false;
  unsigned workers = 0;
  TuningConfig tuning;
  std::optional<double> critical_value;
  QuantileSettings quantile;
  std::filesystem::path quantile_cache;

  void validate() const {
    if (T < 2 || p < 1 || s < 1) throw error(errc::invalid_argument, "design needs T >= 2, p >= 1, s >= 1");
    if (2 * s > p) {
      throw error(errc::invalid_argument, "design needs 2s <= p (s = " + std::to_string(s) +
                                              ", p = " + std::to_string(p) + ")");
    }
    if (!(tau0 > 0.0 && tau0 <= 1.0)) throw error(errc::out_of_range, "tau0 must lie in (0, 1]");
    if (!(std::abs(rho) < 1.0)) throw error(errc::out_of_range, "rho must lie in (-1, 1)");
    if (reps < 1) throw error(errc::invalid_argument, "reps must be positive");
    if (!(noise_scale >= 0.0)) throw error(errc::invalid_argument, "noise scale must be nonnegative");
    if (true_index() < 1) throw error(errc::out_of_range, "tau0 maps to an empty first segment");
    check_alpha(alpha);
    initializer_index(T, tau_init);
    tuning.validate();
  }

  std::size_t true_index() const { return tau0 >= 1.0 ? T : grid_index(T, tau0); }

  Vec mean_before() const {
    Vec m(p, 0.0);
    for (std::size_t j = 0; j < s; ++j) m[j] = 1.0;
    return m;
  }

  Vec mean_after() const {
    Vec m(p, 0.0);
    for (std::size_t j = s; j < 2 * s; ++j) m[j] = 1.0;
    return m;
  }
};

/// e_1 = w_1, e_j = rho e_{j-1} + sqrt(1 - rho^2) w_j: unit marginals and
/// correlation rho^|i-j|.
template <class URBG>
Vec gen_noise_row(std::size_t p, double rho, URBG& gen) {
  boost::random::normal_distribution<double> normal;
  const double innov = std::sqrt(1.0 - rho * rho);
  Vec e(p);
  if (p == 0) return e;
  e[0] = normal(gen);
  for (std::size_t j = 1; j < p; ++j) e[j] = rho * e[j - 1] + innov * normal(gen);
  return e;
}

inline Eigen::MatrixXd ar1_covariance(std::size_t p, double rho) {
  Eigen::MatrixXd cov(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      cov(i, j) = std::pow(rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  return cov;
}

/// Draws N(0, cov) rows through a Cholesky factor.
class DenseGaussian {
 public:
  explicit DenseGaussian(const Eigen::MatrixXd& cov) : chol_(cov) {
    if (chol_.info() != Eigen::Success) {
      throw error(errc::invalid_argument, "covariance is not positive definite");
    }
    lower_ = chol_.matrixL();
  }

  template <class URBG>
  Vec draw(URBG& gen) const {
    boost::random::normal_distribution<double> normal;
    const auto p = lower_.rows();
    Eigen::VectorXd w(p);
    for (Eigen::Index j = 0; j < p; ++j) w(j) = normal(gen);
    const Eigen::VectorXd e = lower_.triangularView<Eigen::Lower>() * w;
    return Vec(e.data(), e.data() + p);
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::MatrixXd lower_;
};

struct Dataset {
  TimeSeries y;
  std::size_t k0;  // T when there is no change
};

inline Dataset gen_dataset(const SimConfig& cfg, std::uint64_t rep_index) {
  cfg.validate();
  Engine gen = substream(cfg.seed, rep_index);
  const std::size_t k0 = cfg.true_index();
  const Vec mu1 = cfg.mean_before(), mu2 = cfg.mean_after();
  std::optional<DenseGaussian> dense;
  if (cfg.noise == NoiseModel::dense) dense.emplace(ar1_covariance(cfg.p, cfg.rho));
  Vec data(cfg.T * cfg.p);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const Vec& mu = t < k0 ? mu1 : mu2;
    Vec e = dense ? dense->draw(gen) : gen_noise_row(cfg.p, cfg.rho, gen);
    for (std::size_t j = 0; j < cfg.p; ++j) data[t * cfg.p + j] = mu[j] + cfg.noise_scale * e[j];
  }
  return {TimeSeries(cfg.T, cfg.p, std::move(data)), k0};
}

/// Extra change-point estimators evaluated alongside the built-in ones. The
/// callback receives the series the pipeline saw and returns a grid index, or nullopt
/// when it declines to locate a change.
struct EstimatorPlugin {
  std::string name;
  std::function<std::optional<std::size_t>(const TimeSeries&)> locate;
};

struct RepRecord {
  std::size_t rep = 0;
  std::size_t k0 = 0;
  bool changed = false;
  std::size_t k_hat = 0;
  double lambda = 0.0;
  double gamma = 0.0;
  std::string status;
  std::optional<std::size_t> k_tilde;
  std::optional<double> xi_sq;
  std::optional<double> sigma_sq;
  std::optional<std::pair<double, double>> ci_frac;
  std::optional<bool> covered;
  std::vector<std::optional<std::size_t>> plugin_k;
};

struct LocationMetrics {
  std::size_t n = 0;
  double bias = 0.0;  // |mean(tau_hat - tau0)|
  double rmse = 0.0;
};

struct MetricsReport {
  SimConfig config;
  std::size_t reps_used = 0;
  std::optional<double> tpr;
  std::optional<double> tnr;
  LocationMetrics al1;      // reps with a detected change
  LocationMetrics al1_all;  // every rep, tau_hat = 1 when no change is detected
  std::optional<LocationMetrics> pls;
  std::optional<LocationMetrics> pls_all;  // falls back to the AL1 estimate
  std::optional<double> coverage;
  std::optional<double> se_mean;
  std::optional<double> critical_value;
  std::size_t n_intervals = 0;
  std::size_t n_unlocatable = 0;
  std::size_t n_degenerate_inference = 0;
  std::vector<std::pair<std::string, LocationMetrics>> plugins;
  std::vector<RepRecord> per_rep_records;
};

namespace detail {

class LocationAccumulator {
 public:
  void add(double tau_hat, double tau0) {
    const double d = tau_hat - tau0;
    sum_ += d;
    sumsq_ += d * d;
    ++n_;
  }

  LocationMetrics finish() const {
    LocationMetrics m;
    m.n = n_;
    if (n_ > 0) {
      const double n = static_cast<double>(n_);
      m.bias = std::abs(sum_.value() / n);
      m.rmse = std::sqrt(sumsq_.value() / n);
    }
    return m;
  }

 private:
  std::size_t n_ = 0;
  CompensatedSum sum_;
  CompensatedSum sumsq_;
};

inline PipelineOptions pipeline_options(const SimConfig& cfg) {
  PipelineOptions opt;
  opt.tuning = cfg.tuning;
  opt.tau_init = cfg.tau_init;
  opt.gamma_off = cfg.gamma_off;
  opt.alpha = cfg.alpha;
  opt.critical_value = cfg.critical_value;
  opt.quantile = cfg.quantile;
  opt.quantile_cache = cfg.quantile_cache;
  opt.center = cfg.center;
  switch (cfg.estimator) {
    case EstimatorKind::al1: opt.stage = Stage::detect; break;
    case EstimatorKind::al1_pls: opt.stage = Stage::estimate; break;
    case EstimatorKind::al1_pls_ci: opt.stage = Stage::infer; break;
  }
  return opt;
}

}  // namespace detail

/// Runs cfg.reps replications in parallel. Each replication draws from its
/// own substream and aggregation runs over the records in replication order,
/// so the report does not depend on the worker count.
inline MetricsReport run_monte_carlo(SimConfig cfg, const std::vector<EstimatorPlugin>& plugins = {}) {
  cfg.validate();
  if (cfg.estimator == EstimatorKind::al1_pls_ci && !cfg.critical_value) {
    cfg.critical_value = cached_limit_quantile(cfg.alpha, cfg.quantile, cfg.quantile_cache);
  }
  const PipelineOptions opt = detail::pipeline_options(cfg);
  const double T = static_cast<double>(cfg.T);

  std::vector<RepRecord> records(cfg.reps);
  parallel_for(cfg.reps, cfg.workers, [&](std::size_t rep) {
    Dataset d = gen_dataset(cfg, rep);
    const TimeSeries yc = opt.center ? center_columns(d.y) : d.y;
    const PipelineResult r = run_pipeline_centered(yc, opt);
    RepRecord& rec = records[rep];
    rec.rep = rep;
    rec.k0 = d.k0;
    rec.changed = r.detection.changed;
    rec.k_hat = r.detection.estimate.k;
    rec.lambda = r.detection.lambda_used;
    rec.gamma = r.detection.gamma_used;
    rec.status = to_string(r.status);
    if (r.pls) rec.k_tilde = r.pls->estimate.k;
    if (r.inference) {
      rec.xi_sq = r.inference->xi_sq_hat;
      rec.sigma_sq = r.inference->sigma_sq_hat;
      rec.ci_frac = r.inference->interval_frac;
      rec.covered = r.inference->covers_fraction(static_cast<double>(d.k0) / T);
    }
    for (const auto& plugin : plugins) rec.plugin_k.push_back(plugin.locate(yc));
  });

  MetricsReport rep;
  rep.config = cfg;
  rep.reps_used = records.size();
  rep.critical_value = cfg.critical_value;
  const bool has_change = cfg.tau0 < 1.0;
  const double tau0 = has_change ? static_cast<double>(cfg.true_index()) / T : 1.0;
  const bool want_pls = cfg.estimator != EstimatorKind::al1;
  const bool want_ci = cfg.estimator == EstimatorKind::al1_pls_ci;

  detail::LocationAccumulator al1, al1_all, pls, pls_all;
  std::vector<detail::LocationAccumulator> extra(plugins.size());
  std::size_t detected = 0, covered = 0;
  CompensatedSum se_sum;
  for (const RepRecord& r : records) {
    const double tau_hat = static_cast<double>(r.k_hat) / T;
    al1_all.add(tau_hat, tau0);
    if (r.changed) {
      ++detected;
      al1.add(tau_hat, tau0);
    }
    if (r.status == "unlocatable") ++rep.n_unlocatable;
    if (want_pls) {
      if (r.k_tilde) {
        const double tau_tilde = static_cast<double>(*r.k_tilde) / T;
        pls.add(tau_tilde, tau0);
        pls_all.add(tau_tilde, tau0);
      } else {
        pls_all.add(tau_hat, tau0);
      }
    }
    if (want_ci) {
      if (r.covered) {
        ++rep.n_intervals;
        covered += *r.covered ? 1 : 0;
        se_sum += *r.sigma_sq / *r.xi_sq;
      } else if (r.k_tilde) {
        ++rep.n_degenerate_inference;
      }
    }
    for (std::size_t i = 0; i < plugins.size(); ++i) {
      if (r.plugin_k[i]) extra[i].add(static_cast<double>(*r.plugin_k[i]) / T, tau0);
    }
  }
  const double n = static_cast<double>(records.size());
  if (has_change) {
    rep.tpr = static_cast<double>(detected) / n;
  } else {
    rep.tnr = static_cast<double>(records.size() - detected) / n;
  }
  rep.al1 = al1.finish();
  rep.al1_all = al1_all.finish();
  if (want_pls) {
    rep.pls = pls.finish();
    rep.pls_all = pls_all.finish();
  }
  if (want_ci && rep.n_intervals > 0) {
    rep.coverage = static_cast<double>(covered) / static_cast<double>(rep.n_intervals);
    rep.se_mean = se_sum.value() / static_cast<double>(rep.n_intervals);
  }
  for (std::size_t i = 0; i < plugins.size(); ++i) rep.plugins.emplace_back(plugins[i].name, extra[i].finish());
  rep.per_rep_records = std::move(records);
  return rep;
}

struct SweepRow {
  double tau_init = 0.0;
  bool changed = false;
  std::size_t k_hat = 0;
  double tau_hat = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
};

/// Detection (with BIC tuning) on one fixed dataset for each initializer.
inline std::vector<SweepRow> initializer_sweep(const SimConfig& cfg, const Vec& tau_inits,
                                               std::uint64_t rep_index = 0) {
  const Dataset d = gen_dataset(cfg, rep_index);
  PipelineOptions opt = detail::pipeline_options(cfg);
  const TimeSeries yc = opt.center ? center_columns(d.y) : d.y;
  opt.stage = Stage::detect;
  std::vector<SweepRow> rows;
  for (double tau_init : tau_inits) {
    opt.tau_init = tau_init;
    const PipelineResult r = run_pipeline_centered(yc, opt);
    rows.push_back({tau_init, r.detection.changed, r.detection.estimate.k, r.detection.estimate.tau,
                    r.detection.lambda_used, r.detection.gamma_used});
  }
  return rows;
}

}  // namespace cpinfer
