#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>

#include "cpinfer/core.hpp"
#include "cpinfer/detect.hpp"
#include "cpinfer/infer.hpp"
#include "cpinfer/tune.hpp"

namespace cpinfer {

/// ||mu1 - mu2|| below 1e-12 (1 + ||mu1|| + ||mu2||).
inline bool is_zero_jump(const MeanPair& means) {
  const double n1 = std::sqrt(dot(means.mu1, means.mu1));
  const double n2 = std::sqrt(dot(means.mu2, means.mu2));
  return means.jump_size() < 1e-12 * (1.0 + n1 + n2);
}

/// 1-D two-segment loss at k = 1..T-1 (entry k-1) about fixed levels.
inline Vec loss_profile_1d(std::span<const double> z, double theta1, double theta2) {
  const std::size_t T = z.size();
  if (T < 2) throw error(errc::invalid_argument, "series needs at least 2 points");
  Vec head(T), tail(T + 1, 0.0);
  CompensatedSum a;
  for (std::size_t t = 0; t < T; ++t) {
    a += (z[t] - theta1) * (z[t] - theta1);
    head[t] = a.value();
  }
  CompensatedSum b;
  for (std::size_t t = T; t-- > 0;) {
    b += (z[t] - theta2) * (z[t] - theta2);
    tail[t] = b.value();
  }
  Vec profile(T - 1);
  for (std::size_t k = 1; k < T; ++k) {
    CompensatedSum q;
    q += head[k - 1];
    q += tail[k];
    profile[k - 1] = q.value() / static_cast<double>(T);
  }
  return profile;
}

struct PlsFit {
  ChangePointEstimate estimate;
  Vec surrogate;     // z_t = eta' y_t
  Vec loss_profile;  // k = 1..T-1
  double theta1 = 0.0;
  double theta2 = 0.0;
};

/// Projected least squares: project onto eta = mu1 - mu2 and minimize the
/// 1-D loss over k in {1, ..., T-1}, smallest k on ties.
inline PlsFit pls_fit(const TimeSeries& y, const MeanPair& means) {
  detail::check_dim(means.dim(), y.dim(), "mean pair");
  if (is_zero_jump(means)) {
    throw error(errc::degenerate_jump, "estimated jump vector is zero; projection is undefined");
  }
  PlsFit fit;
  const Vec eta = means.jump();
  fit.theta1 = dot(eta, means.mu1);
  fit.theta2 = dot(eta, means.mu2);
  fit.surrogate = project_series(y, eta);
  fit.loss_profile = loss_profile_1d(fit.surrogate, fit.theta1, fit.theta2);
  std::size_t best = 1;
  for (std::size_t k = 2; k < y.length(); ++k) {
    if (fit.loss_profile[k - 1] < fit.loss_profile[best - 1]) best = k;
  }
  fit.estimate = ChangePointEstimate::at(best, y.length());
  return fit;
}

inline ChangePointEstimate pls_estimate(const TimeSeries& y, const MeanPair& means) {
  return pls_fit(y, means).estimate;
}

// ---------------------------------------------------------------------------
// Detection -> refined means -> PLS -> confidence interval.

enum class Stage { detect, estimate, infer };

enum class PipelineStatus {
  no_change,    // detection selected k = T
  detected,     // change detected; later stages not requested
  located,      // PLS estimate available
  unlocatable,  // change detected but the refined means coincide
};

constexpr const char* to_string(PipelineStatus s) noexcept {
  switch (s) {
    case PipelineStatus::no_change: return "no_change";
    case PipelineStatus::detected: return "detected";
    case PipelineStatus::located: return "located";
    case PipelineStatus::unlocatable: return "unlocatable";
  }
  return "unknown";
}

struct PipelineOptions {
  TuningConfig tuning;
  double tau_init = 0.5;
  /// Force gamma = 0 so that a change is always reported.
  bool gamma_off = false;
  Stage stage = Stage::infer;
  double alpha = 0.05;
  /// Known critical value; otherwise simulated (and cached when a path is set).
  std::optional<double> critical_value;
  QuantileSettings quantile;
  std::filesystem::path quantile_cache;
  /// Subtract column means before estimation.
  bool center = true;
};

struct PipelineResult {
  PipelineStatus status = PipelineStatus::no_change;
  DetectionResult detection;
  double lambda_grid_scale = 1.0;
  std::optional<double> lambda_refined;
  std::optional<MeanPair> refined_means;
  std::optional<PlsFit> pls;
  std::optional<InferenceResult> inference;
  /// Set when the refitted means give a zero plugin jump.
  bool inference_degenerate = false;

  bool changed() const noexcept { return detection.changed; }
};

/// Runs the estimator on an already centered series.
inline PipelineResult run_pipeline_centered(const TimeSeries& yc, const PipelineOptions& opt) {
  opt.tuning.validate();
  const std::size_t T = yc.length();
  const std::size_t k_init = initializer_index(T, opt.tau_init);

  PipelineResult out;
  Vec lambda_grid = opt.tuning.lambda_grid;
  if (opt.tuning.scale_by_mad) {
    const double scale = mad_scale(yc);
    if (scale > 0.0) {
      out.lambda_grid_scale = scale;
      for (double& l : lambda_grid) l *= scale;
    }
  }

  const double lambda0 = opt.tuning.lambda ? *opt.tuning.lambda : bic_lambda(yc, k_init, lambda_grid).lambda;
  double gamma = 0.0;
  if (!opt.gamma_off) {
    if (opt.tuning.gamma) {
      gamma = *opt.tuning.gamma;
    } else {
      const MeanPair step0 = step0_means(yc, k_init, lambda0);
      const bool retune = opt.tuning.retune_lambda_for_gamma && !opt.tuning.lambda;
      gamma = retune ? bic_gamma(yc, step0, opt.tuning.gamma_grid, lambda_grid).gamma
                     : bic_gamma_fixed_lambda(yc, step0, opt.tuning.gamma_grid, lambda0).gamma;
    }
  }
  out.detection = algorithm1(yc, opt.tau_init, lambda0, gamma);
  if (!out.detection.changed) {
    out.status = PipelineStatus::no_change;
    return out;
  }
  if (opt.stage == Stage::detect) {
    out.status = PipelineStatus::detected;
    return out;
  }

  const std::size_t k_hat = out.detection.estimate.k;
  const double lambda1 = opt.tuning.lambda ? *opt.tuning.lambda : bic_lambda(yc, k_hat, lambda_grid).lambda;
  out.lambda_refined = lambda1;
  out.refined_means = step0_means(yc, k_hat, lambda1);
  if (is_zero_jump(*out.refined_means)) {
    out.status = PipelineStatus::unlocatable;
    return out;
  }
  out.pls = pls_fit(yc, *out.refined_means);
  out.status = PipelineStatus::located;
  if (opt.stage == Stage::estimate) return out;

  const std::size_t k_tilde = out.pls->estimate.k;
  const MeanPair refit = refit_means(yc, k_tilde, out.refined_means->support1, out.refined_means->support2);
  const double xi_sq = plugin_xi_sq(refit);
  if (!(xi_sq > 0.0)) {
    out.inference_degenerate = true;
    return out;
  }
  const double sigma_sq = plugin_sigma_sq(yc, k_tilde, refit);
  const double c = opt.critical_value ? *opt.critical_value
                                      : cached_limit_quantile(opt.alpha, opt.quantile, opt.quantile_cache);
  out.inference = confidence_interval(k_tilde, xi_sq, sigma_sq, c, T, opt.alpha);
  return out;
}

inline PipelineResult full_pipeline(const TimeSeries& y, const PipelineOptions& opt = {}) {
  if (!opt.center) return run_pipeline_centered(y, opt);
  return run_pipeline_centered(center_columns(y), opt);
}

}  // namespace cpinfer
