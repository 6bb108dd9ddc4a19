#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "cpinfer/core.hpp"

namespace cpinfer {

struct DetectionResult {
  bool changed = false;
  ChangePointEstimate estimate;
  MeanPair step0_means;
  double gamma_used = 0.0;
  double lambda_used = 0.0;
  /// Penalized objective at k = 1..T (entry k-1).
  Vec objective_profile;
  /// floor(T * tau_init), the split used for Step 0.
  std::size_t init_k = 0;
};

/// Soft-thresholded stopped means at k_init.
inline MeanPair step0_means(const TimeSeries& y, std::size_t k_init, double lambda) {
  auto [left, right] = stopped_means(y, k_init);
  return MeanPair::from_means(soft_threshold(left, lambda), soft_threshold(right, lambda));
}

/// Unpenalized p-dimensional loss at every k = 1..T (entry k-1). Per-row
/// residuals are accumulated as compensated prefix and suffix sums.
inline Vec loss_profile_pd(const TimeSeries& y, std::span<const double> mu1,
                           std::span<const double> mu2) {
  const std::size_t T = y.length();
  detail::check_dim(mu1.size(), y.dim(), "mu1");
  detail::check_dim(mu2.size(), y.dim(), "mu2");
  Vec head(T), tail(T + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t t = 0; t < T; ++t) {
    acc += squared_distance(y.row(t), mu1);
    head[t] = acc.value();
  }
  CompensatedSum back;
  for (std::size_t t = T; t-- > 0;) {
    back += squared_distance(y.row(t), mu2);
    tail[t] = back.value();
  }
  Vec profile(T);
  for (std::size_t k = 1; k <= T; ++k) {
    CompensatedSum q;
    q += head[k - 1];
    q += tail[k];
    profile[k - 1] = q.value() / static_cast<double>(T);
  }
  return profile;
}

/// argmin over k of loss[k-1] + gamma * 1{k < T}. Ties with the boundary go
/// to k = T; interior ties go to the smallest k.
inline std::size_t select_penalized(std::span<const double> loss_profile, double gamma) {
  const std::size_t T = loss_profile.size();
  if (T < 2) throw error(errc::invalid_argument, "loss profile needs at least 2 entries");
  if (!(gamma >= 0.0)) {
    throw error(errc::invalid_argument, "penalty must be nonnegative, got " + std::to_string(gamma));
  }
  std::size_t best = 1;
  for (std::size_t k = 2; k < T; ++k) {
    if (loss_profile[k - 1] < loss_profile[best - 1]) best = k;
  }
  if (loss_profile[T - 1] <= loss_profile[best - 1] + gamma) return T;
  return best;
}

inline Vec penalize(Vec loss_profile, double gamma) {
  for (std::size_t k = 1; k < loss_profile.size(); ++k) loss_profile[k - 1] += gamma;
  return loss_profile;
}

inline ChangePointEstimate penalized_argmin(const TimeSeries& y, const MeanPair& means,
                                            double gamma) {
  const Vec profile = loss_profile_pd(y, means.mu1, means.mu2);
  return ChangePointEstimate::at(select_penalized(profile, gamma), y.length());
}

inline std::size_t initializer_index(std::size_t T, double tau_init) {
  if (!(tau_init > 0.0 && tau_init < 1.0)) {
    throw error(errc::out_of_range, "initializer " + std::to_string(tau_init) +
                                        " must lie strictly inside (0, 1)");
  }
  const std::size_t k = grid_index(T, tau_init);
  if (k < 1 || k > T - 1) {
    throw error(errc::out_of_range, "initializer " + std::to_string(tau_init) +
                                        " maps to grid index " + std::to_string(k) +
                                        ", outside [1, " + std::to_string(T - 1) + "]");
  }
  return k;
}

/// Step 0 (soft-thresholded means at the initializer) followed by Step 1
/// (l0-penalized grid minimization).
inline DetectionResult algorithm1(const TimeSeries& y, double tau_init, double lambda,
                                  double gamma) {
  const std::size_t T = y.length();
  const std::size_t k_init = initializer_index(T, tau_init);
  DetectionResult r;
  r.init_k = k_init;
  r.lambda_used = lambda;
  r.gamma_used = gamma;
  r.step0_means = step0_means(y, k_init, lambda);
  const Vec loss = loss_profile_pd(y, r.step0_means.mu1, r.step0_means.mu2);
  const std::size_t k = select_penalized(loss, gamma);
  r.estimate = ChangePointEstimate::at(k, T);
  r.changed = k < T;
  r.objective_profile = penalize(loss, gamma);
  return r;
}

}  // namespace cpinfer
