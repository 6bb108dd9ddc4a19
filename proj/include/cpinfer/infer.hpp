#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>

#include <boost/random/normal_distribution.hpp>

#include "cpinfer/core.hpp"
#include "cpinfer/parallel.hpp"

namespace cpinfer {

struct InferenceResult {
  ChangePointEstimate k_tilde;
  double xi_sq_hat = 0.0;
  double sigma_sq_hat = 0.0;
  double c_alpha = 0.0;
  double alpha = 0.0;
  std::pair<double, double> interval_int;
  std::pair<double, double> interval_frac;
  /// floor of the lower and ceiling of the upper integer endpoint.
  std::pair<long long, long long> interval_rounded;

  double half_width() const noexcept { return c_alpha * sigma_sq_hat / xi_sq_hat; }
  bool covers_fraction(double tau) const noexcept {
    return interval_frac.first <= tau && tau <= interval_frac.second;
  }
};

/// Unshrunk stopped means at k, kept only on the given supports.
inline MeanPair refit_means(const TimeSeries& y, std::size_t k, std::span<const std::size_t> support1,
                            std::span<const std::size_t> support2) {
  auto [left, right] = stopped_means(y, k);
  auto mask = [&](const Vec& full, std::span<const std::size_t> support) {
    Vec out(full.size(), 0.0);
    for (std::size_t j : support) {
      if (j >= full.size()) {
        throw error(errc::out_of_range, "support index " + std::to_string(j) +
                                            " outside dimension " + std::to_string(full.size()));
      }
      out[j] = full[j];
    }
    return out;
  };
  return MeanPair::from_means(mask(left, support1), mask(right, support2));
}

/// theta1 - theta2 = eta'mu1 - eta'mu2, which equals ||mu1 - mu2||^2.
inline double plugin_xi_sq(const MeanPair& means) {
  return std::max(means.theta1() - means.theta2(), 0.0);
}

/// Residual variance of the projected series about (theta1, theta2), scaled
/// by 1 / xi^2.
inline double plugin_sigma_sq(const TimeSeries& y, std::size_t k, const MeanPair& means) {
  const double xi_sq = plugin_xi_sq(means);
  if (!(xi_sq > 0.0)) throw error(errc::degenerate_jump, "plugin jump size is zero");
  const Vec z = project_series(y, means.jump());
  return loss_1d(z, k, means.theta1(), means.theta2()) / xi_sq;
}

inline InferenceResult confidence_interval(std::size_t k_tilde, double xi_sq_hat, double sigma_sq_hat,
                                           double c_alpha, std::size_t T, double alpha = 0.05) {
  if (!(xi_sq_hat > 0.0)) throw error(errc::degenerate_jump, "plugin jump size is zero");
  if (!(sigma_sq_hat >= 0.0)) throw error(errc::invalid_argument, "variance must be nonnegative");
  if (!(c_alpha > 0.0)) throw error(errc::invalid_argument, "critical value must be positive");
  InferenceResult r;
  r.k_tilde = ChangePointEstimate::at(k_tilde, T);
  r.xi_sq_hat = xi_sq_hat;
  r.sigma_sq_hat = sigma_sq_hat;
  r.c_alpha = c_alpha;
  r.alpha = alpha;
  const double hw = c_alpha * sigma_sq_hat / xi_sq_hat;
  const double center = static_cast<double>(k_tilde);
  const double n = static_cast<double>(T);
  r.interval_int = {std::clamp(center - hw, 1.0, n), std::clamp(center + hw, 1.0, n)};
  r.interval_frac = {r.interval_int.first / n, r.interval_int.second / n};
  r.interval_rounded = {static_cast<long long>(std::floor(r.interval_int.first)),
                        static_cast<long long>(std::ceil(r.interval_int.second))};
  return r;
}

// ---------------------------------------------------------------------------
// Limiting law argmin_v (|v| - 2 W(v)) by Monte Carlo.

struct QuantileSettings {
  double grid_half_width = 200.0;  // R
  double grid_step = 0.01;         // h
  std::size_t paths = 200000;
  std::uint64_t seed = 20200607;
  /// A half-path stops once it sits this far above its running minimum; the
  /// chance that it would still reach a new minimum is below exp(-cutoff / 2).
  double tail_cutoff = 40.0;
  unsigned workers = 0;

  void validate() const {
    if (!(grid_half_width > 0.0) || !(grid_step > 0.0) || paths == 0 || !(tail_cutoff > 0.0)) {
      throw error(errc::invalid_argument, "quantile settings need R > 0, h > 0, paths > 0, cutoff > 0");
    }
    if (grid_step > grid_half_width) throw error(errc::invalid_argument, "grid step exceeds half width");
  }

  std::size_t steps_per_side() const {
    return static_cast<std::size_t>(std::llround(grid_half_width / grid_step));
  }
};

namespace detail {

struct HalfPathMin {
  double value = 0.0;
  std::size_t step = 0;
};

/// Minimum of i*h - 2 W_i over i = 0..steps, W a Gaussian walk with step variance h.
template <class URBG>
HalfPathMin half_path_min(URBG& gen, std::size_t steps, double h, double cutoff) {
  boost::random::normal_distribution<double> normal;
  const double sd = std::sqrt(h);
  double w = 0.0;
  HalfPathMin best;
  for (std::size_t i = 1; i <= steps; ++i) {
    w += sd * normal(gen);
    const double v = static_cast<double>(i) * h - 2.0 * w;
    if (v < best.value) {
      best = {v, i};
    } else if (v - best.value > cutoff) {
      break;
    }
  }
  return best;
}

}  // namespace detail

/// One draw of the grid argmin V per path, path i using substream i of the seed.
inline Vec simulate_argmin_law(const QuantileSettings& s) {
  s.validate();
  const std::size_t steps = s.steps_per_side();
  Vec draws(s.paths);
  parallel_for(s.paths, s.workers, [&](std::size_t i) {
    Engine gen = substream(s.seed, i);
    const auto right = detail::half_path_min(gen, steps, s.grid_step, s.tail_cutoff);
    const auto left = detail::half_path_min(gen, steps, s.grid_step, s.tail_cutoff);
    double v = 0.0;
    if (right.value < left.value) {
      v = static_cast<double>(right.step) * s.grid_step;
    } else if (left.value < right.value) {
      v = -static_cast<double>(left.step) * s.grid_step;
    }
    draws[i] = v;
  });
  return draws;
}

/// Smallest sample value x with empirical P(X <= x) >= q. `sorted` ascending.
inline double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw error(errc::invalid_argument, "empty sample");
  const double n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(q * n - 1e-9)) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

struct QuantileTable {
  Vec alphas;
  Vec critical_values;
  QuantileSettings settings;
  double median = 0.0;
  /// Empirical median of V together with the sample quantiles 3 binomial
  /// standard errors either side of 1/2.
  std::pair<double, double> median_band;

  bool median_symmetric() const noexcept { return median_band.first <= 0.0 && 0.0 <= median_band.second; }

  double critical_value(double alpha) const {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      if (alphas[i] == alpha) return critical_values[i];
    }
    throw error(errc::out_of_range, "alpha " + std::to_string(alpha) + " not in the table");
  }
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw error(errc::invalid_argument, "alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

/// Critical values c_alpha with P(|V| <= c_alpha) = 1 - alpha from one batch of paths.
inline QuantileTable quantile_table(Vec alphas, const QuantileSettings& s) {
  for (double a : alphas) check_alpha(a);
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  Vec draws = simulate_argmin_law(s);
  QuantileTable table;
  table.settings = s;
  std::sort(draws.begin(), draws.end());
  const double band = 3.0 * 0.5 / std::sqrt(static_cast<double>(draws.size()));
  table.median = empirical_quantile(draws, 0.5);
  table.median_band = {empirical_quantile(draws, 0.5 - band), empirical_quantile(draws, 0.5 + band)};
  for (double& v : draws) v = std::abs(v);
  std::sort(draws.begin(), draws.end());
  table.alphas = alphas;
  for (double a : alphas) table.critical_values.push_back(empirical_quantile(draws, 1.0 - a));
  return table;
}

inline double limit_quantile(double alpha, const QuantileSettings& s = {}) {
  check_alpha(alpha);
  return quantile_table({alpha}, s).critical_values.front();
}

struct SymmetryPoint {
  double x = 0.0;
  double upper = 0.0;  // P(V > x)
  double lower = 0.0;  // P(V < -x)
  double se = 0.0;     // binomial standard error of upper - lower
  bool within(double k = 3.0) const noexcept { return std::abs(upper - lower) <= k * se; }
};

inline std::vector<SymmetryPoint> symmetry_check(std::span<const double> draws, std::span<const double> xs) {
  std::vector<SymmetryPoint> out;
  const double n = static_cast<double>(draws.size());
  for (double x : xs) {
    SymmetryPoint pt{x, 0.0, 0.0, 0.0};
    for (double v : draws) {
      if (v > x) pt.upper += 1.0;
      if (v < -x) pt.lower += 1.0;
    }
    pt.upper /= n;
    pt.lower /= n;
    const double d = pt.upper - pt.lower;
    pt.se = std::sqrt(std::max(pt.upper + pt.lower - d * d, 0.0) / n);
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantile cache: one line per entry,
//   alpha=0.05,R=200,h=0.01,paths=200000,seed=7 -> c=11.03
// with ",cutoff=..." appended when the tail cutoff is not the default.

namespace detail {

inline std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

class QuantileCache {
 public:
  static std::string key(double alpha, const QuantileSettings& s) {
    return "alpha=" + detail::format_number(alpha) + ",R=" + detail::format_number(s.grid_half_width) +
           ",h=" + detail::format_number(s.grid_step) + ",paths=" + std::to_string(s.paths) +
           ",seed=" + std::to_string(s.seed) +
           (s.tail_cutoff == QuantileSettings{}.tail_cutoff ? "" : ",cutoff=" + detail::format_number(s.tail_cutoff));
  }

  /// A missing file is an empty cache. Lines that do not parse are skipped.
  static QuantileCache load(const std::filesystem::path& path) {
    QuantileCache cache;
    std::ifstream in(path);
    if (!in) return cache;
    std::string line;
    while (std::getline(in, line)) {
      const auto arrow = line.find(" -> c=");
      if (arrow == std::string::npos) continue;
      const std::string value = line.substr(arrow + 6);
      double c = 0.0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), c);
      if (res.ec != std::errc{} || !(c > 0.0)) continue;
      cache.entries_[line.substr(0, arrow)] = c;
    }
    return cache;
  }

  std::optional<double> find(double alpha, const QuantileSettings& s) const {
    if (auto it = entries_.find(key(alpha, s)); it != entries_.end()) return it->second;
    return std::nullopt;
  }

  void insert(double alpha, const QuantileSettings& s, double c) { entries_[key(alpha, s)] = c; }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw error(errc::io, "cannot write quantile cache " + path.string());
    for (const auto& [k, c] : entries_) out << k << " -> c=" << detail::format_number(c) << '\n';
  }

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, double> entries_;
};

/// c_alpha from the cache at `cache_path` when present, otherwise simulated
/// and written back. An empty path disables caching.
inline double cached_limit_quantile(double alpha, const QuantileSettings& s,
                                    const std::filesystem::path& cache_path) {
  if (cache_path.empty()) return limit_quantile(alpha, s);
  auto cache = QuantileCache::load(cache_path);
  if (auto hit = cache.find(alpha, s)) return *hit;
  const double c = limit_quantile(alpha, s);
  cache.insert(alpha, s, c);
  cache.save(cache_path);
  return c;
}

}  // namespace cpinfer
