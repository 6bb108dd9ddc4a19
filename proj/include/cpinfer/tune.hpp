#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "cpinfer/core.hpp"
#include "cpinfer/detect.hpp"

namespace cpinfer {

/// n equally spaced points strictly inside (lo, hi): lo + (hi - lo) * i / (n + 1).
inline Vec open_grid(double lo, double hi, std::size_t n) {
  if (n == 0 || !(hi > lo)) throw error(errc::invalid_argument, "open_grid needs n > 0 and hi > lo");
  Vec g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(n + 1);
  }
  return g;
}

struct TuningConfig {
  Vec lambda_grid = open_grid(0.0, 0.5, 50);
  Vec gamma_grid = open_grid(0.0, 1.0, 50);
  std::optional<double> lambda;
  std::optional<double> gamma;
  /// Rescale the lambda grid by the robust (MAD) scale of the centered data.
  bool scale_by_mad = false;
  /// Re-select lambda on each partition inside BIC(gamma); otherwise reuse
  /// the Step 0 lambda.
  bool retune_lambda_for_gamma = true;

  void validate() const {
    auto check = [](const Vec& g, double hi, const char* name) {
      if (g.empty()) throw error(errc::invalid_argument, std::string(name) + " grid is empty");
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] > 0.0 && g[i] < hi) || (i > 0 && !(g[i] > g[i - 1]))) {
          throw error(errc::invalid_argument,
                      std::string(name) + " grid must be strictly increasing inside (0, " +
                          std::to_string(hi) + ")");
        }
      }
    };
    check(lambda_grid, 0.5, "lambda");
    check(gamma_grid, 1.0, "gamma");
    if (lambda && !(*lambda >= 0.0)) throw error(errc::invalid_argument, "lambda must be >= 0");
    if (gamma && !(*gamma >= 0.0)) throw error(errc::invalid_argument, "gamma must be >= 0");
  }
};

/// 1.4826 * median absolute deviation over every entry of y.
inline double mad_scale(const TimeSeries& y) {
  Vec v(y.data());
  auto median = [](Vec& x) {
    const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    double m = *mid;
    if (x.size() % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), mid));
    return m;
  };
  const double med = median(v);
  for (double& x : v) x = std::abs(x - med);
  return 1.4826 * median(v);
}

namespace detail {

/// Column sums and sums of squares over a row range; residual sums of
/// squares about any mean vector follow in O(p).
struct SegmentStats {
  std::size_t n = 0;
  Vec sum;
  Vec sumsq;

  SegmentStats(const TimeSeries& y, std::size_t begin, std::size_t end)
      : n(end - begin), sum(y.dim()), sumsq(y.dim()) {
    const std::size_t p = y.dim();
    std::vector<CompensatedSum> s(p), q(p);
    for (std::size_t t = begin; t < end; ++t) {
      const auto r = y.row(t);
      for (std::size_t j = 0; j < p; ++j) {
        s[j] += r[j];
        q[j] += r[j] * r[j];
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      sum[j] = s[j].value();
      sumsq[j] = q[j].value();
    }
  }

  Vec mean() const {
    Vec m(sum.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = sum[j] / static_cast<double>(n);
    return m;
  }

  /// sum_t ||y_t - m||^2 over the segment.
  double rss(std::span<const double> m) const {
    CompensatedSum acc;
    const double nn = static_cast<double>(n);
    for (std::size_t j = 0; j < m.size(); ++j) {
      acc += sumsq[j];
      acc += -2.0 * m[j] * sum[j];
      acc += nn * m[j] * m[j];
    }
    return std::max(acc.value(), 0.0);
  }
};

inline std::size_t union_size(std::span<const double> a, std::span<const double> b) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < a.size(); ++j) n += (a[j] != 0.0 || b[j] != 0.0) ? 1 : 0;
  return n;
}

inline std::size_t nonzeros(std::span<const double> a) {
  return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](double x) { return x != 0.0; }));
}

/// Minimizer of values over grid, smallest grid value on ties.
inline std::size_t grid_argmin(std::span<const double> grid, std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (values[i] < values[best] || (values[i] == values[best] && grid[i] < grid[best])) best = i;
  }
  return best;
}

}  // namespace detail

struct LambdaSelection {
  double lambda = 0.0;
  Vec bic;  // aligned with the input grid
};

/// Unnormalized residual sum of squares of the soft-thresholded stopped means
/// at split k plus |S| log T, S the union of the two supports.
inline LambdaSelection bic_lambda(const TimeSeries& y, std::size_t k, std::span<const double> grid) {
  if (grid.empty()) throw error(errc::invalid_argument, "lambda grid is empty");
  detail::check_interior_split(k, y.length());
  const detail::SegmentStats left(y, 0, k), right(y, k, y.length());
  const Vec m1 = left.mean(), m2 = right.mean();
  const double log_t = std::log(static_cast<double>(y.length()));
  LambdaSelection out;
  out.bic.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec a = soft_threshold(m1, grid[i]);
    const Vec b = soft_threshold(m2, grid[i]);
    CompensatedSum c;
    c += left.rss(a);
    c += right.rss(b);
    c += static_cast<double>(detail::union_size(a, b)) * log_t;
    out.bic[i] = c.value();
  }
  out.lambda = grid[detail::grid_argmin(grid, out.bic)];
  return out;
}

struct GammaSelection {
  double gamma = 0.0;
  std::size_t k = 0;  // change point selected at gamma
  Vec bic;            // aligned with the input grid
  std::vector<std::size_t> k_per_gamma;
};

namespace detail {

/// Criterion of one partition: residuals of the soft-thresholded means plus
/// (|S| + 1{k<T}) log T, minimized over `lambdas`. At k = T only the
/// full-sample mean enters and |S| counts its support alone.
inline double partition_bic(const TimeSeries& y, std::size_t k, std::span<const double> lambdas) {
  const std::size_t T = y.length();
  const double log_t = std::log(static_cast<double>(T));
  double best = std::numeric_limits<double>::infinity();
  if (k == T) {
    const SegmentStats all(y, 0, T);
    const Vec m = all.mean();
    for (double lambda : lambdas) {
      const Vec a = soft_threshold(m, lambda);
      best = std::min(best, all.rss(a) + static_cast<double>(nonzeros(a)) * log_t);
    }
    return best;
  }
  const SegmentStats left(y, 0, k), right(y, k, T);
  const Vec m1 = left.mean(), m2 = right.mean();
  for (double lambda : lambdas) {
    const Vec a = soft_threshold(m1, lambda);
    const Vec b = soft_threshold(m2, lambda);
    CompensatedSum c;
    c += left.rss(a);
    c += right.rss(b);
    c += (static_cast<double>(union_size(a, b)) + 1.0) * log_t;
    best = std::min(best, c.value());
  }
  return best;
}

inline GammaSelection select_gamma(const TimeSeries& y, const MeanPair& step0, std::span<const double> grid,
                                   std::span<const double> lambdas) {
  if (grid.empty()) throw error(errc::invalid_argument, "gamma grid is empty");
  if (lambdas.empty()) throw error(errc::invalid_argument, "lambda grid is empty");
  const Vec loss = loss_profile_pd(y, step0.mu1, step0.mu2);
  std::map<std::size_t, double> memo;
  GammaSelection out;
  out.bic.resize(grid.size());
  out.k_per_gamma.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t k = select_penalized(loss, grid[i]);
    auto it = memo.find(k);
    if (it == memo.end()) it = memo.emplace(k, partition_bic(y, k, lambdas)).first;
    out.k_per_gamma[i] = k;
    out.bic[i] = it->second;
  }
  const std::size_t best = grid_argmin(grid, out.bic);
  out.gamma = grid[best];
  out.k = out.k_per_gamma[best];
  return out;
}

}  // namespace detail

/// BIC over the gamma grid. For every gamma the penalized argmin is taken on
/// the Step 0 profile and the criterion is evaluated on the partition it
/// yields, with lambda re-selected on that partition by the same BIC.
inline GammaSelection bic_gamma(const TimeSeries& y, const MeanPair& step0, std::span<const double> grid,
                                std::span<const double> lambda_grid) {
  return detail::select_gamma(y, step0, grid, lambda_grid);
}

/// As bic_gamma, with the refit threshold held at `lambda_refit` on every partition.
inline GammaSelection bic_gamma_fixed_lambda(const TimeSeries& y, const MeanPair& step0,
                                             std::span<const double> grid, double lambda_refit) {
  const double one[] = {lambda_refit};
  return detail::select_gamma(y, step0, grid, one);
}

}  // namespace cpinfer
