#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpinfer/error.hpp"

namespace cpinfer {

using Vec = std::vector<double>;
using Support = std::vector<std::size_t>;

/// Neumaier-compensated accumulator. Loss sums over T*p terms go through this
/// so that profiles are reproducible to the last few ulps.
class CompensatedSum {
 public:
  CompensatedSum& add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  CompensatedSum& operator+=(double x) noexcept { return add(x); }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// T x p matrix of observations stored row-major; row t is y_{t+1}.
class TimeSeries {
 public:
  TimeSeries(std::size_t length, std::size_t dim, Vec data)
      : length_(length), dim_(dim), data_(std::move(data)) {
    if (length_ < 2) {
      throw error(errc::invalid_argument, "time series needs at least 2 rows, got " +
                                              std::to_string(length_));
    }
    if (dim_ < 1) throw error(errc::invalid_argument, "time series needs at least 1 column");
    if (data_.size() != length_ * dim_) {
      throw error(errc::dimension_mismatch, "time series storage has " +
                                                std::to_string(data_.size()) + " values, expected " +
                                                std::to_string(length_ * dim_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw error(errc::invalid_argument, "non-finite value at row " +
                                                std::to_string(i / dim_ + 1) + ", column " +
                                                std::to_string(i % dim_ + 1));
      }
    }
  }

  static TimeSeries from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) throw error(errc::invalid_argument, "time series needs at least 2 rows, got 0");
    const std::size_t dim = rows.front().size();
    Vec data;
    data.reserve(rows.size() * dim);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != dim) {
        throw error(errc::dimension_mismatch, "row " + std::to_string(t + 1) + " has " +
                                                  std::to_string(rows[t].size()) +
                                                  " columns, expected " + std::to_string(dim));
      }
      data.insert(data.end(), rows[t].begin(), rows[t].end());
    }
    return TimeSeries(rows.size(), dim, std::move(data));
  }

  std::size_t length() const noexcept { return length_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> row(std::size_t t) const noexcept {
    return {data_.data() + t * dim_, dim_};
  }

  double operator()(std::size_t t, std::size_t j) const noexcept { return data_[t * dim_ + j]; }

  const Vec& data() const noexcept { return data_; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::size_t length_;
  std::size_t dim_;
  Vec data_;
};

/// Change point on the sample grid: the first k rows form the pre-change
/// segment. k == T encodes "no change".
struct ChangePointEstimate {
  std::size_t k = 0;
  std::size_t T = 0;
  double tau = 0.0;

  static ChangePointEstimate at(std::size_t k, std::size_t T) {
    if (T == 0 || k < 1 || k > T) {
      throw error(errc::out_of_range, "grid index " + std::to_string(k) + " outside [1, " +
                                          std::to_string(T) + "]");
    }
    return {k, T, static_cast<double>(k) / static_cast<double>(T)};
  }

  bool no_change() const noexcept { return k == T; }

  friend bool operator==(const ChangePointEstimate&, const ChangePointEstimate&) = default;
};

/// Grid index floor(T * tau). A 1e-9 guard absorbs representation error so
/// that e.g. 0.6 * 350 maps to 210 rather than 209.
inline std::size_t grid_index(std::size_t T, double tau) {
  if (!(tau > 0.0) || tau > 1.0) {
    throw error(errc::out_of_range, "fraction " + std::to_string(tau) + " outside (0, 1]");
  }
  return static_cast<std::size_t>(std::floor(static_cast<double>(T) * tau + 1e-9));
}

inline Support support_of(std::span<const double> x) {
  Support s;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) s.push_back(j);
  }
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw error(errc::dimension_mismatch, "dot product of vectors of length " +
                                              std::to_string(a.size()) + " and " +
                                              std::to_string(b.size()));
  }
  CompensatedSum acc;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc.value();
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  CompensatedSum acc;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc.value();
}

/// Pre/post-change mean vectors together with their nonzero patterns.
struct MeanPair {
  Vec mu1;
  Vec mu2;
  Support support1;
  Support support2;

  static MeanPair from_means(Vec mu1, Vec mu2) {
    if (mu1.size() != mu2.size()) {
      throw error(errc::dimension_mismatch, "mean vectors differ in length");
    }
    MeanPair m{std::move(mu1), std::move(mu2), {}, {}};
    m.support1 = support_of(m.mu1);
    m.support2 = support_of(m.mu2);
    return m;
  }

  std::size_t dim() const noexcept { return mu1.size(); }

  Vec jump() const {
    Vec eta(mu1.size());
    for (std::size_t j = 0; j < eta.size(); ++j) eta[j] = mu1[j] - mu2[j];
    return eta;
  }

  double jump_size() const { return std::sqrt(squared_distance(mu1, mu2)); }

  double theta1() const { return dot(jump(), mu1); }
  double theta2() const { return dot(jump(), mu2); }

  /// Union of the two supports, sorted.
  Support joint_support() const {
    Support u;
    std::size_t a = 0, b = 0;
    while (a < support1.size() || b < support2.size()) {
      if (b == support2.size() || (a < support1.size() && support1[a] < support2[b])) {
        u.push_back(support1[a++]);
      } else if (a == support1.size() || support2[b] < support1[a]) {
        u.push_back(support2[b++]);
      } else {
        u.push_back(support1[a]);
        ++a;
        ++b;
      }
    }
    return u;
  }
};

inline TimeSeries center_columns(const TimeSeries& y) {
  const std::size_t T = y.length(), p = y.dim();
  std::vector<CompensatedSum> sums(p);
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = y.row(t);
    for (std::size_t j = 0; j < p; ++j) sums[j] += r[j];
  }
  Vec mean(p);
  for (std::size_t j = 0; j < p; ++j) mean[j] = sums[j].value() / static_cast<double>(T);
  Vec out(y.data());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < p; ++j) out[t * p + j] -= mean[j];
  }
  return TimeSeries(T, p, std::move(out));
}

namespace detail {

inline void check_split(std::size_t k, std::size_t T) {
  if (k < 1 || k > T) {
    throw error(errc::out_of_range, "split index " + std::to_string(k) + " outside [1, " +
                                        std::to_string(T) + "]");
  }
}

inline void check_interior_split(std::size_t k, std::size_t T) {
  if (k < 1 || k >= T) {
    throw error(errc::empty_segment, "split index " + std::to_string(k) +
                                         " leaves an empty segment (T = " + std::to_string(T) +
                                         ")");
  }
}

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw error(errc::dimension_mismatch, std::string(what) + " has dimension " +
                                              std::to_string(got) + ", expected " +
                                              std::to_string(want));
  }
}

/// Column means of rows [begin, end).
inline Vec segment_mean(const TimeSeries& y, std::size_t begin, std::size_t end) {
  const std::size_t p = y.dim();
  std::vector<CompensatedSum> sums(p);
  for (std::size_t t = begin; t < end; ++t) {
    const auto r = y.row(t);
    for (std::size_t j = 0; j < p; ++j) sums[j] += r[j];
  }
  Vec mean(p);
  const double n = static_cast<double>(end - begin);
  for (std::size_t j = 0; j < p; ++j) mean[j] = sums[j].value() / n;
  return mean;
}

}  // namespace detail

/// (1/T) [ sum_{t<=k} (z_t - theta1)^2 + sum_{t>k} (z_t - theta2)^2 ].
inline double loss_1d(std::span<const double> z, std::size_t k, double theta1, double theta2) {
  const std::size_t T = z.size();
  detail::check_split(k, T);
  CompensatedSum acc;
  for (std::size_t t = 0; t < k; ++t) acc += (z[t] - theta1) * (z[t] - theta1);
  for (std::size_t t = k; t < T; ++t) acc += (z[t] - theta2) * (z[t] - theta2);
  return acc.value() / static_cast<double>(T);
}

inline double loss_pd(const TimeSeries& y, std::size_t k, std::span<const double> mu1,
                      std::span<const double> mu2) {
  const std::size_t T = y.length();
  detail::check_split(k, T);
  detail::check_dim(mu1.size(), y.dim(), "mu1");
  detail::check_dim(mu2.size(), y.dim(), "mu2");
  CompensatedSum acc;
  for (std::size_t t = 0; t < k; ++t) acc += squared_distance(y.row(t), mu1);
  for (std::size_t t = k; t < T; ++t) acc += squared_distance(y.row(t), mu2);
  return acc.value() / static_cast<double>(T);
}

/// Means of rows 1..k and k+1..T.
inline std::pair<Vec, Vec> stopped_means(const TimeSeries& y, std::size_t k) {
  detail::check_interior_split(k, y.length());
  return {detail::segment_mean(y, 0, k), detail::segment_mean(y, k, y.length())};
}

inline Vec soft_threshold(std::span<const double> x, double lambda) {
  if (!(lambda >= 0.0)) {
    throw error(errc::invalid_argument, "soft-threshold level must be nonnegative, got " +
                                            std::to_string(lambda));
  }
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double shrunk = std::abs(x[j]) - lambda;
    out[j] = shrunk > 0.0 ? std::copysign(shrunk, x[j]) : 0.0;
  }
  return out;
}

/// z_t = eta' y_t.
inline Vec project_series(const TimeSeries& y, std::span<const double> eta) {
  detail::check_dim(eta.size(), y.dim(), "projection direction");
  Vec z(y.length());
  for (std::size_t t = 0; t < y.length(); ++t) z[t] = dot(eta, y.row(t));
  return z;
}

}  // namespace cpinfer
