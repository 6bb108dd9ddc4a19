#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cpinfer/core.hpp"

using namespace cpinfer;

namespace {

TimeSeries rows(std::vector<Vec> r) { return TimeSeries::from_rows(r); }

TimeSeries random_series(std::mt19937_64& g, std::size_t T, std::size_t p) {
  std::normal_distribution<double> n;
  Vec d(T * p);
  for (double& x : d) x = n(g);
  return TimeSeries(T, p, d);
}

Vec random_vec(std::mt19937_64& g, std::size_t p, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(p);
  for (double& x : v) x = n(g);
  return v;
}

}  // namespace

TEST(TimeSeries, RejectsBadShapes) {
  EXPECT_THROW(TimeSeries(1, 1, {1.0}), error);
  EXPECT_THROW(TimeSeries(2, 0, {}), error);
  EXPECT_THROW(TimeSeries(2, 2, {1, 2, 3}), error);
  EXPECT_THROW(rows({{1, 2}, {3}}), error);
}

TEST(TimeSeries, RejectsNonFinite) {
  try {
    TimeSeries(2, 2, {1, 2, std::numeric_limits<double>::quiet_NaN(), 4});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("row 2, column 1"), std::string::npos);
  }
  EXPECT_THROW(TimeSeries(2, 1, {1, std::numeric_limits<double>::infinity()}), error);
}

TEST(TimeSeries, RowAccess) {
  const auto y = rows({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(y.length(), 3u);
  EXPECT_EQ(y.dim(), 2u);
  EXPECT_EQ(y(2, 1), 6.0);
  EXPECT_EQ(y.row(1)[0], 3.0);
}

TEST(ChangePointEstimate, FractionIsExact) {
  const auto e = ChangePointEstimate::at(70, 350);
  EXPECT_EQ(e.tau, 70.0 / 350.0);
  EXPECT_FALSE(e.no_change());
  EXPECT_TRUE(ChangePointEstimate::at(350, 350).no_change());
  EXPECT_THROW(ChangePointEstimate::at(0, 5), error);
  EXPECT_THROW(ChangePointEstimate::at(6, 5), error);
}

TEST(GridIndex, FloorWithRepresentationGuard) {
  EXPECT_EQ(grid_index(350, 0.2), 70u);
  EXPECT_EQ(grid_index(350, 0.6), 210u);
  EXPECT_EQ(grid_index(225, 0.8), 180u);
  EXPECT_EQ(grid_index(100, 1.0), 100u);
  EXPECT_EQ(grid_index(7, 0.5), 3u);
  EXPECT_THROW(grid_index(10, 0.0), error);
  EXPECT_THROW(grid_index(10, 1.5), error);
}

TEST(CompensatedSum, RecoversLostLowBits) {
  CompensatedSum s;
  s += 1e16;
  for (int i = 0; i < 1000; ++i) s += 1.0;
  s += -1e16;
  EXPECT_EQ(s.value(), 1000.0);
}

TEST(CenterColumns, Examples) {
  EXPECT_EQ(center_columns(rows({{1}, {3}})), rows({{-1}, {1}}));
  const auto z = rows({{1, -2}, {-1, 2}});
  EXPECT_EQ(center_columns(z), z);
  EXPECT_EQ(center_columns(rows({{1, 0}, {2, 2}, {3, 4}})), rows({{-1, -2}, {0, 0}, {1, 2}}));
}

TEST(CenterColumns, ZeroColumnSumsAndIdempotent) {
  std::mt19937_64 g(1);
  const auto y = random_series(g, 57, 6);
  const auto c = center_columns(y);
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0;
    for (std::size_t t = 0; t < 57; ++t) s += c(t, j);
    EXPECT_LE(std::abs(s), 1e-10 * 57);
  }
  const auto cc = center_columns(c);
  for (std::size_t i = 0; i < c.data().size(); ++i) EXPECT_NEAR(cc.data()[i], c.data()[i], 1e-14);
  EXPECT_EQ(y.dim(), c.dim());
  EXPECT_EQ(y.length(), c.length());
}

TEST(Loss1d, Examples) {
  const Vec z{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(loss_1d(z, 2, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(loss_1d(z, 2, 0, 0), 0.5);
  EXPECT_DOUBLE_EQ(loss_1d(Vec{5, 5}, 2, 5, 123.0), 0.0);
}

TEST(Loss1d, RangeErrors) {
  const Vec z{0, 0, 1, 1};
  EXPECT_THROW(loss_1d(z, 0, 0, 0), error);
  EXPECT_THROW(loss_1d(z, 5, 0, 0), error);
}

TEST(LossPd, Examples) {
  const auto y = rows({{0, 0}, {1, 1}});
  EXPECT_DOUBLE_EQ(loss_pd(y, 1, Vec{0, 0}, Vec{0, 0}), 1.0);
  const auto flat = rows({{2, 3}, {2, 3}, {2, 3}});
  EXPECT_DOUBLE_EQ(loss_pd(flat, 3, Vec{2, 3}, Vec{100, 100}), 0.0);
}

TEST(LossPd, Errors) {
  const auto y = rows({{0, 0}, {1, 1}});
  EXPECT_THROW(loss_pd(y, 0, Vec{0, 0}, Vec{0, 0}), error);
  EXPECT_THROW(loss_pd(y, 3, Vec{0, 0}, Vec{0, 0}), error);
  try {
    loss_pd(y, 1, Vec{0}, Vec{0, 0});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::dimension_mismatch);
  }
}

TEST(LossPd, OneDimensionalAgreesWithLoss1d) {
  std::mt19937_64 g(2);
  std::uniform_int_distribution<std::size_t> len(2, 40);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t T = len(g);
    const auto y = random_series(g, T, 1);
    const Vec m = random_vec(g, 2);
    for (std::size_t k = 1; k <= T; ++k) {
      EXPECT_NEAR(loss_pd(y, k, Vec{m[0]}, Vec{m[1]}), loss_1d(y.data(), k, m[0], m[1]), 1e-13);
    }
  }
}

TEST(Loss1d, DecompositionOverRowsBetweenSplits) {
  std::mt19937_64 g(3);
  const std::size_t T = 30;
  const Vec z = random_vec(g, T);
  const double th1 = 0.7, th2 = -0.4;
  for (std::size_t k0 = 1; k0 <= T; ++k0) {
    for (std::size_t k = 1; k <= T; ++k) {
      // Rows strictly between the splits switch level; nothing else changes.
      double direct = 0.0;
      const std::size_t lo = std::min(k, k0), hi = std::max(k, k0);
      for (std::size_t t = lo; t < hi; ++t) {
        const double a = (z[t] - th1) * (z[t] - th1), b = (z[t] - th2) * (z[t] - th2);
        direct += k > k0 ? a - b : b - a;
      }
      EXPECT_NEAR(loss_1d(z, k, th1, th2) - loss_1d(z, k0, th1, th2), direct / T, 1e-12);
    }
  }
}

TEST(StoppedMeans, Examples) {
  auto [a, b] = stopped_means(rows({{0}, {0}, {2}, {2}}), 2);
  EXPECT_EQ(a, Vec{0});
  EXPECT_EQ(b, Vec{2});
  auto [c, d] = stopped_means(rows({{1}, {3}, {5}}), 1);
  EXPECT_EQ(c, Vec{1});
  EXPECT_EQ(d, Vec{4});
}

TEST(StoppedMeans, EmptySegment) {
  const auto y = rows({{1}, {3}, {5}});
  for (std::size_t k : {std::size_t{0}, std::size_t{3}}) {
    try {
      stopped_means(y, k);
      FAIL();
    } catch (const error& e) {
      EXPECT_EQ(e.code(), errc::empty_segment);
    }
  }
}

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(Vec{2.5, -0.5, 0}, 1.0), (Vec{1.5, 0, 0}));
  const Vec x{-3.2, 0.1, 7};
  EXPECT_EQ(soft_threshold(x, 0.0), x);
  EXPECT_EQ(soft_threshold(Vec{-2.0}, 0.5), Vec{-1.5});
  EXPECT_THROW(soft_threshold(x, -0.1), error);
}

TEST(SoftThreshold, MatchesBruteForceProxWithPenaltyTwoLambda) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> xs(-6, 6), ls(0, 3);
  const double step = 1e-4;
  for (int rep = 0; rep < 60; ++rep) {
    const double x = xs(g), lambda = ls(g);
    double best_m = 0, best = std::numeric_limits<double>::infinity();
    for (double m = -10; m <= 10; m += step) {
      const double v = (x - m) * (x - m) + 2 * lambda * std::abs(m);
      if (v < best) {
        best = v;
        best_m = m;
      }
    }
    EXPECT_NEAR(soft_threshold(Vec{x}, lambda)[0], best_m, 2 * step) << "x=" << x << " lambda=" << lambda;
  }
}

TEST(SoftThreshold, LipschitzMonotoneAndSupportShrinks) {
  std::mt19937_64 g(5);
  for (int rep = 0; rep < 200; ++rep) {
    const Vec x = random_vec(g, 8, 2), y = random_vec(g, 8, 2);
    const double l1 = std::abs(random_vec(g, 1)[0]), l2 = l1 + std::abs(random_vec(g, 1)[0]);
    const Vec a = soft_threshold(x, l1), b = soft_threshold(y, l1), c = soft_threshold(x, l2);
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_LE(std::abs(a[j] - b[j]), std::abs(x[j] - y[j]) + 1e-15);
      EXPECT_LE(std::abs(c[j]), std::abs(a[j]));
      if (x[j] == 0.0) EXPECT_EQ(a[j], 0.0);
    }
  }
}

TEST(ProjectSeries, Examples) {
  const auto y = rows({{1, 2}, {3, 4}});
  EXPECT_EQ(project_series(y, Vec{0, 1}), (Vec{2, 4}));
  EXPECT_EQ(project_series(y, Vec{0, 0}), (Vec{0, 0}));
  EXPECT_EQ(project_series(y, Vec{1, -1}), (Vec{-1, -1}));
  EXPECT_THROW(project_series(y, Vec{1}), error);
}

TEST(MeanPair, SupportsAndDerivedQuantities) {
  const auto m = MeanPair::from_means({1, 0, -2}, {0, 0, 3});
  EXPECT_EQ(m.support1, (Support{0, 2}));
  EXPECT_EQ(m.support2, (Support{2}));
  EXPECT_EQ(m.joint_support(), (Support{0, 2}));
  EXPECT_EQ(m.jump(), (Vec{1, 0, -5}));
  EXPECT_DOUBLE_EQ(m.jump_size(), std::sqrt(26.0));
  EXPECT_THROW(MeanPair::from_means({1}, {1, 2}), error);
}

TEST(MeanPair, ThetaGapEqualsSquaredJump) {
  std::mt19937_64 g(6);
  std::uniform_int_distribution<std::size_t> dims(1, 60);
  std::bernoulli_distribution keep(0.3);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t p = dims(g);
    Vec a = random_vec(g, p, 3), b = random_vec(g, p, 3);
    for (std::size_t j = 0; j < p; ++j) {
      if (!keep(g)) a[j] = 0;
      if (!keep(g)) b[j] = 0;
    }
    const auto m = MeanPair::from_means(a, b);
    const double lhs = m.theta1() - m.theta2();
    const double rhs = squared_distance(a, b);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, rhs));
  }
}
