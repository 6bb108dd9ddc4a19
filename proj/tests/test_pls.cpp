#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cpinfer/pls.hpp"
#include "cpinfer/simbench.hpp"

using namespace cpinfer;

namespace {

TimeSeries rows(std::vector<Vec> r) { return TimeSeries::from_rows(r); }

TimeSeries two_level(std::size_t T, std::size_t k0, const Vec& a, const Vec& b, double noise = 0.0,
                     std::uint64_t seed = 1) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  const std::size_t p = a.size();
  Vec d(T * p);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < p; ++j) d[t * p + j] = (t < k0 ? a[j] : b[j]) + noise * n(g);
  }
  return TimeSeries(T, p, d);
}

/// Exhaustive evaluation of the projected loss, written independently of the
/// prefix-sum implementation.
std::size_t naive_pls(const TimeSeries& y, const Vec& m1, const Vec& m2) {
  const std::size_t T = y.length(), p = y.dim();
  Vec eta(p);
  for (std::size_t j = 0; j < p; ++j) eta[j] = m1[j] - m2[j];
  double th1 = 0, th2 = 0;
  for (std::size_t j = 0; j < p; ++j) {
    th1 += eta[j] * m1[j];
    th2 += eta[j] * m2[j];
  }
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < T; ++k) {
    double v = 0;
    for (std::size_t t = 0; t < T; ++t) {
      double z = 0;
      for (std::size_t j = 0; j < p; ++j) z += eta[j] * y(t, j);
      const double th = t < k ? th1 : th2;
      v += (z - th) * (z - th);
    }
    v /= static_cast<double>(T);
    if (v < best_v - 1e-12) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST(LossProfile1d, HandExample) {
  const Vec prof = loss_profile_1d(Vec{0, 0, 1, 1}, 0.0, 1.0);
  ASSERT_EQ(prof.size(), 3u);
  EXPECT_DOUBLE_EQ(prof[0], 0.25);
  EXPECT_DOUBLE_EQ(prof[1], 0.0);
  EXPECT_DOUBLE_EQ(prof[2], 0.25);
}

TEST(LossProfile1d, AgreesWithLoss1dAtEveryGridPoint) {
  std::mt19937_64 g(20);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 50; ++rep) {
    Vec z(25);
    for (double& x : z) x = n(g);
    const double a = n(g), b = n(g);
    const Vec prof = loss_profile_1d(z, a, b);
    for (std::size_t k = 1; k < 25; ++k) EXPECT_NEAR(prof[k - 1], loss_1d(z, k, a, b), 1e-13);
  }
}

TEST(PlsEstimate, HandExample) {
  // Unit-coordinate means give eta = (1): z = Y, theta = (1, 0).
  const auto y = rows({{1}, {1}, {0}, {0}});
  const auto fit = pls_fit(y, MeanPair::from_means({1}, {0}));
  EXPECT_EQ(fit.estimate.k, 2u);
  EXPECT_DOUBLE_EQ(fit.theta1, 1.0);
  EXPECT_DOUBLE_EQ(fit.theta2, 0.0);
  EXPECT_EQ(fit.surrogate, (Vec{1, 1, 0, 0}));
  EXPECT_EQ(fit.loss_profile, (Vec{0.25, 0.0, 0.25}));
}

TEST(PlsEstimate, NoiselessTruthMeans) {
  const Vec a{1, 1, 0, 0, 0}, b{0, 0, 1, 1, 0};
  for (std::size_t k0 : {1u, 5u, 17u, 29u}) {
    const auto y = two_level(30, k0, a, b);
    EXPECT_EQ(pls_estimate(y, MeanPair::from_means(a, b)).k, k0);
  }
}

TEST(PlsEstimate, ZeroJumpIsDegenerate) {
  const auto y = rows({{1, 2}, {3, 4}, {5, 6}});
  try {
    pls_estimate(y, MeanPair::from_means({1, 1}, {1, 1}));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::degenerate_jump);
  }
  EXPECT_TRUE(is_zero_jump(MeanPair::from_means({1e6, 0}, {1e6 + 1e-7, 0})));
  EXPECT_FALSE(is_zero_jump(MeanPair::from_means({1, 0}, {1 + 1e-9, 0})));
  EXPECT_THROW(pls_estimate(y, MeanPair::from_means({1}, {2})), error);
}

TEST(PlsEstimate, MatchesExhaustiveSearchOnSmallInstances) {
  std::mt19937_64 g(21);
  std::uniform_int_distribution<std::size_t> Ts(2, 12), ps(1, 3);
  std::normal_distribution<double> n;
  int checked = 0;
  for (int rep = 0; rep < 3000; ++rep) {
    const std::size_t T = Ts(g), p = ps(g);
    Vec d(T * p), a(p), b(p);
    for (double& x : d) x = n(g);
    for (double& x : a) x = n(g);
    for (double& x : b) x = n(g);
    const TimeSeries y(T, p, d);
    const auto m = MeanPair::from_means(a, b);
    const std::size_t want = naive_pls(y, a, b);
    // Skip the rare instances where two grid points tie to rounding.
    const Vec prof = pls_fit(y, m).loss_profile;
    bool near_tie = false;
    for (std::size_t k = 1; k < T; ++k) {
      if (k != want && std::abs(prof[k - 1] - prof[want - 1]) < 1e-10) near_tie = true;
    }
    if (near_tie) continue;
    EXPECT_EQ(pls_estimate(y, m).k, want);
    ++checked;
  }
  EXPECT_GT(checked, 2900);
}

TEST(PlsEstimate, SwappedMeansMirrorTheGrid) {
  std::mt19937_64 g(22);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 100; ++rep) {
    const auto y = two_level(50, 20, {1, 0, 0.5}, {0, 1, 0}, 1.0, rep + 1);
    const Vec a{1 + 0.2 * n(g), 0.2 * n(g), 0.5}, b{0.2 * n(g), 1 + 0.2 * n(g), 0};
    const auto f = pls_fit(y, MeanPair::from_means(a, b));
    const auto r = pls_fit(y, MeanPair::from_means(b, a));
    // Swapping negates eta and the surrogate and swaps the levels.
    EXPECT_DOUBLE_EQ(f.theta1, -r.theta2);
    EXPECT_DOUBLE_EQ(f.theta2, -r.theta1);
    for (std::size_t i = 0; i < f.surrogate.size(); ++i) EXPECT_DOUBLE_EQ(f.surrogate[i], -r.surrogate[i]);
    // With time reversed as well the loss is the mirrored profile.
    Vec rev(y.data().size());
    for (std::size_t t = 0; t < 50; ++t) {
      for (std::size_t j = 0; j < 3; ++j) rev[t * 3 + j] = y(49 - t, j);
    }
    const auto m = pls_fit(TimeSeries(50, 3, rev), MeanPair::from_means(b, a));
    EXPECT_EQ(m.estimate.k, 50 - f.estimate.k);
    for (std::size_t k = 1; k < 50; ++k) EXPECT_NEAR(m.loss_profile[k - 1], f.loss_profile[49 - k], 1e-12);
  }
}

TEST(PlsEstimate, NegatedJumpDirectionLeavesArgminUnchanged) {
  // (mu1, mu2) -> (-mu1, -mu2) with the data negated is the same problem.
  std::mt19937_64 g(23);
  for (int rep = 0; rep < 100; ++rep) {
    const auto y = two_level(40, 13, {1, 0}, {0, 1}, 1.0, rep + 7);
    Vec neg(y.data());
    for (double& x : neg) x = -x;
    const TimeSeries yn(40, 2, neg);
    const auto a = pls_estimate(y, MeanPair::from_means({0.9, 0.1}, {0.05, 1.1}));
    const auto b = pls_estimate(yn, MeanPair::from_means({-0.9, -0.1}, {-0.05, -1.1}));
    EXPECT_EQ(a.k, b.k);
  }
}

TEST(PlsEstimate, ScalingInvariance) {
  for (int rep = 0; rep < 50; ++rep) {
    const auto y = two_level(60, 25, {1, 0, 0}, {0, 1, 0}, 1.0, rep + 100);
    const Vec a{0.8, 0, 0.05}, b{0, 0.9, 0};
    const std::size_t k = pls_estimate(y, MeanPair::from_means(a, b)).k;
    for (double c : {0.01, 3.0, 250.0}) {
      Vec d(y.data());
      for (double& x : d) x *= c;
      Vec ac(a), bc(b);
      for (double& x : ac) x *= c;
      for (double& x : bc) x *= c;
      EXPECT_EQ(pls_estimate(TimeSeries(60, 3, d), MeanPair::from_means(ac, bc)).k, k);
    }
  }
}

TEST(PlsEstimate, StepFunctionOfTau) {
  const auto y = two_level(37, 11, {1, 0}, {0, 1}, 0.7, 5);
  const auto m = MeanPair::from_means({1, 0}, {0, 1});
  const auto fit = pls_fit(y, m);
  for (double tau = 0.03; tau < 1.0; tau += 0.0137) {
    const std::size_t k = grid_index(37, tau);
    if (k < 1 || k > 36) continue;
    EXPECT_DOUBLE_EQ(loss_1d(fit.surrogate, k, fit.theta1, fit.theta2), fit.loss_profile[k - 1]);
  }
}

TEST(Pipeline, NoChangeCarriesNoInterval) {
  SimConfig c;
  c.T = 225;
  c.p = 100;
  c.tau0 = 1.0;
  PipelineOptions opt;
  opt.center = false;
  opt.critical_value = 11.03;
  const auto r = full_pipeline(gen_dataset(c, 0).y, opt);
  EXPECT_FALSE(r.changed());
  EXPECT_EQ(r.status, PipelineStatus::no_change);
  EXPECT_FALSE(r.pls.has_value());
  EXPECT_FALSE(r.inference.has_value());
}

TEST(Pipeline, NoiselessShiftCollapsesInterval) {
  const Vec a{1, 1, 1, 0, 0, 0, 0, 0}, b{0, 0, 0, 1, 1, 1, 0, 0};
  for (bool center : {false, true}) {
    const auto y = two_level(80, 30, a, b);
    PipelineOptions opt;
    opt.center = center;
    opt.critical_value = 11.03;
    const auto r = full_pipeline(y, opt);
    ASSERT_EQ(r.status, PipelineStatus::located) << center;
    EXPECT_EQ(r.pls->estimate.k, 30u);
    ASSERT_TRUE(r.inference.has_value());
    EXPECT_EQ(r.inference->sigma_sq_hat, 0.0);
    EXPECT_EQ(r.inference->interval_int, (std::pair<double, double>{30.0, 30.0}));
    EXPECT_TRUE(r.inference->covers_fraction(30.0 / 80.0));
  }
}

TEST(Pipeline, StagesStopWhereRequested) {
  const auto y = two_level(60, 20, {1, 1, 0}, {0, 0, 1}, 0.3, 9);
  PipelineOptions opt;
  opt.critical_value = 11.03;
  opt.stage = Stage::detect;
  auto r = full_pipeline(y, opt);
  EXPECT_EQ(r.status, PipelineStatus::detected);
  EXPECT_FALSE(r.pls.has_value());
  opt.stage = Stage::estimate;
  r = full_pipeline(y, opt);
  EXPECT_EQ(r.status, PipelineStatus::located);
  EXPECT_TRUE(r.pls.has_value());
  EXPECT_FALSE(r.inference.has_value());
  opt.stage = Stage::infer;
  r = full_pipeline(y, opt);
  EXPECT_TRUE(r.inference.has_value());
}

TEST(Pipeline, EqualRefinedMeansAreUnlocatable) {
  // Step 0 at k = 3 keeps a nonzero jump; at the detected k = 1 both
  // thresholded segment means vanish.
  const auto y = rows({{-1}, {-3}, {2}, {-1}, {-3}, {0}});
  PipelineOptions opt;
  opt.center = false;
  opt.tuning.lambda = 1.0;
  opt.gamma_off = true;
  opt.critical_value = 11.03;
  const auto r = full_pipeline(y, opt);
  EXPECT_TRUE(r.changed());
  EXPECT_EQ(r.detection.estimate.k, 1u);
  EXPECT_EQ(r.status, PipelineStatus::unlocatable);
  EXPECT_FALSE(r.pls.has_value());
}

TEST(Pipeline, ExplicitOverridesAreUsed) {
  const auto y = two_level(50, 20, {1, 0}, {0, 1}, 0.5, 4);
  PipelineOptions opt;
  opt.tuning.lambda = 0.123;
  opt.tuning.gamma = 0.0456;
  opt.critical_value = 11.03;
  const auto r = full_pipeline(y, opt);
  EXPECT_EQ(r.detection.lambda_used, 0.123);
  EXPECT_EQ(r.detection.gamma_used, 0.0456);
  EXPECT_EQ(*r.lambda_refined, 0.123);
  opt.gamma_off = true;
  EXPECT_EQ(full_pipeline(y, opt).detection.gamma_used, 0.0);
}

TEST(Pipeline, DoesNotMutateInput) {
  const auto y = two_level(40, 10, {2, 0}, {0, 2}, 0.5, 2);
  const TimeSeries copy = y;
  PipelineOptions opt;
  opt.critical_value = 11.03;
  (void)full_pipeline(y, opt);
  EXPECT_EQ(y, copy);
}
