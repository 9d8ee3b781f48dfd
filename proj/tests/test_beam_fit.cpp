#include <gtest/gtest.h>

#include <random>

#include "tweezerlab/beam_fit.hpp"

using namespace tweezerlab;

namespace {

struct Grid {
  std::vector<double> y, z;
};

Grid square_grid(int n, double half) {
  Grid g;
  for (int k = 0; k < n; ++k) {
    const double t = -half + 2 * half * k / (n - 1);
    g.y.push_back(t);
    g.z.push_back(t);
  }
  return g;
}

RMatrix gaussian_map(const Grid& g, double amp, double off, double yc, double zc, double w1, double w2, double th) {
  RMatrix m(static_cast<Eigen::Index>(g.z.size()), static_cast<Eigen::Index>(g.y.size()));
  for (std::size_t r = 0; r < g.z.size(); ++r)
    for (std::size_t c = 0; c < g.y.size(); ++c) {
      const double dy = g.y[c] - yc, dz = g.z[r] - zc;
      const double u = dy * std::cos(th) + dz * std::sin(th);
      const double v = -dy * std::sin(th) + dz * std::cos(th);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          off + amp * std::exp(-2 * (u * u / (w1 * w1) + v * v / (w2 * w2)));
    }
  return m;
}

}  // namespace

TEST(GaussianFit2D, NoiselessRoundTrip) {
  const auto g = square_grid(25, 6e-6);
  const auto map = gaussian_map(g, 1000, 20, 0.3e-6, -0.2e-6, 2.3e-6, 2.0e-6, 0.4);
  const auto fit = fit_gaussian_2d(map, g.y, g.z);
  EXPECT_NEAR(fit.w1 / 2.3e-6, 1.0, 1e-6);
  EXPECT_NEAR(fit.w2 / 2.0e-6, 1.0, 1e-6);
  EXPECT_NEAR(fit.orientation, 0.4, 1e-5);
  EXPECT_NEAR(fit.center_y, 0.3e-6, 1e-12);
  EXPECT_NEAR(fit.offset, 20, 1e-4);
  EXPECT_FALSE(fit.orientation_unconstrained);
}

TEST(GaussianFit2D, RecoversIsotropicWaistAndFlagsOrientation) {
  const auto g = square_grid(21, 6e-6);
  const auto fit = fit_gaussian_2d(gaussian_map(g, 500, 0, 0, 0, 2.3e-6, 2.3e-6, 0), g.y, g.z);
  EXPECT_NEAR(fit.w1 / 2.3e-6, 1.0, 0.01);
  EXPECT_NEAR(fit.w2 / 2.3e-6, 1.0, 0.01);
  EXPECT_TRUE(fit.orientation_unconstrained);
}

TEST(GaussianFit2D, WaistOrderingAndAngleRange) {
  const auto g = square_grid(25, 10e-6);
  const auto fit = fit_gaussian_2d(gaussian_map(g, 100, 5, 0, 0, 2e-6, 4e-6, 2.9), g.y, g.z);
  EXPECT_GE(fit.w1, fit.w2);
  EXPECT_NEAR(fit.w1 / 4e-6, 1.0, 1e-5);
  EXPECT_GE(fit.orientation, 0.0);
  EXPECT_LT(fit.orientation, kPi);
  // w1 lies along 2.9 + pi/2 modulo pi
  EXPECT_NEAR(std::remainder(fit.orientation - (2.9 + kPi / 2), kPi), 0.0, 1e-4);
}

TEST(GaussianFit2D, PoissonNoiseAtTenThousandCounts) {
  const auto g = square_grid(21, 6e-6);
  const auto truth = gaussian_map(g, 1e4, 50, 0, 0, 2.6e-6, 2.2e-6, 0.7);
  int within = 0;
  for (unsigned seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    RMatrix noisy = truth;
    for (Eigen::Index k = 0; k < noisy.size(); ++k) noisy(k) = std::poisson_distribution<long>(truth(k))(rng);
    const auto fit = fit_gaussian_2d(noisy, g.y, g.z);
    if (std::abs(fit.w1 / 2.6e-6 - 1) < 0.05 && std::abs(fit.w2 / 2.2e-6 - 1) < 0.05) ++within;
  }
  EXPECT_EQ(within, 100);
}

TEST(GaussianFit2D, DegenerateAndUndersizedMaps) {
  const auto g = square_grid(8, 5e-6);
  RMatrix flat = RMatrix::Constant(8, 8, 3.0);
  EXPECT_THROW(fit_gaussian_2d(flat, g.y, g.z), DegenerateMap);
  const auto small = square_grid(5, 5e-6);
  EXPECT_THROW(fit_gaussian_2d(RMatrix::Ones(5, 5), small.y, small.z), DegenerateMap);
}

TEST(SkewGaussian, ModeEquationSolution) {
  for (double alpha : {-4.0, -1.0, 0.5, 3.0}) {
    const double t = skew_normal_mode(alpha);
    // Oracle: dense scan of the density.
    double best = -1, arg = 0;
    for (double s = -3; s <= 3; s += 1e-5) {
      const double v = std_normal_pdf(s) * std_normal_cdf(alpha * s);
      if (v > best) {
        best = v;
        arg = s;
      }
    }
    EXPECT_NEAR(t, arg, 2e-5);
  }
  EXPECT_EQ(skew_normal_mode(0.0), 0.0);
}

TEST(SkewGaussian, SymmetricProfileModeIsLocation) {
  std::vector<double> z, v;
  for (int k = 0; k < 41; ++k) {
    z.push_back(-8e-6 + 16e-6 * k / 40);
    v.push_back(skew_gaussian(z.back(), 300, 0.5e-6, 2e-6, 0.0, 10));
  }
  const auto fit = fit_skew_gaussian_1d(v, z);
  EXPECT_NEAR(fit.mode, 0.5e-6, 1e-3 * 2e-6);
  EXPECT_NEAR(fit.location, 0.5e-6, 1e-3 * 2e-6);
  EXPECT_NEAR(fit.skew, 0.0, 1e-3);
}

TEST(SkewGaussian, SkewedProfileModeRecovered) {
  const double mu = -1e-6, sigma = 2.5e-6, alpha = 2.5;
  std::vector<double> z, v;
  for (int k = 0; k < 61; ++k) {
    z.push_back(-12e-6 + 24e-6 * k / 60);
    v.push_back(skew_gaussian(z.back(), 1000, mu, sigma, alpha, 30));
  }
  const auto fit = fit_skew_gaussian_1d(v, z);
  const double true_mode = mu + sigma * skew_normal_mode(alpha);
  EXPECT_NEAR(fit.mode, true_mode, 0.02 * sigma);
  EXPECT_NEAR(fit.skew, alpha, 0.05);
}

TEST(SkewGaussian, TooFewSamples) {
  EXPECT_THROW(fit_skew_gaussian_1d({1, 2, 3}, {0, 1, 2}), NoConvergence);
}
