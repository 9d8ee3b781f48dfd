#pragma once

// Rotated elliptical Gaussian and skew-normal profile fits.

#include <algorithm>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "core.hpp"
#include "least_squares.hpp"
#include "optics.hpp"

namespace tweezerlab {

struct GaussianFit2D {
  double center_y = 0.0;
  double center_z = 0.0;
  double w1 = 0.0;  // 1/e^2 intensity radii, w1 >= w2
  double w2 = 0.0;
  double orientation = 0.0;  // angle of the w1 axis from +y, in [0, pi)
  double amplitude = 0.0;
  double offset = 0.0;
  bool orientation_unconstrained = false;
  RMatrix covariance;  // over (offset, amplitude, y, z, w1, w2, orientation)
  int iterations = 0;

  double w1_err() const { return std::sqrt(std::max(0.0, covariance(4, 4))); }
  double w2_err() const { return std::sqrt(std::max(0.0, covariance(5, 5))); }
  double ellipticity() const { return w1 / w2; }
};

namespace detail {
inline double gauss2d(const RVector& p, double y, double z) {
  const double c = std::cos(p(6)), s = std::sin(p(6));
  const double dy = y - p(2), dz = z - p(3);
  const double u = dy * c + dz * s;
  const double v = -dy * s + dz * c;
  return p(0) + p(1) * std::exp(-2.0 * (u * u / (p(4) * p(4)) + v * v / (p(5) * p(5))));
}
}  // namespace detail

/// Fit of C + A exp(-2 (u^2/w1^2 + v^2/w2^2)) to scattered samples.
inline GaussianFit2D fit_gaussian_2d(const std::vector<double>& y, const std::vector<double>& z,
                                     const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (y.size() != n || z.size() != n) throw DimensionMismatch("coordinate and value counts differ");
  if (n < 36) throw DegenerateMap("a 2D Gaussian fit needs at least 6x6 samples");

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double c0 = sorted[n / 10];
  const double vmax = sorted.back();
  const double a0 = vmax - c0;
  if (!(a0 > 0.0)) throw DegenerateMap("map maximum does not exceed the offset estimate");

  // Moments of the background-subtracted map.
  double sw = 0, sy = 0, sz = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::max(0.0, values[k] - c0);
    sw += w;
    sy += w * y[k];
    sz += w * z[k];
  }
  const double my = sy / sw, mz = sz / sw;
  double syy = 0, szz = 0, syz = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::max(0.0, values[k] - c0);
    syy += w * (y[k] - my) * (y[k] - my);
    szz += w * (z[k] - mz) * (z[k] - mz);
    syz += w * (y[k] - my) * (z[k] - mz);
  }
  Eigen::Matrix2d cov;
  cov << syy / sw, syz / sw, syz / sw, szz / sw;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const double l1 = std::max(es.eigenvalues()(1), 1e-30);
  const double l2 = std::max(es.eigenvalues()(0), 1e-30);
  const Eigen::Vector2d e1 = es.eigenvectors().col(1);

  RVector p0(7);
  p0 << c0, a0, my, mz, 2.0 * std::sqrt(l1), 2.0 * std::sqrt(l2), std::atan2(e1(1), e1(0));

  // Fit in units of the initial amplitude and waist so every parameter is O(1).
  const double ws = std::max(std::abs(p0(4)), 1e-30);
  RVector scale(7);
  scale << a0, a0, ws, ws, ws, ws, 1.0;
  const RVector q0 = p0.cwiseQuotient(scale);
  ResidualFn f = [&](const RVector& q, RVector& r) {
    const RVector p = q.cwiseProduct(scale);
    for (std::size_t k = 0; k < n; ++k)
      r(static_cast<Eigen::Index>(k)) = (detail::gauss2d(p, y[k], z[k]) - values[k]) / a0;
  };
  const auto res = levenberg_marquardt(f, q0, static_cast<Eigen::Index>(n));
  const RVector p = res.x.cwiseProduct(scale);
  RMatrix covp = scale.asDiagonal() * res.covariance * scale.asDiagonal();

  GaussianFit2D fit;
  fit.offset = p(0);
  fit.amplitude = p(1);
  fit.center_y = p(2);
  fit.center_z = p(3);
  double w1 = std::abs(p(4)), w2 = std::abs(p(5)), th = p(6);
  if (w1 < w2) {
    std::swap(w1, w2);
    th += 0.5 * kPi;
    covp.row(4).swap(covp.row(5));
    covp.col(4).swap(covp.col(5));
  }
  th = std::fmod(th, kPi);
  if (th < 0) th += kPi;
  fit.w1 = w1;
  fit.w2 = w2;
  fit.orientation = th;
  fit.covariance = covp;
  fit.iterations = res.iterations;
  const double diff_err = std::sqrt(std::max(0.0, covp(4, 4) + covp(5, 5) - 2.0 * covp(4, 5)));
  fit.orientation_unconstrained = (w1 - w2) <= std::max(2.0 * diff_err, 1e-6 * w1);
  if (!(w2 > 0.0) || !std::isfinite(w1)) throw NoConvergence("2D Gaussian fit produced a non-positive waist");
  return fit;
}

/// Grid overload: values(row, col) at (y[col], z[row]).
inline GaussianFit2D fit_gaussian_2d(const RMatrix& map, const std::vector<double>& y_coords,
                                     const std::vector<double>& z_coords) {
  if (static_cast<std::size_t>(map.cols()) != y_coords.size() || static_cast<std::size_t>(map.rows()) != z_coords.size())
    throw DimensionMismatch("map shape does not match coordinates");
  if (map.rows() < 6 || map.cols() < 6) throw DegenerateMap("a 2D Gaussian fit needs at least 6x6 samples");
  std::vector<double> y, z, v;
  for (Eigen::Index r = 0; r < map.rows(); ++r)
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
      y.push_back(y_coords[static_cast<std::size_t>(c)]);
      z.push_back(z_coords[static_cast<std::size_t>(r)]);
      v.push_back(map(r, c));
    }
  return fit_gaussian_2d(y, z, v);
}

struct SkewGaussianFit {
  double location = 0.0;  // mu
  double scale = 0.0;     // sigma
  double skew = 0.0;      // alpha
  double amplitude = 0.0;
  double offset = 0.0;
  double mode = 0.0;      // apparent centre
  double cost = 0.0;
};

inline double std_normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(kTwoPi); }
inline double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

inline double skew_gaussian(double z, double a, double mu, double sigma, double alpha, double b) {
  const double t = (z - mu) / sigma;
  return a * std_normal_pdf(t) * std_normal_cdf(alpha * t) + b;
}

/// Standardised mode t* of phi(t) Phi(alpha t): alpha phi(alpha t) = t Phi(alpha t).
inline double skew_normal_mode(double alpha) {
  if (alpha == 0.0) return 0.0;
  auto g = [alpha](double t) { return alpha * std_normal_pdf(alpha * t) - t * std_normal_cdf(alpha * t); };
  const double lo = alpha > 0 ? 0.0 : -1.0;
  const double hi = alpha > 0 ? 1.0 : 0.0;
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

/// Fit of A phi((z-mu)/sigma) Phi(alpha (z-mu)/sigma) + b.
inline SkewGaussianFit fit_skew_gaussian_1d(const std::vector<double>& profile, const std::vector<double>& coords) {
  const std::size_t n = profile.size();
  if (coords.size() != n) throw DimensionMismatch("profile and coordinate counts differ");
  if (n < 8) throw NoConvergence("skew Gaussian fit needs at least 8 samples");

  const auto imax = static_cast<std::size_t>(std::max_element(profile.begin(), profile.end()) - profile.begin());
  const double b0 = *std::min_element(profile.begin(), profile.end());
  const double peak = profile[imax] - b0;
  double sw = 0, sz = 0, szz = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::max(0.0, profile[k] - b0);
    sw += w;
    sz += w * coords[k];
  }
  if (!(sw > 0.0) || !(peak > 0.0)) throw NoConvergence("flat profile");
  const double mean = sz / sw;
  for (std::size_t k = 0; k < n; ++k) szz += std::max(0.0, profile[k] - b0) * (coords[k] - mean) * (coords[k] - mean);
  const double sigma0 = std::max(std::sqrt(szz / sw), 1e-3 * std::abs(coords.back() - coords.front()));

  ResidualFn f = [&](const RVector& q, RVector& r) {
    // q = (A/peak, mu/sigma0, log(sigma/sigma0), alpha, b/peak)
    for (std::size_t k = 0; k < n; ++k)
      r(static_cast<Eigen::Index>(k)) =
          (skew_gaussian(coords[k], q(0) * peak, q(1) * sigma0, sigma0 * std::exp(q(2)), q(3), q(4) * peak) -
           profile[k]) / peak;
  };

  SkewGaussianFit best;
  bool have = false;
  for (double alpha0 : {0.0, 2.0, -2.0}) {
    RVector q0(5);
    const double mu0 = alpha0 == 0.0 ? coords[imax] : coords[imax] - 0.5 * sigma0 * (alpha0 > 0 ? 1 : -1);
    const double a0 = peak / (std_normal_pdf(0.0) * (alpha0 == 0.0 ? 0.5 : 0.8));
    q0 << a0 / peak, mu0 / sigma0, 0.0, alpha0, b0 / peak;
    LeastSquaresResult res;
    try {
      res = levenberg_marquardt(f, q0, static_cast<Eigen::Index>(n));
    } catch (const NoConvergence&) {
      continue;
    }
    if (!have || res.cost < best.cost) {
      have = true;
      best.amplitude = res.x(0) * peak;
      best.location = res.x(1) * sigma0;
      best.scale = sigma0 * std::exp(res.x(2));
      best.skew = res.x(3);
      best.offset = res.x(4) * peak;
      best.cost = res.cost;
    }
  }
  if (!have) throw NoConvergence("skew Gaussian fit failed from every starting point");
  best.mode = best.location + best.scale * skew_normal_mode(best.skew);
  return best;
}

/// Gaussian fit to a sampled focal intensity within half_width of its peak.
inline GaussianFit2D fit_focal_spot(const ComplexField& f, double half_width) {
  const Eigen::Vector2d pk = f.peak_position();
  std::vector<double> y, z, v;
  for (Eigen::Index r = 0; r < f.samples.rows(); ++r) {
    if (std::abs(f.z(r) - pk.y()) > half_width) continue;
    for (Eigen::Index c = 0; c < f.samples.cols(); ++c) {
      if (std::abs(f.y(c) - pk.x()) > half_width) continue;
      y.push_back(f.y(c));
      z.push_back(f.z(r));
      v.push_back(std::norm(f.samples(r, c)));
    }
  }
  return fit_gaussian_2d(y, z, v);
}

}  // namespace tweezerlab
