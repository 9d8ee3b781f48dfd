#pragma once

// Noll-indexed Zernike polynomials with unit-RMS normalisation over the unit disk.

#include <charconv>
#include <fstream>
#include <set>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "phase_mask.hpp"

namespace tweezerlab {

struct NollIndex {
  int n = 0;
  int m = 0;  // signed: m > 0 cosine, m < 0 sine
};

inline NollIndex noll_to_nm(int j) {
  if (j < 1) throw ConfigError("Noll index must be >= 1");
  int n = 0;
  while ((n + 1) * (n + 2) / 2 < j) ++n;
  const int k = j - n * (n + 1) / 2;
  const int am = (n % 2 == 0) ? 2 * (k / 2) : 2 * ((k - 1) / 2) + 1;
  if (am == 0) return {n, 0};
  return {n, (j % 2 == 0) ? am : -am};
}

/// Number of polynomials with radial order <= max_order.
inline int noll_count(int max_order) { return (max_order + 1) * (max_order + 2) / 2; }

inline double zernike_radial(int n, int am, double rho) {
  double sum = 0.0;
  for (int s = 0; s <= (n - am) / 2; ++s) {
    const double num = ((s % 2) ? -1.0 : 1.0) * std::tgamma(n - s + 1.0);
    const double den = std::tgamma(s + 1.0) * std::tgamma((n + am) / 2 - s + 1.0) * std::tgamma((n - am) / 2 - s + 1.0);
    sum += num / den * std::pow(rho, n - 2 * s);
  }
  return sum;
}

inline double zernike_eval(int j, double rho, double theta) {
  if (!(rho >= 0.0 && rho <= 1.0 + 1e-12)) throw ConfigError("zernike_eval requires 0 <= rho <= 1");
  const auto [n, m] = noll_to_nm(j);
  const int am = std::abs(m);
  const double norm = (m == 0) ? std::sqrt(n + 1.0) : std::sqrt(2.0 * (n + 1.0));
  const double radial = zernike_radial(n, am, rho);
  if (m == 0) return norm * radial;
  return norm * radial * (m > 0 ? std::cos(am * theta) : std::sin(am * theta));
}

struct ZernikeTerm {
  int j = 0;
  int n = 0;
  int m = 0;
  double coeff = 0.0;  // rad
};

struct ZernikeCoefficients {
  std::vector<ZernikeTerm> terms;  // j >= 2
  double piston = 0.0;
  double residual_rms = 0.0;
  int max_order = 0;

  static ZernikeCoefficients from_values(const std::vector<std::pair<int, double>>& values) {
    ZernikeCoefficients c;
    for (const auto& [j, v] : values) {
      if (!std::isfinite(v)) throw ConfigError("Zernike coefficient is not finite");
      if (j == 1) {
        c.piston = v;
        continue;
      }
      const auto nm = noll_to_nm(j);
      c.terms.push_back({j, nm.n, nm.m, v});
      c.max_order = std::max(c.max_order, nm.n);
    }
    return c;
  }

  double coefficient(int j) const {
    if (j == 1) return piston;
    for (const auto& t : terms)
      if (t.j == j) return t.coeff;
    return 0.0;
  }

  double sum_of_squares() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.coeff * t.coeff;
    return s;
  }

  double order_sum_of_squares(int n) const {
    double s = 0.0;
    for (const auto& t : terms)
      if (t.n == n) s += t.coeff * t.coeff;
    return s;
  }
};

/// Polar coordinates of a pixel on the inscribed unit disk of the mask.
struct DiskPoint {
  int row = 0;
  int col = 0;
  double rho = 0.0;
  double theta = 0.0;
};

inline std::vector<DiskPoint> disk_points(const MaskGeometry& g) {
  std::vector<DiskPoint> pts;
  const double radius = g.inscribed_radius();
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double x = g.x(c) / radius;
      const double y = g.y(r) / radius;
      const double rho = std::hypot(x, y);
      if (rho <= 1.0) pts.push_back({r, c, rho, std::atan2(y, x)});
    }
  }
  return pts;
}

/// Sum c_j Z_j over the inscribed disk, zero outside.
inline PhaseMask inject_aberration(const ZernikeCoefficients& coeffs, const MaskGeometry& g) {
  PhaseMask mask(g);
  for (const auto& p : disk_points(g)) {
    double v = coeffs.piston;
    for (const auto& t : coeffs.terms) v += t.coeff * zernike_eval(t.j, p.rho, p.theta);
    mask.at(p.row, p.col) = v;
  }
  return mask;
}

/// Least-squares fit of sampled values on the unit disk. Piston is fitted
/// jointly and reported separately.
inline ZernikeCoefficients zernike_fit_samples(const std::vector<double>& rho, const std::vector<double>& theta,
                                               const std::vector<double>& values, int max_order,
                                               const std::vector<double>* weights = nullptr) {
  if (max_order < 0) throw ConfigError("max_order must be non-negative");
  const auto n_samples = static_cast<Eigen::Index>(values.size());
  const int n_terms = noll_count(max_order);
  if (rho.size() != values.size() || theta.size() != values.size())
    throw DimensionMismatch("sample vectors differ in length");
  if (n_samples < n_terms) throw RankDeficient("fewer disk samples than Zernike terms");

  RMatrix A(n_samples, n_terms);
  RVector b(n_samples);
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    const double w = weights ? std::sqrt((*weights)[static_cast<std::size_t>(i)]) : 1.0;
    for (int j = 1; j <= n_terms; ++j)
      A(i, j - 1) = w * zernike_eval(j, rho[static_cast<std::size_t>(i)], theta[static_cast<std::size_t>(i)]);
    b(i) = w * values[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<RMatrix> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < n_terms) throw RankDeficient("Zernike design matrix is rank deficient at this order");
  const RVector x = qr.solve(b);

  ZernikeCoefficients out;
  out.max_order = max_order;
  out.piston = x(0);
  for (int j = 2; j <= n_terms; ++j) {
    const auto nm = noll_to_nm(j);
    out.terms.push_back({j, nm.n, nm.m, x(j - 1)});
  }
  out.residual_rms = std::sqrt((A * x - b).squaredNorm() / static_cast<double>(n_samples));
  return out;
}

/// Fit of a phase pattern over the inscribed disk of its mask.
inline ZernikeCoefficients zernike_fit(const PhaseMask& pattern, int max_order) {
  std::vector<double> rho, theta, values;
  for (const auto& p : disk_points(pattern.geometry())) {
    rho.push_back(p.rho);
    theta.push_back(p.theta);
    values.push_back(pattern.at(p.row, p.col));
  }
  return zernike_fit_samples(rho, theta, values, max_order);
}

/// Partial sum over the selected radial orders; order 0 restores the piston.
inline PhaseMask order_reconstruct(const ZernikeCoefficients& coeffs, const std::set<int>& orders, const MaskGeometry& g) {
  ZernikeCoefficients sel;
  if (orders.count(0)) sel.piston = coeffs.piston;
  for (const auto& t : coeffs.terms)
    if (orders.count(t.n)) sel.terms.push_back(t);
  return inject_aberration(sel, g);
}

/// Coefficients rescaled so the wavefront RMS over the disk (piston excluded) equals rms.
inline ZernikeCoefficients scaled_to_rms(ZernikeCoefficients coeffs, double rms) {
  const double ss = coeffs.sum_of_squares();
  if (!(ss > 0.0)) throw ConfigError("cannot rescale an empty aberration");
  for (auto& t : coeffs.terms) t.coeff *= rms / std::sqrt(ss);
  return coeffs;
}

/// Fixed mix of tilt, defocus, astigmatism, coma and trefoil used by the demos
/// and acceptance runs, at the requested RMS.
inline ZernikeCoefficients reference_aberration(double rms) {
  return scaled_to_rms(ZernikeCoefficients::from_values(
                           {{2, 0.3}, {3, -0.2}, {4, 0.6}, {5, 0.5}, {6, -0.7}, {7, 0.4}, {8, -0.3}, {9, 0.3}, {10, 0.2}}),
                       rms);
}

inline void write_zernike_csv(std::ostream& out, const ZernikeCoefficients& coeffs) {
  out << "j,n,m,coeff_rad\n";
  char buf[64];
  for (const auto& t : coeffs.terms) {
    auto res = std::to_chars(buf, buf + sizeof(buf), t.coeff);
    out << t.j << ',' << t.n << ',' << t.m << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
}

/// Closed-loop refinement over a few coefficients; not implemented.
inline ZernikeCoefficients refine_coefficients_iteratively(const ZernikeCoefficients&) {
  throw std::logic_error("iterative Zernike refinement is not implemented");
}

}  // namespace tweezerlab
