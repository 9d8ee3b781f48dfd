#pragma once

// Tweezer Rabi profile from detuning sweeps: counts = a_z * Gamma_sc(Omega_z, Delta) + b
// with one background b shared by every position.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ion_probe.hpp"
#include "least_squares.hpp"
#include "parallel.hpp"
#include "ten_level.hpp"

namespace tweezerlab {

struct DetuningSweep {
  double z = 0.0;
  std::vector<double> detunings;  // rad/s
  std::vector<double> counts;
};

struct RabiFitOptions {
  double omega_min = mhz(0.3);
  double omega_max = mhz(4000.0);
  int grid_points = 48;
  double signal_threshold = 3.0;  // peak signal / shot noise below which a slice is dark
  double max_relative_error = 0.5;
  double max_correlation = 0.99;
  int threads = 1;
  LeastSquaresOptions lm{100, 1e-8, 1e-8};
};

struct RabiProfile {
  std::vector<double> z;
  std::vector<double> omega;
  std::vector<double> omega_err;
  std::vector<double> amplitude;
  std::vector<double> amplitude_err;
  std::vector<bool> flagged;  // dark or poorly identified
  double background = 0.0;
  double background_err = 0.0;
  RMatrix covariance;  // over (log Omega_active..., a_active..., b), scaled units
  bool identifiability_warning = false;
  std::vector<std::string> warnings;
  double cost = 0.0;
  int iterations = 0;
};

namespace detail {
// Gamma_sc / Gamma_P for the tweezer at (omega, delta), other parameters from base.
inline double rabi_model_rate(const TenLevelParams& base, double omega, double delta) {
  if (omega <= 0.0) return 0.0;
  auto p = base;
  p.tweezer.rabi = omega;
  p.tweezer.detuning = delta;
  try {
    return fluorescence_10level(p) / base.gamma_p;
  } catch (const DegenerateSteadyState&) {
    return 0.0;
  }
}
}  // namespace detail

/// Joint fit over all slices. Slices without signal above shot noise are
/// reported as Omega = 0 and flagged; their counts still inform b.
inline RabiProfile extract_rabi_profile(const std::vector<DetuningSweep>& data, const TenLevelParams& base,
                                        const RabiFitOptions& opt = {}) {
  if (data.empty()) throw ConfigError("no detuning sweeps supplied");
  for (const auto& s : data) {
    if (s.detunings.size() != s.counts.size()) throw DimensionMismatch("detuning and count lengths differ");
    if (s.detunings.size() < 5) throw ConfigError("each position needs at least 5 detuning samples");
  }
  const std::size_t nz = data.size();

  // Model table over a log-spaced Omega grid and every distinct detuning.
  std::map<double, std::size_t> det_index;
  for (const auto& s : data)
    for (double d : s.detunings) det_index.emplace(d, 0);
  std::vector<double> dets;
  for (auto& [d, idx] : det_index) {
    idx = dets.size();
    dets.push_back(d);
  }
  const int ng = opt.grid_points;
  std::vector<double> omegas(static_cast<std::size_t>(ng));
  for (int g = 0; g < ng; ++g)
    omegas[static_cast<std::size_t>(g)] =
        opt.omega_min * std::pow(opt.omega_max / opt.omega_min, static_cast<double>(g) / (ng - 1));
  RMatrix table(ng, static_cast<Eigen::Index>(dets.size()));
  parallel_for(static_cast<std::size_t>(ng) * dets.size(), opt.threads, [&](std::size_t k) {
    const auto g = static_cast<Eigen::Index>(k / dets.size());
    const auto d = static_cast<Eigen::Index>(k % dets.size());
    table(g, d) = detail::rabi_model_rate(base, omegas[static_cast<std::size_t>(g)], dets[static_cast<std::size_t>(d)]);
  });

  // Grid search: for each trial b, each slice picks its best (Omega, a >= 0).
  double cmin = std::numeric_limits<double>::infinity();
  for (const auto& s : data)
    for (double c : s.counts) cmin = std::min(cmin, c);
  struct Pick {
    int g = 0;
    double a = 0.0;
    double cost = 0.0;
  };
  auto best_for_slice = [&](const DetuningSweep& s, double b) {
    Pick best;
    best.cost = std::numeric_limits<double>::infinity();
    for (int g = 0; g < ng; ++g) {
      double sgg = 0, sgc = 0;
      for (std::size_t k = 0; k < s.counts.size(); ++k) {
        const double w = 1.0 / std::max(s.counts[k], 1.0);
        const double gv = table(g, static_cast<Eigen::Index>(det_index.at(s.detunings[k])));
        sgg += w * gv * gv;
        sgc += w * gv * (s.counts[k] - b);
      }
      const double a = sgg > 0 ? std::max(0.0, sgc / sgg) : 0.0;
      double cost = 0;
      for (std::size_t k = 0; k < s.counts.size(); ++k) {
        const double gv = table(g, static_cast<Eigen::Index>(det_index.at(s.detunings[k])));
        const double r = s.counts[k] - a * gv - b;
        cost += r * r / std::max(s.counts[k], 1.0);
      }
      if (cost < best.cost) best = {g, a, cost};
    }
    return best;
  };
  double b0 = 0.0;
  std::vector<Pick> picks(nz);
  {
    double best_total = std::numeric_limits<double>::infinity();
    const int nb = 24;
    for (int ib = 0; ib <= nb; ++ib) {
      const double b = std::max(0.0, cmin) * ib / nb;
      std::vector<Pick> trial(nz);
      double total = 0;
      for (std::size_t i = 0; i < nz; ++i) {
        trial[i] = best_for_slice(data[i], b);
        total += trial[i].cost;
      }
      if (total < best_total) {
        best_total = total;
        b0 = b;
        picks = trial;
      }
    }
  }

  RabiProfile out;
  out.z.resize(nz);
  out.omega.assign(nz, 0.0);
  out.omega_err.assign(nz, 0.0);
  out.amplitude.assign(nz, 0.0);
  out.amplitude_err.assign(nz, 0.0);
  out.flagged.assign(nz, false);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < nz; ++i) {
    out.z[i] = data[i].z;
    double gmax = 0.0;
    for (double d : data[i].detunings)
      gmax = std::max(gmax, table(picks[i].g, static_cast<Eigen::Index>(det_index.at(d))));
    const double snr = picks[i].a * gmax / std::sqrt(b0 + 1.0);
    if (snr < opt.signal_threshold) {
      out.flagged[i] = true;
      out.identifiability_warning = true;
      out.warnings.push_back("no signal above shot noise at z = " + std::to_string(data[i].z));
    } else {
      active.push_back(i);
    }
  }

  // Parameters: log(Omega / omega_min) per active slice, a / a_scale, b / a_scale.
  const std::size_t na = active.size();
  double a_scale = 1.0;
  for (std::size_t i : active) a_scale = std::max(a_scale, picks[i].a);
  RVector x0(static_cast<Eigen::Index>(2 * na + 1));
  for (std::size_t k = 0; k < na; ++k) {
    x0(static_cast<Eigen::Index>(k)) = std::log(omegas[static_cast<std::size_t>(picks[active[k]].g)] / opt.omega_min);
    x0(static_cast<Eigen::Index>(na + k)) = picks[active[k]].a / a_scale;
  }
  x0(static_cast<Eigen::Index>(2 * na)) = b0 / a_scale;

  std::vector<std::size_t> offset(nz + 1, 0);
  for (std::size_t i = 0; i < nz; ++i) offset[i + 1] = offset[i] + data[i].counts.size();
  const auto m = static_cast<Eigen::Index>(offset[nz]);
  std::vector<long> slot(nz, -1);
  for (std::size_t k = 0; k < na; ++k) slot[active[k]] = static_cast<long>(k);

  // Model rates for all samples at the given log-Omega vector (dark slices use 0).
  // log Omega is held just outside the grid so a slice with no signal left
  // stalls there instead of running away; such slices are flagged below.
  const double q_hi = std::log(opt.omega_max / opt.omega_min) + 0.5;
  auto rates = [&](const RVector& x, double shift) {
    std::vector<double> g(static_cast<std::size_t>(m), 0.0);
    parallel_for(na, opt.threads, [&](std::size_t k) {
      const std::size_t i = active[k];
      const double q = std::clamp(x(static_cast<Eigen::Index>(k)), -0.5, q_hi);
      const double om = opt.omega_min * std::exp(q + shift);
      for (std::size_t j = 0; j < data[i].counts.size(); ++j)
        g[offset[i] + j] = detail::rabi_model_rate(base, om, data[i].detunings[j]);
    });
    return g;
  };
  auto sigma = [&](std::size_t i, std::size_t j) { return std::sqrt(std::max(data[i].counts[j], 1.0)); };

  // The Jacobian is requested at the point f last accepted, so keep those rates.
  RVector cached_x;
  std::vector<double> cached_g;
  auto rates_at = [&](const RVector& x) -> const std::vector<double>& {
    if (cached_x.size() != x.size() || cached_x != x) {
      cached_g = rates(x, 0.0);
      cached_x = x;
    }
    return cached_g;
  };

  ResidualFn f = [&](const RVector& x, RVector& r) {
    const auto& g = rates_at(x);
    const double b = x(static_cast<Eigen::Index>(2 * na)) * a_scale;
    for (std::size_t i = 0; i < nz; ++i) {
      const double a = slot[i] >= 0 ? x(static_cast<Eigen::Index>(na + static_cast<std::size_t>(slot[i]))) * a_scale : 0.0;
      for (std::size_t j = 0; j < data[i].counts.size(); ++j)
        r(static_cast<Eigen::Index>(offset[i] + j)) = (a * g[offset[i] + j] + b - data[i].counts[j]) / sigma(i, j);
    }
  };
  // The Omega columns are block diagonal, so one shifted evaluation gives all
  // of them. Forward differences: a relative step of 1e-6 in Omega is far
  // below the statistical resolution.
  const double h = 1e-6;
  JacobianFn jac = [&](const RVector& x, RMatrix& J) {
    J.setZero(m, x.size());
    const auto g0 = rates_at(x);
    const auto gp = rates(x, h);
    for (std::size_t i = 0; i < nz; ++i) {
      for (std::size_t j = 0; j < data[i].counts.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(offset[i] + j);
        const double s = sigma(i, j);
        if (slot[i] >= 0) {
          const auto k = static_cast<Eigen::Index>(slot[i]);
          const double a = x(static_cast<Eigen::Index>(na) + k) * a_scale;
          J(row, k) = a * (gp[offset[i] + j] - g0[offset[i] + j]) / h / s;
          J(row, static_cast<Eigen::Index>(na) + k) = a_scale * g0[offset[i] + j] / s;
        }
        J(row, static_cast<Eigen::Index>(2 * na)) = a_scale / s;
      }
    }
  };

  const auto res = levenberg_marquardt(f, x0, m, jac, opt.lm);
  out.cost = res.cost;
  out.iterations = res.iterations;
  out.covariance = res.covariance;
  const auto ib = static_cast<Eigen::Index>(2 * na);
  out.background = res.x(ib) * a_scale;
  out.background_err = std::sqrt(std::max(0.0, res.covariance(ib, ib))) * a_scale;
  for (std::size_t k = 0; k < na; ++k) {
    const std::size_t i = active[k];
    const auto kq = static_cast<Eigen::Index>(k);
    const auto ka = static_cast<Eigen::Index>(na + k);
    const double om = opt.omega_min * std::exp(std::clamp(res.x(kq), -0.5, q_hi));
    const double var_q = std::max(0.0, res.covariance(kq, kq));
    const double var_a = std::max(0.0, res.covariance(ka, ka));
    // A slice whose Omega ran off the grid or lost its Jacobian column has no
    // usable signal left; report it like a dark slice.
    if (!(om >= opt.omega_min && om <= opt.omega_max) || var_q <= 0.0) {
      out.flagged[i] = true;
      out.identifiability_warning = true;
      out.warnings.push_back("Omega unconstrained at z = " + std::to_string(data[i].z));
      continue;
    }
    out.omega[i] = om;
    out.omega_err[i] = om * std::sqrt(var_q);
    out.amplitude[i] = res.x(ka) * a_scale;
    out.amplitude_err[i] = std::sqrt(var_a) * a_scale;
    const double corr = (var_q > 0 && var_a > 0) ? res.covariance(kq, ka) / std::sqrt(var_q * var_a) : 0.0;
    if (std::sqrt(var_q) > opt.max_relative_error || std::abs(corr) > opt.max_correlation) {
      out.flagged[i] = true;
      out.identifiability_warning = true;
      out.warnings.push_back("Omega and amplitude poorly separated at z = " + std::to_string(data[i].z));
    }
  }
  return out;
}

/// Detuning sweeps generated from a known Rabi profile, counts = a * Gamma_sc/Gamma_P + b,
/// Poisson-sampled unless noiseless. Each position draws from derive_seed(seed, index).
template <class OmegaAt>
std::vector<DetuningSweep> synthetic_detuning_sweeps(const TenLevelParams& base, const std::vector<double>& z,
                                                     const std::vector<double>& detunings, OmegaAt&& omega_at,
                                                     double amplitude, double background, bool noiseless,
                                                     std::uint64_t seed) {
  std::vector<DetuningSweep> out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    DetuningSweep s;
    s.z = z[i];
    s.detunings = detunings;
    Rng rng(derive_seed(seed, i));
    const double om = omega_at(z[i]);
    for (double d : detunings) {
      const double mean = amplitude * detail::rabi_model_rate(base, om, d) + background;
      s.counts.push_back(noiseless ? mean : static_cast<double>(poisson_draw(mean, rng)));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Local maxima of the fitted profile over unflagged slices, largest first,
/// as (index, Omega).
inline std::vector<std::pair<std::size_t, double>> rabi_profile_peaks(const RabiProfile& p) {
  std::vector<std::pair<std::size_t, double>> peaks;
  const std::size_t n = p.omega.size();
  auto value = [&](std::size_t i) { return p.flagged[i] ? 0.0 : p.omega[i]; };
  for (std::size_t i = 0; i < n; ++i) {
    const double v = value(i);
    if (v <= 0.0) continue;
    const bool left = i == 0 || value(i - 1) < v;
    const bool right = i + 1 == n || value(i + 1) <= v;
    if (left && right) peaks.emplace_back(i, v);
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return peaks;
}

}  // namespace tweezerlab
