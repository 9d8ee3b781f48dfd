#pragma once

// Axial force balance between the Paul trap, the tweezer dipole force and
// Doppler radiation pressure, and the mapping bias it produces.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "four_level.hpp"
#include "io.hpp"

namespace tweezerlab {

struct TweezerSpot {
  double rabi = mhz(3.0);       // peak Omega_0
  double waist = 2.5e-6;        // w0 of the Rabi-frequency profile
  double center = 0.0;          // z_tw
  double detuning = mhz(-10.0); // Delta_tw, red
};

struct DopplerBeam {
  // Tuned so the apparent centre moves by 1.8 um at omega_z = 2pi x 38 kHz
  // (see tune_doppler_rabi_for_shift).
  double rabi = 8.5632475642404124e7;
  double detuning = mhz(-10.5);
  double wavelength = 369.5e-9;
  double direction = 1.0;  // +1 pushes toward +z
};

struct ForceBalanceConfig {
  double omega_z = khz(120.0);
  double mass = 174.0 * constants::atomic_mass_unit;
  TweezerSpot tweezer;
  DopplerBeam doppler;
  FourLevelParams atoms = FourLevelParams::defaults();  // linewidths and branching
  bool tweezer_force_enabled = true;
  bool doppler_force_enabled = true;

  void validate() const {
    if (!(tweezer.waist > 0.0)) throw ConfigError("tweezer waist must be positive");
    if (!(mass > 0.0)) throw ConfigError("mass must be positive");
    if (!(omega_z > 0.0)) throw ConfigError("omega_z must be positive");
    if (tweezer_force_enabled && tweezer.rabi != 0.0 && tweezer.detuning == 0.0)
      throw ConfigError("dipole force needs a non-zero tweezer detuning");
  }

  double rabi_at(double z) const {
    const double u = (z - tweezer.center) / tweezer.waist;
    return tweezer.rabi * std::exp(-u * u);
  }

  /// Four-level parameters seen by an ion at z.
  FourLevelParams atoms_at(double z) const {
    FourLevelParams p = atoms;
    p.doppler.rabi = doppler.rabi;
    p.doppler.detuning = doppler.detuning;
    p.doppler.wavelength = doppler.wavelength;
    p.tweezer.rabi = rabi_at(z);
    p.tweezer.detuning = tweezer.detuning;
    return p;
  }
};

inline double trap_force(double z, const ForceBalanceConfig& cfg) {
  return -cfg.mass * cfg.omega_z * cfg.omega_z * z;
}

inline double population_p(double z, const ForceBalanceConfig& cfg) {
  const auto p = cfg.atoms_at(z);
  if (p.doppler.rabi == 0.0 || p.tweezer.rabi == 0.0) return 0.0;
  return scattering_rate_4level_analytic(p) / (kScatteringChannelFraction * p.gamma_p);
}

inline double population_d(double z, const ForceBalanceConfig& cfg) {
  const auto p = cfg.atoms_at(z);
  if (p.doppler.rabi == 0.0) return 0.0;  // nothing leaves S
  // Far in the Gaussian tail the repump vanishes and the ion shelves in D.
  if (p.tweezer.rabi <= 1e-6 * cfg.tweezer.rabi) return 1.0;
  return steady_state_4level(p).population(level4::D);
}

inline double scattering_rate_at(double z, const ForceBalanceConfig& cfg) {
  return kScatteringChannelFraction * cfg.atoms.gamma_p * population_p(z, cfg);
}

/// -dU/dz for U = hbar Omega(z)^2 / Delta * rho_D(z), with rho_D supplied by the caller.
template <class RhoD>
double tweezer_force_with(double z, const ForceBalanceConfig& cfg, RhoD&& rho_d) {
  if (cfg.tweezer.rabi == 0.0) return 0.0;
  auto potential = [&](double x) {
    const double om = cfg.rabi_at(x);
    return constants::hbar * om * om / cfg.tweezer.detuning * rho_d(x);
  };
  auto central = [&](double h) { return (potential(z + h) - potential(z - h)) / (2.0 * h); };
  const double h = cfg.tweezer.waist / 200.0;
  return -(4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline double tweezer_force(double z, const ForceBalanceConfig& cfg) {
  if (!cfg.tweezer_force_enabled) return 0.0;
  return tweezer_force_with(z, cfg, [&](double x) { return population_d(x, cfg); });
}

inline double doppler_force_for_population(double rho_pp, const ForceBalanceConfig& cfg) {
  const double k = kTwoPi / cfg.doppler.wavelength;
  return cfg.doppler.direction * constants::hbar * k * cfg.atoms.gamma_p * rho_pp;
}

inline double doppler_force(double z, const ForceBalanceConfig& cfg) {
  if (!cfg.doppler_force_enabled) return 0.0;
  return doppler_force_for_population(population_p(z, cfg), cfg);
}

inline double total_force(double z, const ForceBalanceConfig& cfg) {
  return trap_force(z, cfg) + tweezer_force(z, cfg) + doppler_force(z, cfg);
}

struct Equilibrium {
  double z = 0.0;
  std::vector<double> roots;         // every sign change of the total force
  std::vector<double> stable_roots;  // those with dF/dz < 0
  bool multistable = false;
  std::string warning;
};

struct EquilibriumOptions {
  int scan_points = 201;
  double tolerance = 1e-10;        // m
  double window_waists = 10.0;     // bracket half-width beyond the trap and tweezer centres
};

/// Root of the total force. With several stable roots, returns the one nearest
/// `hint` (the previous point of a continuation, or the trap-only equilibrium 0).
inline Equilibrium equilibrium_position(const ForceBalanceConfig& cfg, double hint = 0.0,
                                        const EquilibriumOptions& opt = {}) {
  cfg.validate();
  const double w = cfg.tweezer.waist;
  const double lo = std::min(0.0, cfg.tweezer.center) - opt.window_waists * w;
  const double hi = std::max(0.0, cfg.tweezer.center) + opt.window_waists * w;
  const int n = std::max(3, opt.scan_points);
  std::vector<double> zs(n), fs(n);
  for (int i = 0; i < n; ++i) {
    zs[i] = lo + (hi - lo) * i / (n - 1);
    fs[i] = total_force(zs[i], cfg);
  }
  if (!(fs.front() > 0.0 && fs.back() < 0.0))
    throw NoBracket("total force does not change sign on the search window");

  Equilibrium eq;
  for (int i = 0; i + 1 < n; ++i) {
    double a = zs[i], b = zs[i + 1], fa = fs[i], fb = fs[i + 1];
    if (fa == 0.0) {
      eq.roots.push_back(a);
      if (i > 0 && fs[i - 1] > 0.0 && fb < 0.0) eq.stable_roots.push_back(a);
      continue;
    }
    if ((fa > 0.0) == (fb > 0.0) || fb == 0.0) continue;
    const bool stable = fa > 0.0;
    while (b - a > opt.tolerance) {
      const double m = 0.5 * (a + b);
      const double fm = total_force(m, cfg);
      if ((fm > 0.0) == (fa > 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    const double root = 0.5 * (a + b);
    eq.roots.push_back(root);
    if (stable) eq.stable_roots.push_back(root);
  }
  // The endpoint signs guarantee at least one stable crossing.
  eq.z = eq.stable_roots.front();
  for (double r : eq.stable_roots)
    if (std::abs(r - hint) < std::abs(eq.z - hint)) eq.z = r;
  if (eq.stable_roots.size() > 1) {
    eq.multistable = true;
    eq.warning = "multiple stable equilibria at z =";
    for (double r : eq.stable_roots) eq.warning += " " + format_number(r);
  }
  return eq;
}

struct ApparentMap {
  std::vector<double> z_tw;
  std::vector<double> z_ion;
  std::vector<double> rate;
  std::vector<bool> multistable;
  std::vector<std::string> warnings;
};

/// Scattering rate at the ion's equilibrium as the tweezer centre is swept.
/// Points are solved in the given order, each seeded by the previous equilibrium.
inline ApparentMap apparent_map(const std::vector<double>& z_tw, const ForceBalanceConfig& cfg,
                                double hint = 0.0, const EquilibriumOptions& opt = {}) {
  ApparentMap map;
  auto c = cfg;
  for (double zt : z_tw) {
    c.tweezer.center = zt;
    const auto eq = equilibrium_position(c, hint, opt);
    hint = eq.z;
    map.z_tw.push_back(zt);
    map.z_ion.push_back(eq.z);
    map.rate.push_back(scattering_rate_at(eq.z, c));
    map.multistable.push_back(eq.multistable);
    if (eq.multistable) map.warnings.push_back("z_tw = " + format_number(zt) + ": " + eq.warning);
  }
  return map;
}

struct PeakShiftOptions {
  int grid_points = 81;
  double span_waists = 4.0;
  double tolerance = 1e-10;
  EquilibriumOptions equilibrium;
};

struct PeakShiftPoint {
  double omega_z = 0.0;
  double z0 = 0.0;
  bool multistable = false;
};

/// z_tw that maximizes the scattering rate, for each trap frequency.
/// Frequencies are processed from stiff to soft so bistable branches are
/// followed from the trap-only side; results come back in input order.
inline std::vector<PeakShiftPoint> peak_shift_vs_omega(const std::vector<double>& omegas,
                                                       const ForceBalanceConfig& cfg,
                                                       const PeakShiftOptions& opt = {}) {
  std::vector<std::size_t> order(omegas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return omegas[a] > omegas[b]; });

  std::vector<PeakShiftPoint> out(omegas.size());
  double start_hint = 0.0;
  for (auto idx : order) {
    auto c = cfg;
    c.omega_z = omegas[idx];
    // Push expected at the tweezer centre sets how far the window must reach.
    double reach = 0.0;
    if (c.doppler_force_enabled) {
      auto at_centre = c;
      at_centre.tweezer.center = 0.0;
      reach = doppler_force(0.0, at_centre) / (c.mass * c.omega_z * c.omega_z);
    }
    const double w = c.tweezer.waist;
    const double lo = std::min(0.0, reach) - opt.span_waists * w;
    const double hi = std::max(0.0, reach) + opt.span_waists * w;
    const int n = std::max(5, opt.grid_points);
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = lo + (hi - lo) * i / (n - 1);
    const auto map = apparent_map(grid, c, start_hint, opt.equilibrium);
    start_hint = map.z_ion.front();

    const auto best = static_cast<std::size_t>(std::max_element(map.rate.begin(), map.rate.end()) - map.rate.begin());
    const std::size_t ia = best > 0 ? best - 1 : best;
    const std::size_t ib = std::min(best + 1, map.rate.size() - 1);
    bool multistable = false;
    for (std::size_t i = ia; i <= ib; ++i) multistable = multistable || map.multistable[i];
    const double hint = map.z_ion[best];
    auto rate_at = [&](double zt) {
      auto cc = c;
      cc.tweezer.center = zt;
      const auto eq = equilibrium_position(cc, hint, opt.equilibrium);
      multistable = multistable || eq.multistable;
      return scattering_rate_at(eq.z, cc);
    };
    // Golden-section maximization on the bracketing grid cells.
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = grid[ia], b = grid[ib];
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = rate_at(x1), f2 = rate_at(x2);
    while (b - a > opt.tolerance) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = rate_at(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = rate_at(x1);
      }
    }
    out[idx] = {omegas[idx], 0.5 * (a + b), multistable};
  }
  return out;
}

/// Power-law exponent p of |z0| = c * omega^p by log-log least squares.
inline double power_law_exponent(const std::vector<PeakShiftPoint>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& p : pts) {
    if (p.z0 == 0.0) continue;
    const double x = std::log(p.omega_z), y = std::log(std::abs(p.z0));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw DegenerateMap("power-law fit needs two non-zero shifts");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Doppler Rabi frequency giving the requested apparent shift at omega_z.
/// Root search in log(Omega_D); the shift grows with Omega_D until rho_PP saturates.
inline ForceBalanceConfig tune_doppler_rabi_for_shift(ForceBalanceConfig cfg, double target_shift,
                                                      double omega_z, const PeakShiftOptions& opt = {}) {
  auto excess = [&](double log_rabi) {
    cfg.doppler.rabi = std::exp(log_rabi);
    return std::abs(peak_shift_vs_omega({omega_z}, cfg, opt).front().z0) - target_shift;
  };
  double lo = std::log(1e-2 * cfg.atoms.gamma_p), hi = std::log(cfg.atoms.gamma_p);
  double f_lo = excess(lo), f_hi = excess(hi);
  if (f_lo > 0.0) throw NoBracket("target shift below the tuning range");
  while (f_hi < 0.0) {
    if (hi > std::log(100.0 * cfg.atoms.gamma_p)) throw NoBracket("target shift beyond the tuning range");
    lo = hi;
    f_lo = f_hi;
    hi += std::log(3.0);
    f_hi = excess(hi);
  }
  std::uintmax_t iters = 60;
  const auto r = boost::math::tools::toms748_solve(excess, lo, hi, f_lo, f_hi,
                                                   boost::math::tools::eps_tolerance<double>(40), iters);
  cfg.doppler.rabi = std::exp(0.5 * (r.first + r.second));
  return cfg;
}

inline void write_apparent_map_csv(std::ostream& out, const ApparentMap& map, std::string_view hash = {}) {
  CsvWriter csv(out, "z_tw_m,scattering_rate", hash);
  for (std::size_t i = 0; i < map.z_tw.size(); ++i) csv.row({map.z_tw[i], map.rate[i]});
}

inline void write_peak_shift_csv(std::ostream& out, const std::vector<PeakShiftPoint>& pts, std::string_view hash = {}) {
  CsvWriter csv(out, "omega_z_rad_s,z0_m", hash);
  for (const auto& p : pts) csv.row({p.omega_z, p.z0});
}

}  // namespace tweezerlab
