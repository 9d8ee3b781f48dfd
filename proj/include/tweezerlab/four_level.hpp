#pragma once

// Four-level model of 174Yb+: S1/2, P1/2, D3/2 and [3/2]1/2, with the 369 nm
// Doppler drive on S-P and the 935 nm tweezer on D-[3/2].

#include <vector>

#include "core.hpp"
#include "lindblad.hpp"

namespace tweezerlab {

/// Fraction of P decays counted in the scattering rate, Gamma_sc = k * Gamma_P * rho_PP.
/// Pinned against the closed-form rate: the Lindblad steady state reproduces
/// it exactly with k = 1 (every P decay), not with k = b_SP.
inline constexpr double kScatteringChannelFraction = 1.0;

struct LaserDrive {
  double rabi = 0.0;       // rad/s
  double detuning = 0.0;   // rad/s
  CVec3 polarization = CVec3(0.0, 0.0, 1.0);
  double wavelength = 0.0;  // m

  void validate() const {
    if (rabi < 0.0) throw ConfigError("Rabi frequency must be non-negative");
    if (std::abs(polarization.squaredNorm() - 1.0) > 1e-12)
      throw ConfigError("polarization must be a unit vector");
  }
};

struct Branching {
  double s_from_p = 0.995;
  double d_from_p = 0.005;
  double s_from_32 = 0.982;
  double d_from_32 = 0.018;

  void validate() const {
    if (std::abs(s_from_p + d_from_p - 1.0) > 1e-12 || std::abs(s_from_32 + d_from_32 - 1.0) > 1e-12)
      throw ConfigError("branching fractions of each upper level must sum to 1");
    if (s_from_p < 0 || d_from_p < 0 || s_from_32 < 0 || d_from_32 < 0)
      throw ConfigError("branching fractions must be non-negative");
  }
};

struct FourLevelParams {
  LaserDrive doppler;
  LaserDrive tweezer;
  double gamma_p = mhz(21.0);
  double gamma_32 = mhz(4.2);
  Branching branching;

  void validate() const {
    doppler.validate();
    tweezer.validate();
    branching.validate();
    if (gamma_p <= 0.0 || gamma_32 <= 0.0) throw ConfigError("linewidths must be positive");
  }

  /// Doppler cooling defaults: detuning -Gamma_P/2, Rabi Gamma_P/sqrt(2), resonant tweezer off.
  static FourLevelParams defaults() {
    FourLevelParams p;
    p.doppler.rabi = p.gamma_p / std::sqrt(2.0);
    p.doppler.detuning = -0.5 * p.gamma_p;
    p.doppler.polarization = CVec3(0.0, 0.0, 1.0);
    p.doppler.wavelength = 369.5e-9;
    p.tweezer.rabi = 0.0;
    p.tweezer.detuning = 0.0;
    p.tweezer.polarization = CVec3(0.0, 1.0, 0.0);
    p.tweezer.wavelength = 935.2e-9;
    return p;
  }
};

namespace level4 {
inline constexpr int S = 0;
inline constexpr int P = 1;
inline constexpr int D = 2;
inline constexpr int T = 3;  // [3/2]1/2
}  // namespace level4

inline CMatrix hamiltonian_4level(const FourLevelParams& p) {
  using namespace level4;
  CMatrix H = CMatrix::Zero(4, 4);
  H(S, S) = p.doppler.detuning;
  H(S, P) = H(P, S) = 0.5 * p.doppler.rabi;
  H(D, D) = p.tweezer.detuning;
  H(D, T) = H(T, D) = 0.5 * p.tweezer.rabi;
  return H;
}

inline JumpOperator make_jump(int dim, int lower, int upper, double rate) {
  if (rate < 0.0) throw ConfigError("decay rate must be non-negative");
  JumpOperator j;
  j.op = CMatrix::Zero(dim, dim);
  j.op(lower, upper) = std::sqrt(rate);
  j.lower = lower;
  j.upper = upper;
  j.rate = rate;
  return j;
}

inline std::vector<JumpOperator> jump_operators_4level(const FourLevelParams& p) {
  using namespace level4;
  p.branching.validate();
  if (p.gamma_p < 0.0 || p.gamma_32 < 0.0) throw ConfigError("negative linewidth");
  return {
      make_jump(4, S, P, p.gamma_p * p.branching.s_from_p),
      make_jump(4, D, P, p.gamma_p * p.branching.d_from_p),
      make_jump(4, S, T, p.gamma_32 * p.branching.s_from_32),
      make_jump(4, D, T, p.gamma_32 * p.branching.d_from_32),
  };
}

inline DensityOperator steady_state_4level(const FourLevelParams& p) {
  return steady_state(liouvillian(hamiltonian_4level(p), jump_operators_4level(p)));
}

/// Gamma_sc from the numerical steady state.
inline double scattering_rate_4level_numeric(const FourLevelParams& p) {
  return kScatteringChannelFraction * p.gamma_p * steady_state_4level(p).population(level4::P);
}

namespace detail {
// Gamma_sc = num * X / (alpha * X + beta) with X = Omega_tw^2.
struct RateCoefficients {
  double num = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline RateCoefficients rate_coefficients(const FourLevelParams& p) {
  const double g_s32 = p.gamma_32 * p.branching.s_from_32;
  const double g_leak = p.gamma_p * p.branching.d_from_p;
  const double od2 = p.doppler.rabi * p.doppler.rabi;
  const double dd = p.doppler.detuning;
  const double dt = p.tweezer.detuning;
  RateCoefficients c;
  c.num = g_s32 * p.gamma_p * od2;
  c.alpha = g_s32 * (p.gamma_p * p.gamma_p + 2.0 * od2 + 4.0 * dd * dd) + 2.0 * g_leak * od2;
  c.beta = g_leak * od2 * (p.gamma_32 * p.gamma_32 + 4.0 * dt * dt);
  return c;
}
}  // namespace detail

/// Closed-form four-level scattering rate (photons/s).
inline double scattering_rate_4level_analytic(const FourLevelParams& p) {
  const double od = p.doppler.rabi;
  const double ot = p.tweezer.rabi;
  if (od == 0.0 && ot == 0.0) throw UndrivenSystem("both drives are zero");
  if (od == 0.0 || ot == 0.0) return 0.0;
  const auto c = detail::rate_coefficients(p);
  const double x = ot * ot;
  return c.num * x / (c.alpha * x + c.beta);
}

/// Rate approached as Omega_tw -> infinity.
inline double saturated_rate_4level(const FourLevelParams& p) {
  const auto c = detail::rate_coefficients(p);
  return c.alpha > 0.0 ? c.num / c.alpha : 0.0;
}

/// Tweezer Rabi frequency that produces the given rate, inverting the closed form.
/// Returns +infinity for rates at or above saturation and 0 for rates <= 0.
inline double tweezer_rabi_for_rate(const FourLevelParams& p, double rate) {
  if (rate <= 0.0) return 0.0;
  const auto c = detail::rate_coefficients(p);
  const double denom = c.num - c.alpha * rate;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(c.beta * rate / denom);
}

}  // namespace tweezerlab
