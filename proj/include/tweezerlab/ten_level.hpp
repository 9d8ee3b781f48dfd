#pragma once

// Ten-level Zeeman-resolved model of 174Yb+.
//
// Basis order: S-1/2, S+1/2, P-1/2, P+1/2, D-3/2, D-1/2, D+1/2, D+3/2,
// [3/2]-1/2, [3/2]+1/2. Magnetic quantum numbers are stored doubled (m2 = 2 m_J).

#include <array>
#include <map>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "four_level.hpp"
#include "lindblad.hpp"

namespace tweezerlab {

enum class Manifold { S, P, D, T };

struct Sublevel {
  Manifold manifold;
  int m2;
};

inline constexpr int kTenLevelDim = 10;

inline const std::array<Sublevel, kTenLevelDim>& ten_level_basis() {
  static const std::array<Sublevel, kTenLevelDim> basis = {{
      {Manifold::S, -1}, {Manifold::S, 1},
      {Manifold::P, -1}, {Manifold::P, 1},
      {Manifold::D, -3}, {Manifold::D, -1}, {Manifold::D, 1}, {Manifold::D, 3},
      {Manifold::T, -1}, {Manifold::T, 1},
  }};
  return basis;
}

inline int ten_level_index(Manifold manifold, int m2) {
  const auto& basis = ten_level_basis();
  for (int k = 0; k < kTenLevelDim; ++k)
    if (basis[k].manifold == manifold && basis[k].m2 == m2) return k;
  throw ConfigError("no such sublevel");
}

inline std::vector<int> manifold_indices(Manifold manifold) {
  std::vector<int> out;
  const auto& basis = ten_level_basis();
  for (int k = 0; k < kTenLevelDim; ++k)
    if (basis[k].manifold == manifold) out.push_back(k);
  return out;
}

struct GFactors {
  double s = 2.0;
  double p = 2.0 / 3.0;
  double d = 4.0 / 5.0;
  double t = 1.33;

  double of(Manifold m) const {
    switch (m) {
      case Manifold::S: return s;
      case Manifold::P: return p;
      case Manifold::D: return d;
      case Manifold::T: return t;
    }
    return 0.0;
  }
};

struct ZeemanEnvironment {
  double field_magnitude = 0.5e-3;  // T, may be signed
  Vec3 field_axis = Vec3::UnitX();
  GFactors g_factors;
  double bohr_magneton = constants::bohr_magneton;

  /// Linear Zeeman shift g mu_B m_J B / hbar in rad/s.
  double shift(Manifold manifold, int m2) const {
    return g_factors.of(manifold) * bohr_magneton * (0.5 * m2) * field_magnitude / constants::hbar;
  }
};

enum class Transition { Cooling369, Repump935 };

/// Angular coupling amplitudes keyed by (transition, m2 of lower, m2 of upper).
struct CouplingTable {
  std::map<std::tuple<Transition, int, int>, double> entries;

  static CouplingTable standard() {
    CouplingTable t;
    const double r3 = std::sqrt(3.0);
    // S1/2 <-> P1/2
    t.entries[{Transition::Cooling369, 1, -1}] = -1.0 / 3.0;
    t.entries[{Transition::Cooling369, -1, 1}] = 1.0 / 3.0;
    t.entries[{Transition::Cooling369, 1, 1}] = r3 / 3.0;
    t.entries[{Transition::Cooling369, -1, -1}] = r3 / 3.0;
    // D3/2 <-> [3/2]1/2
    t.entries[{Transition::Repump935, 3, 1}] = -1.0 / r3;
    t.entries[{Transition::Repump935, -3, -1}] = -1.0 / r3;
    t.entries[{Transition::Repump935, 1, 1}] = std::sqrt(2.0) / 3.0;
    t.entries[{Transition::Repump935, -1, -1}] = std::sqrt(2.0) / 3.0;
    t.entries[{Transition::Repump935, 1, -1}] = 1.0 / 3.0;
    t.entries[{Transition::Repump935, -1, 1}] = 1.0 / 3.0;
    return t;
  }

  double amplitude(Transition tr, int m2_lower, int m2_upper) const {
    auto it = entries.find({tr, m2_lower, m2_upper});
    if (it == entries.end())
      throw ConfigError("coupling table has no entry for m_lower=" + std::to_string(m2_lower) +
                        "/2, m_upper=" + std::to_string(m2_upper) + "/2");
    return it->second;
  }

  /// Sum of squared amplitudes out of one upper sublevel.
  double upper_sum(Transition tr, int m2_upper) const {
    double s = 0.0;
    for (const auto& [key, a] : entries)
      if (std::get<0>(key) == tr && std::get<2>(key) == m2_upper) s += a * a;
    return s;
  }

  /// Sum of squared amplitudes into one lower sublevel.
  double lower_sum(Transition tr, int m2_lower) const {
    double s = 0.0;
    for (const auto& [key, a] : entries)
      if (std::get<0>(key) == tr && std::get<1>(key) == m2_lower) s += a * a;
    return s;
  }
};

/// Projection eps . conj(xi_q) with xi_q defined in the frame whose z axis is
/// the quantization axis. xi_{+-1} = -+(x' +- i y')/sqrt(2), xi_0 = z'.
inline Complex polarization_overlap(const CVec3& eps, int q, const Vec3& axis) {
  const double n = axis.norm();
  if (n == 0.0 || !std::isfinite(n)) throw ConfigError("quantization axis has zero length");
  if (q < -1 || q > 1) throw ConfigError("polarization component q must be -1, 0 or +1");
  const Vec3 z = axis / n;
  const Vec3 ref = std::abs(z.z()) > 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
  const Vec3 x = (ref - ref.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);
  // Eigen's dot conjugates its first argument, which is real here.
  const Complex cx = x.cast<Complex>().dot(eps);
  const Complex cy = y.cast<Complex>().dot(eps);
  const Complex cz = z.cast<Complex>().dot(eps);
  const double s = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  switch (q) {
    case 1: return -(cx - i * cy) * s;
    case -1: return (cx + i * cy) * s;
    default: return cz;
  }
}

struct TenLevelParams {
  LaserDrive doppler;
  LaserDrive tweezer;
  ZeemanEnvironment zeeman;
  CouplingTable couplings = CouplingTable::standard();
  double gamma_p = mhz(21.0);
  double gamma_32 = mhz(4.2);
  Branching branching;

  static TenLevelParams defaults() {
    const auto f = FourLevelParams::defaults();
    TenLevelParams p;
    p.doppler = f.doppler;
    p.tweezer = f.tweezer;
    return p;
  }

  FourLevelParams four_level() const {
    FourLevelParams f;
    f.doppler = doppler;
    f.tweezer = tweezer;
    f.gamma_p = gamma_p;
    f.gamma_32 = gamma_32;
    f.branching = branching;
    return f;
  }
};

namespace detail {
struct TransitionLevels {
  Transition transition;
  Manifold lower;
  Manifold upper;
};

inline void add_coupling(CMatrix& H, const TransitionLevels& tl, const LaserDrive& drive,
                         const Vec3& axis, const CouplingTable& table) {
  for (int lo : manifold_indices(tl.lower)) {
    for (int up : manifold_indices(tl.upper)) {
      const int m2l = ten_level_basis()[lo].m2;
      const int m2u = ten_level_basis()[up].m2;
      const int dq2 = m2u - m2l;
      if (std::abs(dq2) > 2) continue;
      const double a = table.amplitude(tl.transition, m2l, m2u);
      const Complex w = polarization_overlap(drive.polarization, dq2 / 2, axis) * a * 0.5 * drive.rabi;
      H(lo, up) += w;
      H(up, lo) += std::conj(w);
    }
  }
}
}  // namespace detail

inline CMatrix hamiltonian_10level(const TenLevelParams& p) {
  CMatrix H = CMatrix::Zero(kTenLevelDim, kTenLevelDim);
  const auto& basis = ten_level_basis();
  for (int k = 0; k < kTenLevelDim; ++k) {
    double diag = p.zeeman.shift(basis[k].manifold, basis[k].m2);
    if (basis[k].manifold == Manifold::S) diag += p.doppler.detuning;
    if (basis[k].manifold == Manifold::D) diag += p.tweezer.detuning;
    H(k, k) = diag;
  }
  const Vec3& axis = p.zeeman.field_axis;
  detail::add_coupling(H, {Transition::Cooling369, Manifold::S, Manifold::P}, p.doppler, axis, p.couplings);
  detail::add_coupling(H, {Transition::Repump935, Manifold::D, Manifold::T}, p.tweezer, axis, p.couplings);
  return H;
}

/// Decay operators of the ten-level model.
///
/// Each channel u -> f carries Gamma_u * b_{f,u} * A^2 / C_u, where C_u is the
/// squared-amplitude sum out of the upper sublevel, so that every upper
/// sublevel decays at its full linewidth. P -> D reuses the 935 nm angular
/// table (J=1/2 -> J=3/2) and [3/2] -> S reuses the 369 nm table.
inline std::vector<JumpOperator> jump_operators_10level(const CouplingTable& table, double gamma_p,
                                                        double gamma_32,
                                                        const Branching& branching = {}) {
  branching.validate();
  if (gamma_p <= 0.0 || gamma_32 <= 0.0) throw ConfigError("linewidths must be positive");

  struct Channel {
    Transition table;
    Manifold upper;
    Manifold lower;
    double rate;
  };
  const std::array<Channel, 4> channels = {{
      {Transition::Cooling369, Manifold::P, Manifold::S, gamma_p * branching.s_from_p},
      {Transition::Repump935, Manifold::P, Manifold::D, gamma_p * branching.d_from_p},
      {Transition::Cooling369, Manifold::T, Manifold::S, gamma_32 * branching.s_from_32},
      {Transition::Repump935, Manifold::T, Manifold::D, gamma_32 * branching.d_from_32},
  }};

  std::vector<JumpOperator> jumps;
  for (const auto& ch : channels) {
    const auto uppers = manifold_indices(ch.upper);
    const double c0 = table.upper_sum(ch.table, ten_level_basis()[uppers.front()].m2);
    for (int up : uppers) {
      const double c = table.upper_sum(ch.table, ten_level_basis()[up].m2);
      if (c <= 0.0 || std::abs(c - c0) > 1e-12 * c0)
        throw ConfigError("coupling table violates the decay sum rule");
    }
    if (ch.rate == 0.0) continue;
    for (int up : uppers) {
      for (int lo : manifold_indices(ch.lower)) {
        const int m2u = ten_level_basis()[up].m2;
        const int m2l = ten_level_basis()[lo].m2;
        if (std::abs(m2u - m2l) > 2) continue;
        const double a = table.amplitude(ch.table, m2l, m2u);
        if (a == 0.0) continue;
        jumps.push_back(make_jump(kTenLevelDim, lo, up, ch.rate * a * a / c0));
      }
    }
  }
  return jumps;
}

inline DensityOperator steady_state_10level(const TenLevelParams& p) {
  return steady_state(liouvillian(hamiltonian_10level(p),
                                  jump_operators_10level(p.couplings, p.gamma_p, p.gamma_32, p.branching)));
}

/// Gamma_sc = k * Gamma_P * sum_m rho(P_m, P_m).
inline double fluorescence_10level(const TenLevelParams& p) {
  p.doppler.validate();
  p.tweezer.validate();
  if (p.doppler.rabi == 0.0 && p.tweezer.rabi == 0.0) throw UndrivenSystem("both drives are zero");
  if (p.tweezer.rabi == 0.0 || p.doppler.rabi == 0.0) return 0.0;
  const auto rho = steady_state_10level(p);
  double pop = 0.0;
  for (int k : manifold_indices(Manifold::P)) pop += rho.population(k);
  return kScatteringChannelFraction * p.gamma_p * pop;
}

}  // namespace tweezerlab
