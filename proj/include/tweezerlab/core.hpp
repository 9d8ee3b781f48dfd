#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tweezerlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace constants {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double boltzmann = 1.380649e-23;        // J/K
inline constexpr double bohr_magneton = 9.2740100783e-24;  // J/T
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
}  // namespace constants

/// Angular frequency (rad/s) from a value in MHz, read as 2*pi*MHz.
constexpr double mhz(double value) { return kTwoPi * value * 1e6; }
constexpr double khz(double value) { return kTwoPi * value * 1e3; }
constexpr double to_mhz(double rad_s) { return rad_s / (kTwoPi * 1e6); }

constexpr double um(double value) { return value * 1e-6; }
constexpr double mm(double value) { return value * 1e-3; }

// Error hierarchy. Every failure the library reports derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct DegenerateSteadyState : Error {
  using Error::Error;
};
struct UndrivenSystem : Error {
  using Error::Error;
};
struct AliasError : Error {
  using Error::Error;
};
struct SamplingError : Error {
  using Error::Error;
};
struct GeometryMismatch : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct DegenerateMap : Error {
  using Error::Error;
};
struct TargetOutOfBand : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  using Error::Error;
};
struct SingularCalibration : Error {
  using Error::Error;
};
struct NoBracket : Error {
  using Error::Error;
};

/// Wraps an angle into [0, 2*pi).
inline double wrap_phase(double phase) {
  double r = std::fmod(phase, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_symmetric(double phase) {
  double r = wrap_phase(phase);
  return r > kPi ? r - kTwoPi : r;
}

}  // namespace tweezerlab
