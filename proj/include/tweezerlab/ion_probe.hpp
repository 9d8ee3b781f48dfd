#pragma once

// The virtual experiment: a trapped ion sitting in the focal field, read out
// through fluorescence counts.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "four_level.hpp"
#include "optics.hpp"
#include "parallel.hpp"
#include "phase_mask.hpp"
#include "random.hpp"
#include "ten_level.hpp"
#include "zernike.hpp"

namespace tweezerlab {

struct TrapConfig {
  double omega_x = khz(400.0);
  double omega_y = khz(400.0);
  double omega_z = khz(120.0);
  double mass = 174.0 * constants::atomic_mass_unit;
  double rf_frequency = mhz(20.0);  // metadata only

  void validate() const {
    if (!(omega_x > 0 && omega_y > 0 && omega_z > 0 && rf_frequency > 0))
      throw ConfigError("trap frequencies must be positive");
    if (!(mass > 0)) throw ConfigError("ion mass must be positive");
  }
};

struct IonState {
  double y = 0.0;  // equilibrium position in the focal plane, m
  double z = 0.0;
  double temperature = 1e-3;  // K
  double micromotion = 0.1e-6;  // amplitude, m

  void validate() const {
    if (!(temperature >= 0.0) || !(micromotion >= 0.0))
      throw ConfigError("temperature and micromotion amplitude must be non-negative");
  }
};

struct CameraModel {
  double magnification = 8.54;
  double psf_sigma = 2.1e-6;  // at the ion, ~5 um FWHM image
  double pixel_size = 16e-6;
  double exposure = 0.2;  // s
  double dark_rate = 200.0;  // counts/s
  double collection_efficiency = 1e-3;

  void validate() const {
    if (!(magnification > 0) || !(psf_sigma > 0) || !(pixel_size > 0))
      throw ConfigError("camera magnification, PSF width and pixel size must be positive");
    if (!(exposure > 0)) throw ConfigError("exposure must be positive");
    if (!(dark_rate >= 0) || !(collection_efficiency >= 0 && collection_efficiency <= 1))
      throw ConfigError("dark rate must be non-negative and collection efficiency in [0, 1]");
  }
};

/// sqrt(k_B T / (m omega^2)).
inline double thermal_spread(double temperature, double omega, double mass) {
  if (temperature < 0 || !(omega > 0) || !(mass > 0)) throw ConfigError("thermal_spread needs T >= 0, omega > 0, m > 0");
  return std::sqrt(constants::boltzmann * temperature / mass) / omega;
}

/// Position spread per focal axis: thermal motion plus the RMS of the
/// micromotion (amplitude / sqrt 2), added in quadrature.
inline Eigen::Vector2d position_spread(const IonState& ion, const TrapConfig& trap) {
  const double mm2 = 0.5 * ion.micromotion * ion.micromotion;
  const double sy = thermal_spread(ion.temperature, trap.omega_y, trap.mass);
  const double sz = thermal_spread(ion.temperature, trap.omega_z, trap.mass);
  return {std::sqrt(sy * sy + mm2), std::sqrt(sz * sz + mm2)};
}

/// Gauss-Hermite rule for the standard normal: E[f(X)] ~ sum w_i f(x_i).
/// Golub-Welsch on the probabilists' Hermite recurrence.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite_normal(int n) {
  if (n < 1) throw ConfigError("quadrature order must be positive");
  RMatrix J = RMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<RMatrix> es(J);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    x[static_cast<std::size_t>(k)] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    w[static_cast<std::size_t>(k)] = v * v;
  }
  return {x, w};
}

inline constexpr int kQuadratureOrder = 9;

struct QuadratureNode {
  double y = 0.0;
  double z = 0.0;
  double weight = 0.0;
};

/// Tensor-product nodes for the ion position distribution; an axis with zero
/// spread collapses to a single node.
inline std::vector<QuadratureNode> position_quadrature(double y, double z, const Eigen::Vector2d& spread) {
  static const auto rule = gauss_hermite_normal(kQuadratureOrder);
  const std::vector<double> one_x{0.0}, one_w{1.0};
  const auto& xy = spread(0) > 0 ? rule.first : one_x;
  const auto& wy = spread(0) > 0 ? rule.second : one_w;
  const auto& xz = spread(1) > 0 ? rule.first : one_x;
  const auto& wz = spread(1) > 0 ? rule.second : one_w;
  std::vector<QuadratureNode> nodes;
  nodes.reserve(xy.size() * xz.size());
  for (std::size_t j = 0; j < xz.size(); ++j)
    for (std::size_t i = 0; i < xy.size(); ++i)
      nodes.push_back({y + spread(0) * xy[i], z + spread(1) * xz[j], wy[i] * wz[j]});
  return nodes;
}

enum class AtomModel { FourLevel, TenLevel };

/// Internal-state model plus the power-to-Rabi calibration.
struct AtomConfig {
  AtomModel model = AtomModel::FourLevel;
  TenLevelParams params = TenLevelParams::defaults();  // tweezer.rabi is set per evaluation
  double reference_power = 12.5e-3;  // W
  double reference_rabi = mhz(390.0);  // at reference_power, unaberrated focus
  double power = 12.5e-3;
  double max_power = 0.1;

  void validate() const {
    params.doppler.validate();
    params.tweezer.validate();
    params.branching.validate();
    if (!(reference_power > 0) || !(reference_rabi > 0)) throw ConfigError("Rabi calibration must be positive");
    if (!(power >= 0) || !(max_power > 0)) throw ConfigError("tweezer power must be non-negative");
  }

  /// Tweezer Rabi frequency for a field amplitude given relative to the ideal peak.
  double rabi(double amplitude_ratio) const {
    return reference_rabi * std::sqrt(power / reference_power) * amplitude_ratio;
  }

  double rate(double omega_tw) const {
    auto p = params;
    p.tweezer.rabi = omega_tw;
    if (model == AtomModel::FourLevel) return scattering_rate_4level_analytic(p.four_level());
    return fluorescence_10level(p);
  }
};

/// Tweezer Rabi frequency of maximal fluorescence. The four-level rate is
/// monotone, so it returns +infinity there.
inline double turnover_rabi(const AtomConfig& atoms) {
  if (atoms.model == AtomModel::FourLevel) return std::numeric_limits<double>::infinity();
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(mhz(0.1)), b = std::log(mhz(5000.0));
  // Coarse scan first so the golden section starts inside the right basin.
  int best = 0;
  double best_rate = -1.0;
  const int n = 40;
  for (int k = 0; k <= n; ++k) {
    const double r = atoms.rate(std::exp(a + (b - a) * k / n));
    if (r > best_rate) {
      best_rate = r;
      best = k;
    }
  }
  const double step = (b - a) / n;
  double lo = a + std::max(0, best - 1) * step, hi = a + std::min(n, best + 1) * step;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = atoms.rate(std::exp(x1)), f2 = atoms.rate(std::exp(x2));
  for (int it = 0; it < 60 && hi - lo > 1e-6; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = atoms.rate(std::exp(x2));
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = atoms.rate(std::exp(x1));
    }
  }
  return std::exp(0.5 * (lo + hi));
}

/// Rabi frequency on the rising branch that produces `rate`; +infinity when
/// the rate is unreachable.
inline double rabi_for_rate(const AtomConfig& atoms, double rate) {
  if (rate <= 0.0) return 0.0;
  if (atoms.model == AtomModel::FourLevel) {
    auto p = atoms.params.four_level();
    return tweezer_rabi_for_rate(p, rate);
  }
  const double top = turnover_rabi(atoms);
  if (rate >= atoms.rate(top)) return std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = top;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * top; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid > 0 && atoms.rate(mid) < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Power that puts the unaberrated peak at `fraction` of the saturated (four
/// level) or turnover (ten level) fluorescence, capped at max_power.
inline double auto_scaled_power(const AtomConfig& atoms, double fraction = 0.5) {
  if (!(fraction > 0 && fraction < 1)) throw ConfigError("power fraction must lie in (0, 1)");
  double top_rate = 0.0;
  if (atoms.model == AtomModel::FourLevel)
    top_rate = saturated_rate_4level(atoms.params.four_level());
  else
    top_rate = atoms.rate(turnover_rabi(atoms));
  const double omega = rabi_for_rate(atoms, fraction * top_rate);
  const double p = atoms.reference_power * (omega / atoms.reference_rabi) * (omega / atoms.reference_rabi);
  return std::min(p, atoms.max_power);
}

/// Everything needed to turn a local field amplitude into counts.
struct ProbeModel {
  AtomConfig atoms;
  TrapConfig trap;
  CameraModel camera;
  double reference_amplitude = 1.0;  // |E| at the unaberrated focus

  double rate_for_amplitude(double mean_abs) const {
    const double omega = atoms.rabi(mean_abs / reference_amplitude);
    if (omega == 0.0 && atoms.params.doppler.rabi != 0.0) return 0.0;
    return atoms.rate(omega);
  }

  double expected_counts_for_rate(double rate) const {
    return (rate * camera.collection_efficiency + camera.dark_rate) * camera.exposure;
  }

  double expected_counts(double mean_abs) const { return expected_counts_for_rate(rate_for_amplitude(mean_abs)); }

  /// Inverse of expected_counts: field intensity relative to the ideal peak.
  /// Rates above the reachable maximum are clipped just below it.
  double intensity_for_counts(double counts) const {
    const double rate = (counts / camera.exposure - camera.dark_rate) / camera.collection_efficiency;
    if (rate <= 0.0) return 0.0;
    double omega = rabi_for_rate(atoms, rate);
    if (!std::isfinite(omega)) {
      double cap = 0.0;
      if (atoms.model == AtomModel::FourLevel)
        cap = saturated_rate_4level(atoms.params.four_level());
      else
        cap = atoms.rate(turnover_rabi(atoms));
      omega = rabi_for_rate(atoms, 0.999 * cap);
    }
    const double ratio = omega / (atoms.reference_rabi * std::sqrt(atoms.power / atoms.reference_power));
    return ratio * ratio;
  }
};

inline std::int64_t poisson_draw(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

/// Mean |E| over the ion's position distribution.
template <class FieldAt>
double thermal_mean_amplitude(const IonState& ion, const TrapConfig& trap, FieldAt&& field_at) {
  double sum = 0.0;
  for (const auto& q : position_quadrature(ion.y, ion.z, position_spread(ion, trap)))
    sum += q.weight * std::abs(field_at(q.y, q.z));
  return sum;
}

/// Counts from one exposure of an ion in a sampled focal field.
inline std::int64_t measure_fluorescence(const IonState& ion, const ComplexField& field, const ProbeModel& model,
                                         std::uint64_t seed) {
  ion.validate();
  const double a = thermal_mean_amplitude(ion, model.trap, [&](double y, double z) { return field.sample(y, z); });
  Rng rng(seed);
  return poisson_draw(model.expected_counts(a), rng);
}

struct VoltageCalibration {
  Eigen::Matrix2d gain = Eigen::Matrix2d::Identity() * 1e-6;  // m/V, (y, z) per (V1, V2)
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();

  void validate() const {
    const double scale = gain.cwiseAbs().maxCoeff();
    if (!(scale > 0) || std::abs(gain.determinant()) <= 1e-12 * scale * scale)
      throw SingularCalibration("electrode calibration matrix is singular");
  }
};

inline Eigen::Vector2d voltage_to_position(const Eigen::Vector2d& dv, const VoltageCalibration& cal) {
  cal.validate();
  return cal.origin + cal.gain * dv;
}

inline Eigen::Vector2d position_to_voltage(const Eigen::Vector2d& pos, const VoltageCalibration& cal) {
  cal.validate();
  return cal.gain.partialPivLu().solve(pos - cal.origin);
}

/// Dimensionless equilibrium positions of an n-ion chain in a harmonic well.
inline std::vector<double> coulomb_chain_positions(int n) {
  if (n < 1) throw ConfigError("chain needs at least one ion");
  RVector u(n);
  for (int i = 0; i < n; ++i) u(i) = 1.2 * (i - 0.5 * (n - 1)) * std::pow(n, -0.56);
  for (int it = 0; it < 100; ++it) {
    RVector f(n);
    RMatrix J = RMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      f(i) = u(i);
      J(i, i) = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = u(i) - u(j);
        f(i) -= (d > 0 ? 1.0 : -1.0) / (d * d);
        const double dd = 2.0 / std::abs(d * d * d);
        J(i, i) += dd;
        J(i, j) -= dd;
      }
    }
    const RVector step = J.partialPivLu().solve(f);
    u -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-14) break;
  }
  return {u.data(), u.data() + n};
}

/// (e^2 / (4 pi eps0 m omega^2))^(1/3).
inline double chain_length_scale(double mass, double omega_z) {
  const double e2 = constants::elementary_charge * constants::elementary_charge;
  return std::cbrt(e2 / (4.0 * kPi * constants::vacuum_permittivity * mass * omega_z * omega_z));
}

struct BeamMapRecord {
  double y = 0.0;
  double z = 0.0;
  double counts_mean = 0.0;
  double counts_var = 0.0;
  int repeats = 1;
};

/// Records are z-major over the (y_axis x z_axis) grid.
struct BeamMapScan {
  std::vector<double> y_axis;
  std::vector<double> z_axis;
  std::vector<BeamMapRecord> records;

  RMatrix counts_grid() const {
    RMatrix m(static_cast<Eigen::Index>(z_axis.size()), static_cast<Eigen::Index>(y_axis.size()));
    for (std::size_t k = 0; k < records.size(); ++k)
      m(static_cast<Eigen::Index>(k / y_axis.size()), static_cast<Eigen::Index>(k % y_axis.size())) =
          records[k].counts_mean;
    return m;
  }

  /// Counts linearised back to relative intensity through the probe model.
  RMatrix intensity_grid(const ProbeModel& model) const {
    RMatrix m = counts_grid();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = model.intensity_for_counts(m(r, c));
    return m;
  }
};

struct LabConfig {
  MaskGeometry geometry{64, 64, 250e-6};
  OpticalTrain train;
  TrapConfig trap;
  IonState ion;
  CameraModel camera;
  AtomConfig atoms;
  ZernikeCoefficients aberration;     // hidden from the experimenter
  std::optional<PhaseMask> flatness;  // manufacturer map; the panel's own error is its negative
  double target_y = 15e-6;
  double target_z = 0.0;
  bool auto_power = true;
  double auto_fraction = 0.5;

  void validate() const {
    geometry.validate();
    train.validate();
    trap.validate();
    ion.validate();
    camera.validate();
    atoms.validate();
    if (flatness && !(flatness->geometry() == geometry)) throw GeometryMismatch("flatness map geometry differs from the SLM");
    if (!(auto_fraction > 0 && auto_fraction < 1)) throw ConfigError("auto power fraction must lie in (0, 1)");
  }
};

struct BeamMapOptions {
  int repeats = 1;
  bool noiseless = false;
  int threads = 1;
};

/// Simulated apparatus. Holds mutable state (displayed mask, ion position,
/// RNG); use one instance per thread or clone with a derived seed.
class VirtualLab {
 public:
  VirtualLab(LabConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), evaluator_(cfg_.geometry, cfg_.train), rng_(seed) {
    cfg_.validate();
    hidden_ = inject_aberration(cfg_.aberration, cfg_.geometry);
    if (cfg_.flatness) hidden_ = hidden_ - *cfg_.flatness;
    model_.atoms = cfg_.atoms;
    model_.trap = cfg_.trap;
    model_.camera = cfg_.camera;
    model_.reference_amplitude = ideal_peak_amplitude(cfg_.geometry, cfg_.train);
    if (cfg_.auto_power) model_.atoms.power = auto_scaled_power(model_.atoms, cfg_.auto_fraction);
    ion_ = cfg_.ion;
    ion_.y = cfg_.target_y;
    ion_.z = cfg_.target_z;
    display(flatness());
  }

  VirtualLab clone(std::uint64_t seed) const {
    VirtualLab copy(*this);
    copy.rng_.seed(seed);
    return copy;
  }

  const LabConfig& config() const { return cfg_; }
  const MaskGeometry& geometry() const { return cfg_.geometry; }
  const OpticalTrain& train() const { return cfg_.train; }
  const FocalFieldEvaluator& evaluator() const { return evaluator_; }
  const ProbeModel& model() const { return model_; }
  ProbeModel& model() { return model_; }
  const PhaseMask& hidden_phase() const { return hidden_; }
  Rng& rng() { return rng_; }

  double power() const { return model_.atoms.power; }
  void set_power(double p) {
    if (!(p >= 0)) throw ConfigError("tweezer power must be non-negative");
    model_.atoms.power = std::min(p, model_.atoms.max_power);
  }

  PhaseMask flatness() const { return cfg_.flatness ? *cfg_.flatness : PhaseMask(cfg_.geometry); }
  PhaseMask target_grating() const {
    return grating_for_displacement(cfg_.train, cfg_.geometry, cfg_.target_y, cfg_.target_z);
  }
  /// Target grating rotated by 90 degrees at half the period.
  PhaseMask background_grating() const {
    return grating_for_displacement(cfg_.train, cfg_.geometry, -2.0 * cfg_.target_z, 2.0 * cfg_.target_y);
  }

  /// Pupil field the given SLM pattern produces, including hidden errors.
  CMatrix pupil_for(const PhaseMask& slm) const { return pupil_field(slm, cfg_.train, &hidden_); }

  void display(const PhaseMask& slm) {
    slm.require_same(PhaseMask(cfg_.geometry));
    displayed_ = slm;
    pupil_ = pupil_for(slm);
  }
  const PhaseMask& displayed() const { return displayed_; }
  const CMatrix& pupil() const { return pupil_; }

  const IonState& ion() const { return ion_; }
  void move_ion(double y, double z) {
    ion_.y = y;
    ion_.z = z;
  }

  std::vector<QuadratureNode> quadrature(double y, double z) const {
    return position_quadrature(y, z, position_spread(ion_, cfg_.trap));
  }

  double mean_amplitude(const CMatrix& pupil, double y, double z) const {
    double sum = 0.0;
    for (const auto& q : quadrature(y, z)) sum += q.weight * std::abs(evaluator_.evaluate(pupil, q.y, q.z));
    return sum;
  }

  /// Noiseless counts for the displayed pattern at the current ion position.
  double expected_counts() const { return model_.expected_counts(mean_amplitude(pupil_, ion_.y, ion_.z)); }

  /// One exposure.
  double measure() { return static_cast<double>(poisson_draw(expected_counts(), rng_)); }

  /// Draws from the lab stream; used to seed scans that run in parallel.
  std::uint64_t next_seed() { return rng_(); }

 private:
  LabConfig cfg_;
  FocalFieldEvaluator evaluator_;
  ProbeModel model_;
  PhaseMask hidden_{MaskGeometry{}};
  PhaseMask displayed_{MaskGeometry{}};
  CMatrix pupil_;
  IonState ion_;
  Rng rng_;
};

/// One measurement per commanded position of the displayed pattern.
inline BeamMapScan map_beam(VirtualLab& lab, const std::vector<double>& y_axis, const std::vector<double>& z_axis,
                            const BeamMapOptions& opt = {}) {
  if (opt.repeats < 1) throw ConfigError("beam map needs at least one repeat");
  if (y_axis.empty() || z_axis.empty()) throw ConfigError("beam map grid is empty");
  BeamMapScan scan;
  scan.y_axis = y_axis;
  scan.z_axis = z_axis;
  scan.records.resize(y_axis.size() * z_axis.size());
  const std::uint64_t base = lab.next_seed();
  const VirtualLab& view = lab;
  parallel_for(scan.records.size(), opt.threads, [&](std::size_t k) {
    auto& rec = scan.records[k];
    rec.y = y_axis[k % y_axis.size()];
    rec.z = z_axis[k / y_axis.size()];
    rec.repeats = opt.repeats;
    const double mean = view.model().expected_counts(view.mean_amplitude(view.pupil(), rec.y, rec.z));
    if (opt.noiseless) {
      rec.counts_mean = mean;
      rec.counts_var = 0.0;
      return;
    }
    Rng rng(derive_seed(base, k));
    double s = 0.0, ss = 0.0;
    for (int r = 0; r < opt.repeats; ++r) {
      const auto c = static_cast<double>(poisson_draw(mean, rng));
      s += c;
      ss += c * c;
    }
    const double n = opt.repeats;
    rec.counts_mean = s / n;
    rec.counts_var = opt.repeats > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1.0)) : 0.0;
  });
  return scan;
}

/// Symmetric axis of n points with the given spacing around centre.
inline std::vector<double> centered_axis(double centre, double spacing, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = centre + (k - 0.5 * (n - 1)) * spacing;
  return v;
}

enum class CptAxis { Power, Detuning };

struct CptMap {
  CptAxis axis = CptAxis::Power;
  std::vector<double> z;       // rows
  std::vector<double> params;  // columns: W or rad/s
  RMatrix counts;
  std::vector<std::pair<int, int>> degenerate;  // (row, col) entries set to dark counts
};

struct CptOptions {
  bool noiseless = true;
  int threads = 1;
};

/// Fluorescence along z at the target y against tweezer power or detuning.
inline CptMap cpt_map(VirtualLab& lab, CptAxis axis, const std::vector<double>& params, const std::vector<double>& z,
                      const CptOptions& opt = {}) {
  if (lab.model().atoms.model != AtomModel::TenLevel) throw ConfigError("CPT maps need the ten-level model");
  CptMap map;
  map.axis = axis;
  map.z = z;
  map.params = params;
  const auto rows = static_cast<Eigen::Index>(z.size());
  const auto cols = static_cast<Eigen::Index>(params.size());
  map.counts.resize(rows, cols);
  std::vector<double> amp(z.size());
  for (std::size_t r = 0; r < z.size(); ++r) amp[r] = lab.mean_amplitude(lab.pupil(), lab.ion().y, z[r]);
  const std::uint64_t base = lab.next_seed();
  std::vector<char> degenerate(z.size() * params.size(), 0);
  const ProbeModel& base_model = lab.model();
  parallel_for(z.size() * params.size(), opt.threads, [&](std::size_t k) {
    const auto r = static_cast<Eigen::Index>(k / params.size());
    const auto c = static_cast<Eigen::Index>(k % params.size());
    ProbeModel m = base_model;
    if (axis == CptAxis::Power)
      m.atoms.power = params[static_cast<std::size_t>(c)];
    else
      m.atoms.params.tweezer.detuning = params[static_cast<std::size_t>(c)];
    double rate = 0.0;
    try {
      rate = m.rate_for_amplitude(amp[static_cast<std::size_t>(r)]);
    } catch (const DegenerateSteadyState&) {
      degenerate[k] = 1;
    }
    const double mean = m.expected_counts_for_rate(rate);
    if (opt.noiseless) {
      map.counts(r, c) = mean;
    } else {
      Rng rng(derive_seed(base, k));
      map.counts(r, c) = static_cast<double>(poisson_draw(mean, rng));
    }
  });
  for (std::size_t k = 0; k < degenerate.size(); ++k)
    if (degenerate[k]) map.degenerate.emplace_back(static_cast<int>(k / params.size()), static_cast<int>(k % params.size()));
  return map;
}

}  // namespace tweezerlab
