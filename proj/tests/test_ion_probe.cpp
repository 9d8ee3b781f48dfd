#include <gtest/gtest.h>

#include <random>

#include "tweezerlab/ion_probe.hpp"

using namespace tweezerlab;

namespace {

LabConfig quiet_lab() {
  LabConfig cfg;
  cfg.geometry = {32, 32, 500e-6};
  return cfg;
}

}  // namespace

TEST(Thermal, SpreadFormula) {
  const double m = 174 * constants::atomic_mass_unit, w = khz(120.0);
  const double expect = std::sqrt(1.380649e-23 * 1e-3 / (m * w * w));
  EXPECT_NEAR(thermal_spread(1e-3, w, m) / expect, 1.0, 1e-12);
  EXPECT_EQ(thermal_spread(0.0, w, m), 0.0);
  EXPECT_THROW(thermal_spread(1e-3, 0.0, m), ConfigError);

  IonState ion;
  ion.temperature = 0.0;
  ion.micromotion = 0.2e-6;
  const auto s = position_spread(ion, TrapConfig{});
  EXPECT_NEAR(s(0), 0.2e-6 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s(1), 0.2e-6 / std::sqrt(2.0), 1e-15);
}

TEST(Quadrature, GaussHermiteMoments) {
  const auto [x, w] = gauss_hermite_normal(kQuadratureOrder);
  const double exact[] = {1, 0, 1, 0, 3, 0, 15, 0, 105, 0, 945};
  for (int k = 0; k <= 10; ++k) {
    double m = 0;
    for (std::size_t i = 0; i < x.size(); ++i) m += w[i] * std::pow(x[i], k);
    EXPECT_NEAR(m, exact[k], 1e-10 * std::max(1.0, exact[k])) << k;
  }
}

TEST(Quadrature, ZeroSpreadCollapses) {
  const auto nodes = position_quadrature(1e-6, 2e-6, Eigen::Vector2d(0.0, 0.0));
  ASSERT_EQ(nodes.size(), 1u);
  EXPECT_EQ(nodes[0].weight, 1.0);
  EXPECT_EQ(position_quadrature(0, 0, Eigen::Vector2d(1e-7, 0.0)).size(), static_cast<std::size_t>(kQuadratureOrder));
}

TEST(Quadrature, AveragedGaussianAmplitudeBroadens) {
  // <exp(-(y + s x)^2 / w^2)> over x ~ N(0,1) = w / sqrt(w^2 + 2 s^2) exp(-y^2 / (w^2 + 2 s^2)), per axis.
  const double w = 2e-6;
  IonState ion;
  ion.temperature = 0.0;
  ion.micromotion = 0.7e-6;  // s = 0.495 um on both axes
  const double s = ion.micromotion / std::sqrt(2.0);
  const double w2 = w * w + 2 * s * s;
  for (double y : {0.0, 1e-6, 2.5e-6}) {
    ion.y = y;
    ion.z = 0.5e-6;
    const double got = thermal_mean_amplitude(ion, TrapConfig{}, [&](double yy, double zz) {
      return Complex(std::exp(-(yy * yy + zz * zz) / (w * w)), 0.0);
    });
    const double expect = (w * w / w2) * std::exp(-(y * y + ion.z * ion.z) / w2);
    EXPECT_NEAR(got / expect, 1.0, 1e-6) << y;
  }
}

TEST(Poisson, MeanAndVariance) {
  Rng rng(3);
  const double mean = 37.5;
  double s = 0, ss = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double c = static_cast<double>(poisson_draw(mean, rng));
    s += c;
    ss += c * c;
  }
  const double m = s / n, v = ss / n - m * m;
  EXPECT_NEAR(m, mean, 5 * std::sqrt(mean / n));
  EXPECT_NEAR(v / mean, 1.0, 0.05);
  EXPECT_EQ(poisson_draw(0.0, rng), 0);
  EXPECT_EQ(poisson_draw(-1.0, rng), 0);
}

TEST(Calibration, VoltageRoundTripAndSingular) {
  VoltageCalibration cal;
  cal.gain << 1.2e-6, 0.3e-6, -0.1e-6, 0.9e-6;
  cal.origin = {1e-6, -2e-6};
  const Eigen::Vector2d p(3.3e-6, -0.7e-6);
  const auto back = voltage_to_position(position_to_voltage(p, cal), cal);
  EXPECT_NEAR((back - p).norm(), 0.0, 1e-18);
  cal.gain << 1e-6, 2e-6, 2e-6, 4e-6;
  EXPECT_THROW(position_to_voltage(p, cal), SingularCalibration);
}

TEST(CoulombChain, ClosedFormsAndBalance) {
  const auto two = coulomb_chain_positions(2);
  EXPECT_NEAR(two[1], std::cbrt(0.25), 1e-12);
  EXPECT_NEAR(two[0], -std::cbrt(0.25), 1e-12);
  const auto three = coulomb_chain_positions(3);
  EXPECT_NEAR(three[1], 0.0, 1e-12);
  EXPECT_NEAR(three[2], std::cbrt(1.25), 1e-12);
  const auto five = coulomb_chain_positions(5);
  EXPECT_NEAR(five[3], 0.8221, 1e-4);
  EXPECT_NEAR(five[4], 1.7429, 1e-4);
  for (std::size_t i = 0; i < five.size(); ++i) EXPECT_NEAR(five[i], -five[4 - i], 1e-12);
}

TEST(CoulombChain, LengthScale) {
  const double m = 174 * constants::atomic_mass_unit, w = khz(120.0);
  const double e = 1.602176634e-19, eps0 = 8.8541878128e-12;
  EXPECT_NEAR(chain_length_scale(m, w), std::pow(e * e / (4 * kPi * eps0 * m * w * w), 1.0 / 3.0), 1e-18);
  EXPECT_NEAR(chain_length_scale(m, w) * 1e6, 11.2, 0.1);
}

TEST(Probe, AutoPowerHitsHalfSaturation) {
  AtomConfig atoms;
  atoms.power = auto_scaled_power(atoms, 0.5);
  const double sat = saturated_rate_4level(atoms.params.four_level());
  EXPECT_NEAR(atoms.rate(atoms.rabi(1.0)) / sat, 0.5, 1e-9);
  EXPECT_THROW(auto_scaled_power(atoms, 1.0), ConfigError);
}

TEST(Probe, CountsLinearizationInverts) {
  ProbeModel model;
  model.atoms.power = auto_scaled_power(model.atoms, 0.5);
  for (double a : {0.05, 0.3, 0.8, 1.0, 1.3}) {
    const double c = model.expected_counts(a);
    EXPECT_NEAR(model.intensity_for_counts(c), a * a, 1e-8 * std::max(1.0, a * a)) << a;
  }
  EXPECT_EQ(model.intensity_for_counts(0.5 * model.camera.dark_rate * model.camera.exposure), 0.0);
}

TEST(Probe, CountsAreRateTimesEfficiencyPlusDark) {
  ProbeModel model;
  const double r = 1.7e6;
  EXPECT_DOUBLE_EQ(model.expected_counts_for_rate(r),
                   (r * model.camera.collection_efficiency + model.camera.dark_rate) * model.camera.exposure);
}

TEST(Probe, TenLevelTurnoverIsInterior) {
  AtomConfig atoms;
  atoms.model = AtomModel::TenLevel;
  atoms.params.tweezer.detuning = mhz(40.0);
  const double top = turnover_rabi(atoms);
  EXPECT_GT(atoms.rate(top), atoms.rate(0.5 * top));
  EXPECT_GT(atoms.rate(top), atoms.rate(2.0 * top));
  const double target = 0.3 * atoms.rate(top);
  EXPECT_NEAR(atoms.rate(rabi_for_rate(atoms, target)) / target, 1.0, 1e-8);
}

TEST(Lab, SeededMeasurementsRepeat) {
  VirtualLab a(quiet_lab(), 11), b(quiet_lab(), 11);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.measure(), b.measure());
  auto c = a.clone(5), d = a.clone(5);
  EXPECT_EQ(c.measure(), d.measure());
}

TEST(Lab, FlatnessGeometryChecked) {
  auto cfg = quiet_lab();
  cfg.flatness = PhaseMask(MaskGeometry{16, 16, 500e-6});
  EXPECT_THROW(VirtualLab(cfg, 1), GeometryMismatch);
}

TEST(Lab, TargetGratingPeaksAtTarget) {
  auto cfg = quiet_lab();
  VirtualLab lab(cfg, 1);
  lab.display(compose_pattern(lab.flatness(), lab.target_grating(), PhaseMask(lab.geometry())));
  const double at = lab.expected_counts();
  lab.move_ion(cfg.target_y + 2e-6, cfg.target_z);
  EXPECT_LT(lab.expected_counts(), at);
  lab.move_ion(cfg.target_y, cfg.target_z - 2e-6);
  EXPECT_LT(lab.expected_counts(), at);
}

TEST(BeamMap, ThreadCountInvariant) {
  VirtualLab a(quiet_lab(), 4), b(quiet_lab(), 4);
  for (auto* lab : {&a, &b})
    lab->display(compose_pattern(lab->flatness(), lab->target_grating(), PhaseMask(lab->geometry())));
  const auto ys = centered_axis(15e-6, 0.8e-6, 7), zs = centered_axis(0.0, 0.8e-6, 5);
  const auto s1 = map_beam(a, ys, zs, {3, false, 1});
  const auto s3 = map_beam(b, ys, zs, {3, false, 3});
  ASSERT_EQ(s1.records.size(), 35u);
  for (std::size_t k = 0; k < s1.records.size(); ++k) {
    EXPECT_EQ(s1.records[k].counts_mean, s3.records[k].counts_mean);
    EXPECT_EQ(s1.records[k].counts_var, s3.records[k].counts_var);
  }
  EXPECT_EQ(s1.records[8].y, ys[1]);
  EXPECT_EQ(s1.records[8].z, zs[1]);
}

TEST(BeamMap, NoiselessHasNoVariance) {
  VirtualLab lab(quiet_lab(), 4);
  const auto s = map_beam(lab, {15e-6}, {0.0, 1e-6}, {4, true, 1});
  for (const auto& r : s.records) EXPECT_EQ(r.counts_var, 0.0);
  EXPECT_THROW(map_beam(lab, {}, {0.0}), ConfigError);
  EXPECT_THROW(map_beam(lab, {0.0}, {0.0}, {0, false, 1}), ConfigError);
}

TEST(CptMap, NeedsTenLevelAndShowsTurnover) {
  auto cfg = quiet_lab();
  VirtualLab four(cfg, 1);
  EXPECT_THROW(cpt_map(four, CptAxis::Power, {1e-3}, {0.0}), ConfigError);

  cfg.atoms.model = AtomModel::TenLevel;
  cfg.atoms.params.tweezer.detuning = mhz(40.0);
  cfg.auto_power = false;
  VirtualLab lab(cfg, 1);
  lab.display(compose_pattern(lab.flatness(), lab.target_grating(), PhaseMask(lab.geometry())));
  const std::vector<double> powers{2e-5, 2e-4, 1e-3, 5e-3, 2e-2, 1e-1};
  const auto map = cpt_map(lab, CptAxis::Power, powers, {0.0});
  Eigen::Index best = 0;
  map.counts.row(0).maxCoeff(&best);
  EXPECT_GT(best, 0);
  EXPECT_LT(best, static_cast<Eigen::Index>(powers.size()) - 1);
}
