#include <gtest/gtest.h>

#include <random>

#include "tweezerlab/beam_fit.hpp"
#include "tweezerlab/optics.hpp"
#include "tweezerlab/zernike.hpp"

using namespace tweezerlab;

namespace {

MaskGeometry desk() { return {128, 128, 125e-6}; }

PhaseMask random_mask(const MaskGeometry& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, kTwoPi);
  PhaseMask m(g);
  for (auto& p : m.phases()) p = u(rng);
  return m;
}

// Gaussian fit to the focal intensity within a window around the peak.
GaussianFit2D fit_focus(const ComplexField& f, double half_width) {
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

}  // namespace

TEST(BlazedGrating, InfinitePeriodIsFlat) {
  const auto m = blazed_grating(std::numeric_limits<double>::infinity(), {1, 0}, desk());
  for (double p : m.phases()) EXPECT_EQ(p, 0.0);
}

TEST(BlazedGrating, BelowNyquistThrows) {
  EXPECT_THROW(blazed_grating(1.5 * 125e-6, {1, 0}, desk()), AliasError);
  EXPECT_NO_THROW(blazed_grating(2.0 * 125e-6, {1, 0}, desk()));
}

TEST(BlazedGrating, PhasesCanonicalAndLinear) {
  const auto g = desk();
  const double period = 1e-3;
  const auto m = blazed_grating(period, {0, 1}, g);
  for (int r = 0; r < g.height; ++r) {
    EXPECT_GE(m.at(r, 0), 0.0);
    EXPECT_LT(m.at(r, 0), kTwoPi);
    EXPECT_NEAR(std::remainder(m.at(r, 5) - kTwoPi * g.y(r) / period, kTwoPi), 0.0, 1e-12);
  }
}

TEST(BlazedGrating, DisplacementIsLambdaFOverPeriod) {
  // Unit magnification: a 1 mm period at the lens gives lambda f / p = 75.4 um.
  OpticalTrain train;
  train.wavelength = 935e-9;
  train.magnification = 1.0;
  const MaskGeometry g{256, 256, 50e-6};
  train.aperture_radius = 25.4e-3;
  train.input_beam_waist = 4e-3;
  train.padding = 8;
  const auto f = propagate_to_focus(blazed_grating(1e-3, {1, 0}, g), train);
  const double expected = 935e-9 * 80.7e-3 / 1e-3;
  EXPECT_NEAR(expected, 75.4e-6, 0.1e-6);
  EXPECT_NEAR(f.peak_position().x(), expected, 0.5 * f.dy);
  EXPECT_NEAR(f.peak_position().y(), 0.0, 0.5 * f.dz);
}

TEST(ComposePattern, NeutralLayersLeaveGratingUnchanged) {
  const auto g = desk();
  const auto grating = blazed_grating(0.8e-3, {1, 1}, g);
  const auto out = compose_pattern(PhaseMask(g), grating, PhaseMask(g));
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(out.phases()[k], grating.phases()[k]);
}

TEST(ComposePattern, AddThenSubtractIsIdentity) {
  const auto g = desk();
  const auto a = random_mask(g, 1), b = random_mask(g, 2);
  const auto back = (a + b) - b;
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(back.phases()[k], a.phases()[k], 1e-12);
}

TEST(ComposePattern, OrderIrrelevant) {
  const auto g = desk();
  const auto a = random_mask(g, 3), b = random_mask(g, 4), c = random_mask(g, 5);
  const auto x = compose_pattern(a, b, c), y = compose_pattern(c, a, b);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(std::remainder(x.phases()[k] - y.phases()[k], kTwoPi), 0.0, 1e-12);
}

TEST(ComposePattern, GeometryMismatchThrows) {
  EXPECT_THROW(compose_pattern(PhaseMask(desk()), PhaseMask(MaskGeometry{64, 64, 250e-6}), PhaseMask(desk())),
               GeometryMismatch);
}

TEST(Propagation, ParsevalForRandomMasks) {
  OpticalTrain train;
  const auto g = desk();
  for (unsigned s = 0; s < 3; ++s) {
    const auto mask = random_mask(g, s);
    const CMatrix pupil = pupil_field(mask, train);
    const double dxp = train.pupil_pitch(g.pitch);
    const double p_in = pupil.squaredNorm() * dxp * dxp;
    const auto f = propagate_to_focus(mask, train);
    EXPECT_NEAR(f.power() / p_in, 1.0, 1e-6);
  }
}

TEST(Propagation, UntruncatedGaussianWaist) {
  OpticalTrain train;
  train.input_beam_waist = 6e-3;
  const auto f = propagate_to_focus(PhaseMask(desk()), train);
  const double expected = train.wavelength * train.focal_length / (kPi * train.input_beam_waist);
  const auto fit = fit_focus(f, 1.5 * expected);
  EXPECT_NEAR(fit.w1 / expected, 1.0, 0.02);
  EXPECT_NEAR(fit.w2 / expected, 1.0, 0.02);
}

TEST(Propagation, DefaultTrainDiffractionLimit) {
  const auto f = propagate_to_focus(PhaseMask(desk()), OpticalTrain{});
  const auto fit = fit_focus(f, 3e-6);
  EXPECT_GE(fit.w2, 1.9e-6);
  EXPECT_LE(fit.w1, 2.7e-6);
  EXPECT_NEAR(f.peak_position().norm(), 0.0, 1e-12);
}

TEST(Propagation, UndersamplingThrows) {
  OpticalTrain train;
  train.padding = 4;
  EXPECT_THROW(propagate_to_focus(PhaseMask(desk()), train), SamplingError);
}

TEST(Propagation, GratingShiftsPeakAndKeepsShape) {
  OpticalTrain train;
  const auto g = desk();
  const auto f0 = propagate_to_focus(PhaseMask(g), train);
  const auto f1 = propagate_to_focus(grating_for_displacement(train, g, 20e-6, -10e-6), train);
  const auto p1 = f1.peak_position();
  EXPECT_NEAR(p1.x(), 20e-6, 0.5 * f1.dy);
  EXPECT_NEAR(p1.y(), -10e-6, 0.5 * f1.dz);
  const auto a = fit_focus(f0, 3e-6), b = fit_focus(f1, 3e-6);
  EXPECT_NEAR(b.w1 / a.w1, 1.0, 0.01);
  EXPECT_NEAR(b.w2 / a.w2, 1.0, 0.01);
}

TEST(Propagation, DisplacementLinearOverDecadeOfPeriods) {
  OpticalTrain train;
  const auto g = desk();
  for (double period : {0.3e-3, 0.6e-3, 1.2e-3, 3e-3}) {
    const auto f = propagate_to_focus(blazed_grating(period, {1, 0}, g), train);
    EXPECT_NEAR(f.peak_position().x(), train.displacement_for_period(period), 0.5 * f.dy);
  }
}

TEST(Propagation, PistonLeavesIntensityUnchanged) {
  OpticalTrain train;
  const auto g = desk();
  const auto m = random_mask(g, 9);
  const auto f0 = propagate_to_focus(m, train);
  const auto f1 = propagate_to_focus(m + PhaseMask(g, 1.234), train);
  const double peak = f0.intensity().maxCoeff();
  EXPECT_LT((f0.intensity() - f1.intensity()).cwiseAbs().maxCoeff(), 1e-12 * peak);
}

TEST(Propagation, ZernikeTiltTranslatesWithoutReshaping) {
  OpticalTrain train;
  const auto g = desk();
  const auto f0 = propagate_to_focus(PhaseMask(g), train);
  const auto tilt = inject_aberration(ZernikeCoefficients::from_values({{2, 6.0}}), g);
  const auto f1 = propagate_to_focus(PhaseMask(g), train, &tilt);
  const auto a = fit_focus(f0, 3e-6), b = fit_focus(f1, 3e-6);
  EXPECT_GT(std::abs(b.center_y - a.center_y), 2 * f0.dy);
  EXPECT_NEAR(b.w1 / a.w1, 1.0, 0.01);
  EXPECT_NEAR(b.w2 / a.w2, 1.0, 0.01);
}

TEST(Propagation, AstigmatismElongatesFocus) {
  // Pure astigmatism is round at best focus; a defocus term picks the elongated plane.
  OpticalTrain train;
  const auto g = desk();
  const auto round = inject_aberration(ZernikeCoefficients::from_values({{6, 1.5}}), g);
  const auto r = fit_focus(propagate_to_focus(PhaseMask(g), train, &round), 8e-6);
  EXPECT_NEAR(r.w1 / r.w2, 1.0, 1e-3);
  const auto ab = inject_aberration(ZernikeCoefficients::from_values({{4, 1.0}, {6, 1.5}}), g);
  const auto f = propagate_to_focus(PhaseMask(g), train, &ab);
  const auto fit = fit_focus(f, 8e-6);
  EXPECT_GE(fit.w1 / fit.w2, 1.5);
}

TEST(FocalFieldEvaluator, MatchesFftSamples) {
  OpticalTrain train;
  const auto g = desk();
  const auto m = random_mask(g, 12);
  const auto f = propagate_to_focus(m, train);
  const CMatrix pupil = pupil_field(m, train);
  FocalFieldEvaluator ev(g, train);
  const double scale = f.samples.cwiseAbs().maxCoeff();
  for (Eigen::Index r : {300, 320, 333}) {
    for (Eigen::Index c : {290, 320, 351}) {
      EXPECT_LT(std::abs(ev.evaluate(pupil, f.y(c), f.z(r)) - f.samples(r, c)), 1e-9 * scale);
    }
  }
  EXPECT_NEAR(ideal_peak_amplitude(g, train), std::abs(propagate_to_focus(PhaseMask(g), train).sample(0, 0)), 1e-9 * scale);
}

TEST(FocalFieldEvaluator, BlocksSumToWhole) {
  OpticalTrain train;
  const auto g = desk();
  const CMatrix pupil = pupil_field(random_mask(g, 13), train);
  FocalFieldEvaluator ev(g, train);
  const auto pt = ev.point(1.3e-6, -0.7e-6);
  Complex sum = 0.0;
  for (int r0 = 0; r0 < g.height; r0 += 32)
    for (int c0 = 0; c0 < g.width; c0 += 64) sum += ev.evaluate_block(pupil, pt, r0, c0, 32, 64);
  EXPECT_LT(std::abs(sum - ev.evaluate(pupil, pt)), 1e-12 * std::abs(sum) + 1e-12);
}

TEST(OpticalTrain, NumericalApertureConsistency) {
  OpticalTrain t;
  EXPECT_NO_THROW(t.validate());
  t.numerical_aperture = 0.4;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Twzm, RoundTripAndLayout) {
  MaskGeometry g{3, 2, 12.5e-6};
  PhaseMask m(g, std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0, 6.0});
  const std::string bytes = encode_twzm(m);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "TWZM");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  double pitch;
  std::memcpy(&pitch, bytes.data() + 12, 8);
  EXPECT_EQ(pitch, 12.5e-6);
  float last;
  std::memcpy(&last, bytes.data() + 20 + 5 * 4, 4);
  EXPECT_EQ(last, 6.0f);
  const auto back = decode_twzm(bytes);
  EXPECT_EQ(back.geometry(), g);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(back.phases()[k], static_cast<float>(m.phases()[k]));
  EXPECT_EQ(encode_twzm(back), bytes);
  EXPECT_THROW(decode_twzm("TWZX"), ConfigError);
  EXPECT_THROW(decode_twzm(bytes.substr(0, bytes.size() - 1)), ConfigError);
}
