#include <gtest/gtest.h>

#include <random>

#include "tweezerlab/ten_level.hpp"

using namespace tweezerlab;

namespace {

TenLevelParams cpt_params(double omega_tw, double delta_tw) {
  auto p = TenLevelParams::defaults();
  p.tweezer.rabi = omega_tw;
  p.tweezer.detuning = delta_tw;
  return p;
}

int idx(Manifold m, int m2) { return ten_level_index(m, m2); }

}  // namespace

TEST(TenLevelBasis, OrderIsFixed) {
  const auto& b = ten_level_basis();
  EXPECT_EQ(b[0].manifold, Manifold::S);
  EXPECT_EQ(b[0].m2, -1);
  EXPECT_EQ(b[3].manifold, Manifold::P);
  EXPECT_EQ(b[3].m2, 1);
  EXPECT_EQ(b[4].m2, -3);
  EXPECT_EQ(b[9].manifold, Manifold::T);
  EXPECT_EQ(b[9].m2, 1);
}

TEST(PolarizationOverlap, PiLightAlongAxis) {
  const CVec3 eps(0, 0, 1);
  const Vec3 axis(0, 0, 1);
  EXPECT_NEAR(std::abs(polarization_overlap(eps, 0, axis)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(polarization_overlap(eps, 1, axis)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(polarization_overlap(eps, -1, axis)), 0.0, 1e-15);
}

TEST(PolarizationOverlap, TweezerGeometryIsEqualSigmaMix) {
  const CVec3 eps(0, 1, 0);
  const Vec3 axis(1, 0, 0);
  EXPECT_NEAR(std::norm(polarization_overlap(eps, 1, axis)), 0.5, 1e-15);
  EXPECT_NEAR(std::norm(polarization_overlap(eps, -1, axis)), 0.5, 1e-15);
  EXPECT_NEAR(std::norm(polarization_overlap(eps, 0, axis)), 0.0, 1e-15);
}

TEST(PolarizationOverlap, CircularLightSelectsOneComponent) {
  // xi_{+1} itself, for the axis along z.
  const CVec3 sigma_plus = -CVec3(1, Complex(0, 1), 0) / std::sqrt(2.0);
  const Vec3 axis(0, 0, 1);
  EXPECT_NEAR(std::norm(polarization_overlap(sigma_plus, 1, axis)), 1.0, 1e-15);
  EXPECT_NEAR(std::norm(polarization_overlap(sigma_plus, -1, axis)), 0.0, 1e-15);
}

TEST(PolarizationOverlap, CompletenessOverRandomPolarizations) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    CVec3 eps(Complex(nd(rng), nd(rng)), Complex(nd(rng), nd(rng)), Complex(nd(rng), nd(rng)));
    eps.normalize();
    Vec3 axis(nd(rng), nd(rng), nd(rng));
    double s = 0.0;
    for (int q = -1; q <= 1; ++q) s += std::norm(polarization_overlap(eps, q, axis));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(PolarizationOverlap, ZeroAxisThrows) {
  EXPECT_THROW(polarization_overlap(CVec3(0, 0, 1), 0, Vec3::Zero()), ConfigError);
}

TEST(CouplingTable, SumRuleSymmetry) {
  const auto t = CouplingTable::standard();
  EXPECT_NEAR(t.lower_sum(Transition::Cooling369, -1), t.lower_sum(Transition::Cooling369, 1), 1e-15);
  const double d = t.lower_sum(Transition::Repump935, -3);
  for (int m2 : {-1, 1, 3}) EXPECT_NEAR(t.lower_sum(Transition::Repump935, m2), d, 1e-15);
  EXPECT_NEAR(t.upper_sum(Transition::Cooling369, 1), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(t.upper_sum(Transition::Repump935, -1), 2.0 / 3.0, 1e-15);
}

TEST(TenLevelHamiltonian, ZeroFieldZeroDrives) {
  TenLevelParams p;
  p.zeeman.field_magnitude = 0.0;
  EXPECT_EQ(hamiltonian_10level(p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TenLevelHamiltonian, ZeemanDiagonalAntisymmetric) {
  TenLevelParams p;
  const CMatrix h = hamiltonian_10level(p);
  CMatrix off = h;
  off.diagonal().setZero();
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
  const double mu_b_over_hbar = constants::bohr_magneton / constants::hbar;
  EXPECT_NEAR(h(idx(Manifold::S, 1), idx(Manifold::S, 1)).real(), 2.0 * 0.5 * mu_b_over_hbar * 0.5e-3, 1e-3);
  EXPECT_NEAR(h(idx(Manifold::D, 3), idx(Manifold::D, 3)).real(), 0.8 * 1.5 * mu_b_over_hbar * 0.5e-3, 1e-3);
  for (int k = 0; k < kTenLevelDim; ++k) {
    const auto& s = ten_level_basis()[static_cast<std::size_t>(k)];
    const int mirror = idx(s.manifold, -s.m2);
    EXPECT_NEAR(h(k, k).real(), -h(mirror, mirror).real(), 1e-9);
  }
}

TEST(TenLevelHamiltonian, TweezerAlongYCouplesOnlySigma) {
  auto p = cpt_params(mhz(100), 0.0);
  p.doppler.rabi = 0.0;
  const CMatrix h = hamiltonian_10level(p);
  EXPECT_LT((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-6);
  for (int d2 : {-3, -1, 1, 3}) {
    for (int t2 : {-1, 1}) {
      const Complex v = h(idx(Manifold::D, d2), idx(Manifold::T, t2));
      if (std::abs(t2 - d2) == 2) {
        const double a = CouplingTable::standard().amplitude(Transition::Repump935, d2, t2);
        EXPECT_NEAR(std::abs(v), std::abs(a) * mhz(100) / 2 / std::sqrt(2.0), 1e-3);
      } else {
        EXPECT_EQ(std::abs(v), 0.0);
      }
    }
  }
}

TEST(TenLevelHamiltonian, MissingCouplingEntryThrows) {
  auto p = cpt_params(mhz(10), 0.0);
  p.couplings.entries.erase({Transition::Repump935, 3, 1});
  EXPECT_THROW(hamiltonian_10level(p), ConfigError);
}

TEST(TenLevelJumps, UpperSublevelsDecayAtFullLinewidth) {
  const auto p = TenLevelParams::defaults();
  const auto jumps = jump_operators_10level(p.couplings, p.gamma_p, p.gamma_32, p.branching);
  std::vector<double> out(kTenLevelDim, 0.0), to_d(kTenLevelDim, 0.0), to_s(kTenLevelDim, 0.0);
  for (const auto& j : jumps) {
    out[static_cast<std::size_t>(j.upper)] += j.rate;
    const auto lower = ten_level_basis()[static_cast<std::size_t>(j.lower)];
    const auto upper = ten_level_basis()[static_cast<std::size_t>(j.upper)];
    EXPECT_LE(std::abs(lower.m2 - upper.m2), 2);
    (lower.manifold == Manifold::D ? to_d : to_s)[static_cast<std::size_t>(j.upper)] += j.rate;
  }
  for (int m2 : {-1, 1}) {
    EXPECT_NEAR(out[static_cast<std::size_t>(idx(Manifold::P, m2))], p.gamma_p, 1e-10 * p.gamma_p);
    EXPECT_NEAR(out[static_cast<std::size_t>(idx(Manifold::T, m2))], p.gamma_32, 1e-10 * p.gamma_32);
    const auto t = static_cast<std::size_t>(idx(Manifold::T, m2));
    EXPECT_NEAR(to_d[t] / to_s[t], 0.018 / 0.982, 1e-12);
  }
}

TEST(TenLevelJumps, AsymmetricTableViolatesSumRule) {
  auto t = CouplingTable::standard();
  t.entries[{Transition::Cooling369, 1, 1}] = 0.9;
  EXPECT_THROW(jump_operators_10level(t, mhz(21), mhz(4.2)), ConfigError);
}

TEST(TenLevelFluorescence, DarkWithoutTweezer) {
  EXPECT_EQ(fluorescence_10level(cpt_params(0.0, mhz(40))), 0.0);
}

TEST(TenLevelFluorescence, CptTurnoverAtFortyMegahertz) {
  auto p = cpt_params(0.0, mhz(40));
  p.doppler.rabi = 3 * p.gamma_p;
  std::vector<double> omegas, rates;
  for (double om = 5; om <= 3000; om *= 1.5) {
    p.tweezer.rabi = mhz(om);
    omegas.push_back(om);
    rates.push_back(fluorescence_10level(p));
  }
  const auto imax = static_cast<std::size_t>(std::max_element(rates.begin(), rates.end()) - rates.begin());
  EXPECT_GT(imax, 0u);
  EXPECT_LT(imax, rates.size() - 1);
  EXPECT_LT(rates.back(), 0.5 * rates[imax]);
}

TEST(TenLevelFluorescence, WeakDopplerDriveIsQuadratic) {
  auto p = cpt_params(mhz(50), mhz(10));
  std::vector<double> lx, ly;
  for (double f : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
    p.doppler.rabi = f * p.gamma_p;
    lx.push_back(std::log(p.doppler.rabi));
    ly.push_back(std::log(fluorescence_10level(p)));
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sx += lx[k];
    sy += ly[k];
    sxx += lx[k] * lx[k];
    sxy += lx[k] * ly[k];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, 2.0, 0.02);
}

TEST(TenLevelFluorescence, InvariantUnderFieldReversal) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 10; ++k) {
    auto p = cpt_params(mhz(200 * (1.2 + u(rng))), mhz(60 * u(rng)));
    p.doppler.detuning = p.gamma_p * u(rng);
    p.zeeman.field_magnitude = 1e-3 * u(rng);
    const double a = fluorescence_10level(p);
    p.zeeman.field_magnitude = -p.zeeman.field_magnitude;
    const double b = fluorescence_10level(p);
    EXPECT_NEAR(a / b, 1.0, 1e-9);
  }
}

TEST(TenLevelFluorescence, PureLinearTweezerAlongFieldIsDegenerate) {
  auto p = cpt_params(mhz(100), 0.0);
  p.tweezer.polarization = CVec3(1, 0, 0);
  EXPECT_THROW(fluorescence_10level(p), DegenerateSteadyState);
}

TEST(TenLevelFluorescence, StatesArePhysical) {
  auto p = cpt_params(mhz(390), mhz(40));
  const auto rho = steady_state_10level(p);
  EXPECT_LT((rho.matrix - rho.matrix.adjoint()).norm(), 1e-10);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
}
