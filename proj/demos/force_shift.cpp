// Apparent beam-centre shift from radiation pressure against trap stiffness.
#include <iostream>

#include "tweezerlab/mechanics.hpp"

using namespace tweezerlab;

int main() {
  const ForceBalanceConfig cfg;
  const std::vector<double> omegas{khz(38.0), khz(60.0), khz(90.0), khz(120.0), khz(150.0)};
  const auto pts = peak_shift_vs_omega(omegas, cfg);
  for (const auto& p : pts)
    std::cout << p.omega_z / kTwoPi / 1e3 << " kHz: z0 = " << p.z0 * 1e6 << " um" << (p.multistable ? " (multistable)" : "")
              << '\n';
  std::cout << "power law exponent " << power_law_exponent(pts) << '\n';
}
