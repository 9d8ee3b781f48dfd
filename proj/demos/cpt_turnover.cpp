// Fluorescence of the 10-level ion against tweezer Rabi frequency.
#include <iostream>

#include "tweezerlab/ten_level.hpp"

using namespace tweezerlab;

int main() {
  auto p = TenLevelParams::defaults();
  p.tweezer.detuning = mhz(40.0);
  std::cout << "omega_tw_mhz,scattering_rate_per_s\n";
  for (double om = 5.0; om <= 2000.0; om *= 1.5) {
    p.tweezer.rabi = mhz(om);
    std::cout << om << ',' << fluorescence_10level(p) << '\n';
  }
}
