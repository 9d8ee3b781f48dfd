// Propagates a flat and a steered mask to the focus and fits the spots.
#include <iostream>

#include "tweezerlab/beam_fit.hpp"

using namespace tweezerlab;

int main() {
  const MaskGeometry g{64, 64, 250e-6};
  const OpticalTrain train;
  std::cout << "expected waist " << train.expected_waist(g) * 1e6 << " um\n";

  const auto flat = fit_focal_spot(propagate_to_focus(PhaseMask(g), train), 3e-6);
  std::cout << "flat mask: w1 " << flat.w1 * 1e6 << " um, w2 " << flat.w2 * 1e6 << " um\n";

  const auto steered = propagate_to_focus(grating_for_displacement(train, g, 15e-6, -5e-6), train);
  const auto pk = steered.peak_position();
  std::cout << "grating to (15, -5) um: peak at (" << pk.x() * 1e6 << ", " << pk.y() * 1e6 << ") um\n";
}
