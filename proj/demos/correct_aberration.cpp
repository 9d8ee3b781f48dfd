// Zone-by-zone correction of a hidden aberration on the virtual lab.
#include <iostream>

#include "tweezerlab/correction.hpp"

using namespace tweezerlab;

int main(int argc, char** argv) {
  const int zones = argc > 1 ? std::atoi(argv[1]) : 64;
  LabConfig cfg;
  cfg.aberration = reference_aberration(1.5);
  VirtualLab lab(cfg, 42);

  CorrectionOptions opt;
  opt.zones = zones;
  const auto res = run_correction(lab, opt);
  std::cout << zones << " zones, " << res.low_contrast_zones << " low contrast\n"
            << "counts " << res.counts_before_mean << " -> " << res.counts_after_mean << '\n'
            << "residual wavefront " << residual_wavefront_rms(lab, res.pattern.to_mask()) << " rad\n"
            << "peak intensity " << peak_intensity_ratio(lab, res.final_mask) << " of unaberrated\n";

  const auto fit = zernike_fit(res.pattern.to_mask(), 3);
  for (const auto& t : fit.terms) std::cout << "  Z" << t.j << " " << t.coeff << " rad\n";
}
