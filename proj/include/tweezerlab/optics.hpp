#pragma once

// Scalar Fourier optics from the SLM plane to the focal plane.
//
// The SLM is imaged onto the lens pupil with magnification M; the focal field
// is the scaled Fourier transform
//   E(u, v) = 1/(i lambda f) * sum_pixels E_p dxp^2 exp(-i 2 pi (x u + y v) / (lambda f)).
// Mask columns map to the focal y axis and mask rows to the focal z axis.

#include <fftw3.h>

#include <mutex>
#include <optional>

#include "core.hpp"
#include "phase_mask.hpp"

namespace tweezerlab {

struct OpticalTrain {
  double wavelength = 935.2e-9;
  double focal_length = 80.7e-3;
  double aperture_radius = 25.4e-3;
  double input_beam_waist = 12.7e-3;  // 1/e^2 intensity radius at the pupil
  double numerical_aperture = 0.3;
  double magnification = 50.8 / 16.0;  // SLM -> pupil
  int padding = 5;

  void validate() const {
    if (!(wavelength > 0 && focal_length > 0 && aperture_radius > 0 && input_beam_waist > 0 &&
          magnification > 0))
      throw ConfigError("optical train lengths must be positive");
    if (padding < 1) throw ConfigError("padding factor must be at least 1");
    const double na = aperture_radius / std::hypot(aperture_radius, focal_length);
    if (std::abs(na - numerical_aperture) > 0.01 * numerical_aperture)
      throw ConfigError("numerical aperture inconsistent with aperture radius and focal length");
  }

  /// Lens-plane sample spacing for an SLM pixel pitch.
  double pupil_pitch(double slm_pitch) const { return slm_pitch * magnification; }

  /// Focal displacement produced by an SLM grating of the given period.
  double displacement_for_period(double period) const {
    return wavelength * focal_length / (magnification * period);
  }
  double period_for_displacement(double displacement) const {
    return wavelength * focal_length / (magnification * std::abs(displacement));
  }

  /// Gaussian-beam estimate of the focal 1/e^2 waist for a given mask.
  double expected_waist(const MaskGeometry& g) const {
    const double half = 0.5 * std::min(g.width, g.height) * pupil_pitch(g.pitch);
    const double w_eff = std::min({input_beam_waist, aperture_radius, half});
    return wavelength * focal_length / (kPi * w_eff);
  }

  double focal_sample(const MaskGeometry& g) const {
    const int n = padding * std::max(g.width, g.height);
    return wavelength * focal_length / (n * pupil_pitch(g.pitch));
  }
};

/// Grating that moves the focus to (dy, dz) in the focal plane.
inline PhaseMask grating_for_displacement(const OpticalTrain& train, const MaskGeometry& g, double dy, double dz) {
  const double d = std::hypot(dy, dz);
  if (d == 0.0) return PhaseMask(g);
  return blazed_grating(train.period_for_displacement(d), Eigen::Vector2d(dy / d, dz / d), g);
}

/// Sampled focal-plane field; samples(row, col) sits at (y0 + col*dy, z0 + row*dz).
struct ComplexField {
  CMatrix samples;
  double dy = 0.0;
  double dz = 0.0;
  double y0 = 0.0;
  double z0 = 0.0;

  double y(Eigen::Index col) const { return y0 + static_cast<double>(col) * dy; }
  double z(Eigen::Index row) const { return z0 + static_cast<double>(row) * dz; }
  double power() const { return samples.squaredNorm() * dy * dz; }
  RMatrix intensity() const { return samples.cwiseAbs2(); }

  /// Bilinear interpolation of the complex amplitude; zero outside the grid.
  Complex sample(double y, double z) const {
    const double fc = (y - y0) / dy;
    const double fr = (z - z0) / dz;
    const auto c0 = static_cast<Eigen::Index>(std::floor(fc));
    const auto r0 = static_cast<Eigen::Index>(std::floor(fr));
    if (c0 < 0 || r0 < 0 || c0 + 1 >= samples.cols() || r0 + 1 >= samples.rows()) return 0.0;
    const double tc = fc - static_cast<double>(c0);
    const double tr = fr - static_cast<double>(r0);
    return (1 - tr) * ((1 - tc) * samples(r0, c0) + tc * samples(r0, c0 + 1)) +
           tr * ((1 - tc) * samples(r0 + 1, c0) + tc * samples(r0 + 1, c0 + 1));
  }

  /// Location of the brightest sample.
  Eigen::Vector2d peak_position() const {
    Eigen::Index r = 0, c = 0;
    samples.cwiseAbs2().maxCoeff(&r, &c);
    return {y(c), z(r)};
  }
};

/// Apertured Gaussian illumination times exp(i phase) on the pupil grid,
/// normalised so that the untruncated beam carries unit power.
inline CMatrix pupil_field(const PhaseMask& mask, const OpticalTrain& train, const PhaseMask* extra_phase = nullptr) {
  train.validate();
  if (extra_phase) mask.require_same(*extra_phase);
  const auto& g = mask.geometry();
  const double w = train.input_beam_waist;
  const double amp0 = std::sqrt(2.0 / (kPi * w * w));
  const double m = train.magnification;
  const double r2max = train.aperture_radius * train.aperture_radius;
  CMatrix E(g.height, g.width);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double px = m * g.x(c);
      const double py = m * g.y(r);
      const double rr = px * px + py * py;
      if (rr > r2max) {
        E(r, c) = 0.0;
        continue;
      }
      double phi = mask.at(r, c);
      if (extra_phase) phi += extra_phase->at(r, c);
      E(r, c) = amp0 * std::exp(-rr / (w * w)) * std::polar(1.0, phi);
    }
  }
  return E;
}

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Focal field from a pupil-plane field sampled at dxp; exact discrete
/// transform, so total power is conserved to rounding.
inline ComplexField propagate_pupil(const CMatrix& pupil, double dxp, const OpticalTrain& train) {
  const auto h = pupil.rows();
  const auto w = pupil.cols();
  const Eigen::Index n = train.padding * std::max(h, w);
  const Eigen::Index off_r = (n - h) / 2;
  const Eigen::Index off_c = (n - w) / 2;
  const double lf = train.wavelength * train.focal_length;
  const double du = lf / (static_cast<double>(n) * dxp);

  // Pupil sample (r, c) sits at index p with coordinate (p - p_c) dxp.
  const double pc_r = static_cast<double>(off_r) + 0.5 * static_cast<double>(h - 1);
  const double pc_c = static_cast<double>(off_c) + 0.5 * static_cast<double>(w - 1);

  fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(n * n));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  std::fill(reinterpret_cast<double*>(buf), reinterpret_cast<double*>(buf) + 2 * n * n, 0.0);
  // Modulation moves output bin k to focal coordinate (k - n/2) du.
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const Eigen::Index pr = r + off_r;
      const Eigen::Index pcol = c + off_c;
      const double sign = ((pr + pcol) % 2 == 0) ? 1.0 : -1.0;
      const Complex v = sign * pupil(r, c);
      buf[pr * n + pcol][0] = v.real();
      buf[pr * n + pcol][1] = v.imag();
    }
  }
  fftw_execute(plan);

  std::vector<Complex> ph_r(static_cast<std::size_t>(n)), ph_c(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k) - 0.5 * static_cast<double>(n);
    ph_r[static_cast<std::size_t>(k)] = std::polar(1.0, kTwoPi * pc_r * kk / static_cast<double>(n));
    ph_c[static_cast<std::size_t>(k)] = std::polar(1.0, kTwoPi * pc_c * kk / static_cast<double>(n));
  }
  const Complex pref = dxp * dxp / (Complex(0.0, 1.0) * lf);

  ComplexField field;
  field.samples.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      field.samples(r, c) = pref * ph_r[static_cast<std::size_t>(r)] * ph_c[static_cast<std::size_t>(c)] *
                            Complex(buf[r * n + c][0], buf[r * n + c][1]);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  field.dy = field.dz = du;
  field.y0 = field.z0 = -0.5 * static_cast<double>(n) * du;
  return field;
}

/// Focal field of a phase mask. extra_phase is added in the pupil without
/// wrapping (used for hidden aberrations).
inline ComplexField propagate_to_focus(const PhaseMask& mask, const OpticalTrain& train,
                                       const PhaseMask* extra_phase = nullptr) {
  train.validate();
  const auto& g = mask.geometry();
  const double du = train.focal_sample(g);
  if (du > train.expected_waist(g) / 6.0 * (1.0 + 1e-12))
    throw SamplingError("focal sampling coarser than a sixth of the expected waist; raise padding");
  return propagate_pupil(pupil_field(mask, train, extra_phase), train.pupil_pitch(g.pitch), train);
}

/// Separable phase factors for one focal point.
struct FocalPoint {
  double y = 0.0;
  double z = 0.0;
  CVector col_factor;  // over mask columns
  CVector row_factor;  // over mask rows
};

/// Exact pointwise evaluation of the focal field (cost width*height per point).
class FocalFieldEvaluator {
 public:
  FocalFieldEvaluator(const MaskGeometry& g, const OpticalTrain& train) : geom_(g), train_(train) {
    train.validate();
    const double dxp = train.pupil_pitch(g.pitch);
    pref_ = dxp * dxp / (Complex(0.0, 1.0) * train.wavelength * train.focal_length);
  }

  const MaskGeometry& geometry() const { return geom_; }
  const OpticalTrain& train() const { return train_; }

  FocalPoint point(double y, double z) const {
    FocalPoint p;
    p.y = y;
    p.z = z;
    const double k = -kTwoPi * train_.magnification / (train_.wavelength * train_.focal_length);
    p.col_factor.resize(geom_.width);
    p.row_factor.resize(geom_.height);
    for (int c = 0; c < geom_.width; ++c) p.col_factor(c) = std::polar(1.0, k * geom_.x(c) * y);
    for (int r = 0; r < geom_.height; ++r) p.row_factor(r) = std::polar(1.0, k * geom_.y(r) * z);
    return p;
  }

  Complex evaluate(const CMatrix& pupil, const FocalPoint& p) const {
    return pref_ * p.row_factor.transpose() * (pupil * p.col_factor);
  }

  /// Contribution of the pixel block [r0, r0+h) x [c0, c0+w).
  Complex evaluate_block(const CMatrix& pupil, const FocalPoint& p, int r0, int c0, int h, int w) const {
    return pref_ * p.row_factor.segment(r0, h).transpose() *
           (pupil.block(r0, c0, h, w) * p.col_factor.segment(c0, w));
  }

  Complex evaluate(const CMatrix& pupil, double y, double z) const { return evaluate(pupil, point(y, z)); }

 private:
  MaskGeometry geom_;
  OpticalTrain train_;
  Complex pref_;
};

/// Amplitude at focus of an unaberrated flat mask, used as the Rabi calibration reference.
inline double ideal_peak_amplitude(const MaskGeometry& g, const OpticalTrain& train) {
  FocalFieldEvaluator ev(g, train);
  return std::abs(ev.evaluate(pupil_field(PhaseMask(g), train), 0.0, 0.0));
}

}  // namespace tweezerlab
