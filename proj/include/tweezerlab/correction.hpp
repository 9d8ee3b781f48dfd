#pragma once

// Zone-interference aberration correction, the checkerboard two-spot split and
// a weighted Gerchberg-Saxton spot generator.
//
// Each probe zone is swept in global phase against a fixed reference zone while
// every other zone shows a background grating that throws its light away from
// the ion. The phase of maximal fluorescence aligns the probe zone's focal
// field with the reference.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "beam_fit.hpp"
#include "ion_probe.hpp"
#include "optics.hpp"
#include "parallel.hpp"
#include "phase_mask.hpp"
#include "random.hpp"

namespace tweezerlab {

struct ZoneBlock {
  int r0 = 0;
  int c0 = 0;
  int h = 0;
  int w = 0;
  int grid_row = 0;
  int grid_col = 0;
};

struct ZonePartition {
  MaskGeometry geometry;
  int rows = 1;
  int cols = 1;
  std::vector<ZoneBlock> zones;  // row-major over the zone grid
  std::vector<int> zone_id;      // per pixel, row-major
  int reference = 0;

  int zone_count() const { return static_cast<int>(zones.size()); }
  int zone_of(int row, int col) const { return zone_id[static_cast<std::size_t>(row) * geometry.width + col]; }

  /// Non-reference zones in an outward square spiral from the reference.
  std::vector<int> visit_order() const {
    const auto& ref = zones[static_cast<std::size_t>(reference)];
    std::vector<int> order;
    for (int k = 0; k < zone_count(); ++k)
      if (k != reference) order.push_back(k);
    auto key = [&](int k) {
      const auto& z = zones[static_cast<std::size_t>(k)];
      const int dr = z.grid_row - ref.grid_row, dc = z.grid_col - ref.grid_col;
      double ang = std::atan2(static_cast<double>(dr), static_cast<double>(dc));
      if (ang < 0) ang += kTwoPi;
      return std::make_tuple(std::max(std::abs(dr), std::abs(dc)), ang, k);
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
    return order;
  }
};

/// Rectangular tiling with rows*cols = N and cols/rows nearest the mask aspect.
inline ZonePartition partition_zones(const MaskGeometry& g, int n) {
  g.validate();
  if (n < 1) throw ConfigError("zone count must be positive");
  if (static_cast<std::size_t>(n) > g.size()) throw ConfigError("more zones than pixels");
  const double aspect = static_cast<double>(g.width) / g.height;
  int best_rows = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int rows = 1; rows <= n; ++rows) {
    if (n % rows) continue;
    const int cols = n / rows;
    if (rows > g.height || cols > g.width) continue;
    const double cost = std::abs(std::log(static_cast<double>(cols) / rows / aspect));
    // Ties go to the layout with more zones along the longer side.
    const bool tie = std::abs(cost - best_cost) < 1e-12;
    if (cost < best_cost - 1e-12 || (tie && (aspect >= 1.0 ? cols > n / best_rows : rows > best_rows))) {
      best_cost = cost;
      best_rows = rows;
    }
  }
  if (best_rows < 0) throw ConfigError("zone count cannot be tiled onto the mask");

  ZonePartition p;
  p.geometry = g;
  p.rows = best_rows;
  p.cols = n / best_rows;
  p.zone_id.assign(g.size(), 0);
  auto edge = [](int k, int total, int parts) {
    return static_cast<int>(std::lround(static_cast<double>(k) * total / parts));
  };
  for (int zr = 0; zr < p.rows; ++zr) {
    for (int zc = 0; zc < p.cols; ++zc) {
      ZoneBlock b;
      b.r0 = edge(zr, g.height, p.rows);
      b.c0 = edge(zc, g.width, p.cols);
      b.h = edge(zr + 1, g.height, p.rows) - b.r0;
      b.w = edge(zc + 1, g.width, p.cols) - b.c0;
      b.grid_row = zr;
      b.grid_col = zc;
      const int id = static_cast<int>(p.zones.size());
      for (int r = b.r0; r < b.r0 + b.h; ++r)
        for (int c = b.c0; c < b.c0 + b.w; ++c) p.zone_id[static_cast<std::size_t>(r) * g.width + c] = id;
      p.zones.push_back(b);
    }
  }
  // Reference: zone whose centre is nearest the mask centre, lowest id on ties.
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < p.zone_count(); ++k) {
    const auto& b = p.zones[static_cast<std::size_t>(k)];
    const double cy = b.r0 + 0.5 * b.h - 0.5 * g.height;
    const double cx = b.c0 + 0.5 * b.w - 0.5 * g.width;
    const double d = cx * cx + cy * cy;
    if (d < best_d - 1e-9) {
      best_d = d;
      p.reference = k;
    }
  }
  return p;
}

struct CorrectionPattern {
  ZonePartition partition;
  std::vector<double> phases;  // per zone, reference = 0

  PhaseMask to_mask() const {
    PhaseMask m(partition.geometry);
    for (int r = 0; r < partition.geometry.height; ++r)
      for (int c = 0; c < partition.geometry.width; ++c)
        m.at(r, c) = phases[static_cast<std::size_t>(partition.zone_of(r, c))];
    return m;
  }

  static CorrectionPattern zero(const ZonePartition& p) {
    return {p, std::vector<double>(static_cast<std::size_t>(p.zone_count()), 0.0)};
  }
};

/// Per-zone phases made continuous across neighbouring zones: a breadth-first
/// walk from the reference adds the multiple of 2 pi closest to the mean of
/// already-unwrapped neighbours.
inline CorrectionPattern unwrap_zone_phases(const CorrectionPattern& pattern) {
  const auto& p = pattern.partition;
  CorrectionPattern out = pattern;
  std::vector<char> done(pattern.phases.size(), 0);
  std::queue<int> todo;
  todo.push(p.reference);
  done[static_cast<std::size_t>(p.reference)] = 1;
  auto neighbours = [&](int k) {
    std::vector<int> nb;
    const auto& z = p.zones[static_cast<std::size_t>(k)];
    if (z.grid_row > 0) nb.push_back(k - p.cols);
    if (z.grid_row + 1 < p.rows) nb.push_back(k + p.cols);
    if (z.grid_col > 0) nb.push_back(k - 1);
    if (z.grid_col + 1 < p.cols) nb.push_back(k + 1);
    return nb;
  };
  while (!todo.empty()) {
    const int k = todo.front();
    todo.pop();
    for (int n : neighbours(k)) {
      if (done[static_cast<std::size_t>(n)]) continue;
      double sum = 0.0;
      int cnt = 0;
      for (int m : neighbours(n))
        if (done[static_cast<std::size_t>(m)]) {
          sum += out.phases[static_cast<std::size_t>(m)];
          ++cnt;
        }
      const double anchor = sum / cnt;
      const double v = out.phases[static_cast<std::size_t>(n)];
      out.phases[static_cast<std::size_t>(n)] = v + kTwoPi * std::round((anchor - v) / kTwoPi);
      done[static_cast<std::size_t>(n)] = 1;
      todo.push(n);
    }
  }
  return out;
}

enum class SweepStatus { Ok, LowContrast };

struct ProbeSweepRecord {
  int zone = 0;
  std::vector<double> phases;
  std::vector<double> counts;
  double amplitude = 0.0;
  double offset = 0.0;
  double phi_max = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // over (C, A cos phi_max, A sin phi_max)
  double power = 0.0;
  SweepStatus status = SweepStatus::Ok;
};

/// Linear least squares of counts on (1, cos phi, sin phi).
inline void fit_cosine(ProbeSweepRecord& rec) {
  const auto k = static_cast<Eigen::Index>(rec.phases.size());
  RMatrix X(k, 3);
  RVector y(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double ph = rec.phases[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = std::cos(ph);
    X(i, 2) = std::sin(ph);
    y(i) = rec.counts[static_cast<std::size_t>(i)];
  }
  const Eigen::Matrix3d xtx = X.transpose() * X;
  const Eigen::Vector3d beta = xtx.ldlt().solve(X.transpose() * y);
  rec.offset = beta(0);
  rec.amplitude = std::hypot(beta(1), beta(2));
  rec.phi_max = wrap_phase(std::atan2(beta(2), beta(1)));
  // Poisson variance at the mean count level.
  rec.covariance = std::max(rec.offset, 1.0) * xtx.inverse();
  const double shot = std::sqrt(std::max(rec.offset, 1.0)) * std::sqrt(2.0 / static_cast<double>(k));
  rec.status = rec.amplitude < 3.0 * shot ? SweepStatus::LowContrast : SweepStatus::Ok;
}

struct SweepOptions {
  int samples = 8;
  bool noiseless = false;
};

/// Focal-field contributions of every zone at the ion's quadrature nodes, for
/// the target and background gratings, given the current correction.
struct SweepContext {
  std::vector<QuadratureNode> nodes;
  std::vector<std::vector<Complex>> target;      // [zone][node]
  std::vector<std::vector<Complex>> background;  // [zone][node]
  std::vector<Complex> background_total;
  std::vector<double> illumination;  // per-zone share of the summed input amplitude
  double base_power = 0.0;

  static SweepContext build(const VirtualLab& lab, const ZonePartition& part, const PhaseMask& correction) {
    SweepContext ctx;
    const auto flat = lab.flatness();
    const CMatrix pt = lab.pupil_for(compose_pattern(flat, lab.target_grating(), correction));
    const CMatrix pb = lab.pupil_for(compose_pattern(flat, lab.background_grating(), correction));
    ctx.nodes = lab.quadrature(lab.ion().y, lab.ion().z);
    std::vector<FocalPoint> pts;
    for (const auto& q : ctx.nodes) pts.push_back(lab.evaluator().point(q.y, q.z));
    const auto nz = static_cast<std::size_t>(part.zone_count());
    ctx.target.assign(nz, std::vector<Complex>(ctx.nodes.size()));
    ctx.background.assign(nz, std::vector<Complex>(ctx.nodes.size()));
    ctx.background_total.assign(ctx.nodes.size(), 0.0);
    ctx.illumination.assign(nz, 0.0);
    const RMatrix amp = pt.cwiseAbs();
    const double total = amp.sum();
    for (std::size_t z = 0; z < nz; ++z) {
      const auto& b = part.zones[z];
      ctx.illumination[z] = total > 0 ? amp.block(b.r0, b.c0, b.h, b.w).sum() / total : 0.0;
      for (std::size_t n = 0; n < pts.size(); ++n) {
        ctx.target[z][n] = lab.evaluator().evaluate_block(pt, pts[n], b.r0, b.c0, b.h, b.w);
        ctx.background[z][n] = lab.evaluator().evaluate_block(pb, pts[n], b.r0, b.c0, b.h, b.w);
        ctx.background_total[n] += ctx.background[z][n];
      }
    }
    ctx.base_power = lab.power();
    return ctx;
  }
};

/// K-point phase sweep of one zone against the reference. The tweezer power is
/// raised by the inverse square of the two zones' share of the input
/// amplitude (known from the illumination profile) so the interference peak
/// sits near the configured operating point.
inline ProbeSweepRecord probe_zone_sweep(const ZonePartition& part, int zone, const VirtualLab& lab,
                                         const SweepContext& ctx, const SweepOptions& opt, Rng& rng) {
  if (opt.samples < 4) throw ConfigError("a probe sweep needs at least 4 phase samples");
  if (zone == part.reference) throw ConfigError("the reference zone cannot be probed");
  if (zone < 0 || zone >= part.zone_count()) throw ConfigError("zone index out of range");
  const auto z = static_cast<std::size_t>(zone);
  const auto ref = static_cast<std::size_t>(part.reference);
  ProbeModel model = lab.model();
  const double share = ctx.illumination[ref] + ctx.illumination[z];
  model.atoms.power = std::min(model.atoms.max_power, share > 0 ? ctx.base_power / (share * share) : model.atoms.max_power);

  ProbeSweepRecord rec;
  rec.zone = zone;
  rec.power = model.atoms.power;
  for (int k = 0; k < opt.samples; ++k) {
    const double phi = kTwoPi * k / opt.samples;
    const Complex rot = std::polar(1.0, phi);
    double mean_abs = 0.0;
    for (std::size_t n = 0; n < ctx.nodes.size(); ++n) {
      const Complex e = ctx.background_total[n] - ctx.background[ref][n] - ctx.background[z][n] + ctx.target[ref][n] +
                        rot * ctx.target[z][n];
      mean_abs += ctx.nodes[n].weight * std::abs(e);
    }
    const double expected = model.expected_counts(mean_abs);
    rec.phases.push_back(phi);
    rec.counts.push_back(opt.noiseless ? expected : static_cast<double>(poisson_draw(expected, rng)));
  }
  fit_cosine(rec);
  return rec;
}

/// Convenience overload that builds the context with no prior correction.
inline ProbeSweepRecord probe_zone_sweep(const ZonePartition& part, int zone, VirtualLab& lab,
                                         const SweepOptions& opt = {}) {
  const auto ctx = SweepContext::build(lab, part, PhaseMask(part.geometry));
  return probe_zone_sweep(part, zone, lab, ctx, opt, lab.rng());
}

/// Intensity-weighted RMS of the wrapped pupil phase error, piston removed.
inline double residual_wavefront_rms(const VirtualLab& lab, const PhaseMask& correction) {
  const CMatrix illum = pupil_field(PhaseMask(lab.geometry()), lab.train());
  const auto& g = lab.geometry();
  // Total error = hidden panel phase + displayed flatness + correction.
  const PhaseMask err = lab.hidden_phase() + lab.flatness() + correction;
  Complex mean(0.0);
  double wsum = 0.0;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      const double w = std::norm(illum(r, c));
      mean += w * std::polar(1.0, err.at(r, c));
      wsum += w;
    }
  if (!(wsum > 0)) return 0.0;
  const double piston = std::arg(mean);
  double acc = 0.0;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      const double d = wrap_symmetric(err.at(r, c) - piston);
      acc += std::norm(illum(r, c)) * d * d;
    }
  return std::sqrt(acc / wsum);
}

/// Peak focal intensity of an SLM pattern relative to the same grating on an
/// aberration-free system.
inline double peak_intensity_ratio(const VirtualLab& lab, const PhaseMask& slm) {
  const auto& train = lab.train();
  const double dxp = train.pupil_pitch(lab.geometry().pitch);
  const auto actual = propagate_pupil(lab.pupil_for(slm), dxp, train);
  const auto ideal = propagate_pupil(pupil_field(lab.target_grating(), train), dxp, train);
  return actual.samples.cwiseAbs2().maxCoeff() / ideal.samples.cwiseAbs2().maxCoeff();
}

struct WaistMapOptions {
  int points = 25;
  double spacing = 0.6e-6;
  BeamMapOptions scan{1, true, 1};
};

/// Beam map around the target, linearised to intensity and fitted.
inline GaussianFit2D measure_waists(VirtualLab& lab, const WaistMapOptions& opt = {}) {
  const auto& cfg = lab.config();
  const auto ys = centered_axis(cfg.target_y, opt.spacing, opt.points);
  const auto zs = centered_axis(cfg.target_z, opt.spacing, opt.points);
  const IonState saved = lab.ion();
  const auto scan = map_beam(lab, ys, zs, opt.scan);
  lab.move_ion(saved.y, saved.z);
  return fit_gaussian_2d(scan.intensity_grid(lab.model()), ys, zs);
}

struct CorrectionOptions {
  int zones = 256;
  SweepOptions sweep;
  int passes = 1;
  int repeats = 20;  // exposures for the before/after fluorescence
  bool fit_waists = false;
  WaistMapOptions waist_map;
  int threads = 1;
};

struct CorrectionResult {
  CorrectionPattern pattern;
  std::vector<ProbeSweepRecord> sweeps;  // last pass, in visit order
  PhaseMask final_mask;
  double counts_before_mean = 0.0;
  double counts_before_std = 0.0;
  double counts_after_mean = 0.0;
  double counts_after_std = 0.0;
  int low_contrast_zones = 0;
  std::optional<GaussianFit2D> waists_before;
  std::optional<GaussianFit2D> waists_after;
};

namespace detail {
inline std::pair<double, double> repeated_counts(VirtualLab& lab, int repeats, bool noiseless) {
  if (noiseless) return {lab.expected_counts(), 0.0};
  double s = 0, ss = 0;
  for (int k = 0; k < repeats; ++k) {
    const double c = lab.measure();
    s += c;
    ss += c * c;
  }
  const double n = repeats;
  const double mean = s / n;
  return {mean, repeats > 1 ? std::sqrt(std::max(0.0, (ss - s * s / n) / (n - 1))) : 0.0};
}
}  // namespace detail

/// Sweeps every non-reference zone against the fixed reference. `previous`
/// folds an earlier correction into the displayed pattern; the result then
/// holds previous + new phases.
inline CorrectionResult run_correction(VirtualLab& lab, const CorrectionOptions& opt,
                                       const CorrectionPattern* previous = nullptr) {
  if (opt.repeats < 1) throw ConfigError("need at least one exposure per fluorescence reading");
  if (opt.passes < 1) throw ConfigError("need at least one correction pass");
  const auto part = partition_zones(lab.geometry(), opt.zones);
  if (previous && !(previous->partition.geometry == part.geometry && previous->partition.zone_count() == part.zone_count()))
    throw GeometryMismatch("previous correction uses a different partition");
  CorrectionResult res;
  res.pattern = previous ? *previous : CorrectionPattern::zero(part);
  const auto flat = lab.flatness();
  const auto target = lab.target_grating();

  lab.display(compose_pattern(flat, target, res.pattern.to_mask()));
  std::tie(res.counts_before_mean, res.counts_before_std) = detail::repeated_counts(lab, opt.repeats, opt.sweep.noiseless);
  if (opt.fit_waists) res.waists_before = measure_waists(lab, opt.waist_map);

  const auto order = part.visit_order();
  for (int pass = 0; pass < opt.passes; ++pass) {
    const auto ctx = SweepContext::build(lab, part, res.pattern.to_mask());
    const std::uint64_t base = lab.next_seed();
    std::vector<ProbeSweepRecord> sweeps(order.size());
    parallel_for(order.size(), opt.threads, [&](std::size_t i) {
      Rng rng(derive_seed(base, static_cast<std::uint64_t>(order[i])));
      sweeps[i] = probe_zone_sweep(part, order[i], lab, ctx, opt.sweep, rng);
    });
    res.low_contrast_zones = 0;
    for (const auto& s : sweeps) {
      if (s.status == SweepStatus::LowContrast) {
        ++res.low_contrast_zones;
        continue;
      }
      auto& ph = res.pattern.phases[static_cast<std::size_t>(s.zone)];
      ph = wrap_phase(ph + s.phi_max);
    }
    res.sweeps = std::move(sweeps);
  }

  res.final_mask = compose_pattern(flat, target, res.pattern.to_mask());
  lab.display(res.final_mask);
  std::tie(res.counts_after_mean, res.counts_after_std) = detail::repeated_counts(lab, opt.repeats, opt.sweep.noiseless);
  if (opt.fit_waists) res.waists_after = measure_waists(lab, opt.waist_map);
  return res;
}

struct LadderPoint {
  int zones = 0;
  std::vector<double> per_seed;  // after-correction mean counts
  double counts_mean = 0.0;
  double counts_std = 0.0;
  double counts_median = 0.0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Fluorescence after correction for each zone count, one lab per seed.
inline std::vector<LadderPoint> fluorescence_ladder(const LabConfig& cfg, const std::vector<int>& zone_counts,
                                                    const std::vector<std::uint64_t>& seeds, CorrectionOptions opt) {
  std::vector<LadderPoint> out;
  for (int n : zone_counts) {
    LadderPoint pt;
    pt.zones = n;
    opt.zones = n;
    for (std::uint64_t s : seeds) {
      VirtualLab lab(cfg, derive_seed(s, static_cast<std::uint64_t>(n)));
      pt.per_seed.push_back(run_correction(lab, opt).counts_after_mean);
    }
    const double k = static_cast<double>(pt.per_seed.size());
    double sum = 0, ss = 0;
    for (double v : pt.per_seed) {
      sum += v;
      ss += v * v;
    }
    pt.counts_mean = sum / k;
    pt.counts_std = k > 1 ? std::sqrt(std::max(0.0, (ss - sum * sum / k) / (k - 1))) : 0.0;
    pt.counts_median = median_of(pt.per_seed);
    out.push_back(pt);
  }
  return out;
}

/// Alternating cells of cell_px x cell_px pixels from A (even parity) and B.
inline PhaseMask checkerboard_split(const PhaseMask& a, const PhaseMask& b, int cell_px) {
  a.require_same(b);
  if (cell_px < 1) throw ConfigError("checkerboard cell must be at least one pixel");
  PhaseMask out = a;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c)
      if (((r / cell_px) + (c / cell_px)) % 2) out.at(r, c) = b.at(r, c);
  return out;
}

/// Pixels that take their phase from grating A.
inline std::vector<bool> checkerboard_cells(const MaskGeometry& g, int cell_px) {
  std::vector<bool> cells(g.size());
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      cells[static_cast<std::size_t>(r) * g.width + c] = ((r / cell_px) + (c / cell_px)) % 2 == 0;
  return cells;
}

/// Focal positions (y, z) of an n-ion chain along z, centred on the lab target.
inline std::vector<Eigen::Vector2d> chain_sites(const LabConfig& cfg, int n) {
  const double l = chain_length_scale(cfg.trap.mass, cfg.trap.omega_z);
  std::vector<Eigen::Vector2d> sites;
  for (double u : coulomb_chain_positions(n)) sites.emplace_back(cfg.target_y, cfg.target_z + l * u);
  return sites;
}

/// Two tweezers from one SLM: the gratings for a and b interleaved on a checkerboard,
/// on top of the flatness map and the given correction.
inline PhaseMask two_tweezer_pattern(const VirtualLab& lab, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                     int cell_px, const PhaseMask& correction) {
  const auto& g = lab.geometry();
  const auto ga = grating_for_displacement(lab.train(), g, a.x(), a.y());
  const auto gb = grating_for_displacement(lab.train(), g, b.x(), b.y());
  return compose_pattern(lab.flatness(), checkerboard_split(ga, gb, cell_px), correction);
}

struct SpotTarget {
  double y = 0.0;
  double z = 0.0;
  double weight = 1.0;
};

struct GsOptions {
  int iterations = 50;
  std::uint64_t seed = 1;
};

struct GsResult {
  PhaseMask mask;
  std::vector<double> spot_intensities;  // |E|^2 at the (snapped) spot samples
  double uniformity_error = 0.0;          // (max - min) / (max + min) of intensity / weight
  int iterations = 0;
  bool initial_guess_only = false;
};

namespace detail {
// Padded-grid transform pair matching propagate_pupil.
class FocalTransform {
 public:
  FocalTransform(const MaskGeometry& g, const OpticalTrain& train)
      : h_(g.height), w_(g.width), n_(train.padding * std::max(g.height, g.width)) {
    off_r_ = (n_ - h_) / 2;
    off_c_ = (n_ - w_) / 2;
    const double dxp = train.pupil_pitch(g.pitch);
    const double lf = train.wavelength * train.focal_length;
    du_ = lf / (n_ * dxp);
    pref_ = dxp * dxp / (Complex(0.0, 1.0) * lf);
    const double pc_r = off_r_ + 0.5 * (h_ - 1);
    const double pc_c = off_c_ + 0.5 * (w_ - 1);
    ph_r_.resize(static_cast<std::size_t>(n_));
    ph_c_.resize(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) {
      const double kk = k - 0.5 * n_;
      ph_r_[static_cast<std::size_t>(k)] = std::polar(1.0, kTwoPi * pc_r * kk / n_);
      ph_c_[static_cast<std::size_t>(k)] = std::polar(1.0, kTwoPi * pc_c * kk / n_);
    }
    buf_ = fftw_alloc_complex(static_cast<std::size_t>(n_) * n_);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_2d(n_, n_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n_, n_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FocalTransform() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  FocalTransform(const FocalTransform&) = delete;
  FocalTransform& operator=(const FocalTransform&) = delete;

  int n() const { return n_; }
  double du() const { return du_; }

  CMatrix forward(const CMatrix& pupil) {
    std::fill(reinterpret_cast<double*>(buf_), reinterpret_cast<double*>(buf_) + 2 * n_ * n_, 0.0);
    for (int r = 0; r < h_; ++r)
      for (int c = 0; c < w_; ++c) {
        const int pr = r + off_r_, pc = c + off_c_;
        const Complex v = (((pr + pc) % 2) ? -1.0 : 1.0) * pupil(r, c);
        buf_[pr * n_ + pc][0] = v.real();
        buf_[pr * n_ + pc][1] = v.imag();
      }
    fftw_execute(fwd_);
    CMatrix out(n_, n_);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c)
        out(r, c) = pref_ * ph_r_[static_cast<std::size_t>(r)] * ph_c_[static_cast<std::size_t>(c)] *
                    Complex(buf_[r * n_ + c][0], buf_[r * n_ + c][1]);
    return out;
  }

  /// Inverse of forward restricted to the SLM window.
  CMatrix backward(const CMatrix& focal) {
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        const Complex v = focal(r, c) / (pref_ * ph_r_[static_cast<std::size_t>(r)] * ph_c_[static_cast<std::size_t>(c)]);
        buf_[r * n_ + c][0] = v.real();
        buf_[r * n_ + c][1] = v.imag();
      }
    fftw_execute(bwd_);
    CMatrix out(h_, w_);
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    for (int r = 0; r < h_; ++r)
      for (int c = 0; c < w_; ++c) {
        const int pr = r + off_r_, pc = c + off_c_;
        out(r, c) = scale * (((pr + pc) % 2) ? -1.0 : 1.0) * Complex(buf_[pr * n_ + pc][0], buf_[pr * n_ + pc][1]);
      }
    return out;
  }

 private:
  int h_, w_, n_;
  int off_r_ = 0, off_c_ = 0;
  double du_ = 0.0;
  Complex pref_;
  std::vector<Complex> ph_r_, ph_c_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};
}  // namespace detail

/// Weighted Gerchberg-Saxton for an array of point-like spots. Spots snap to
/// the nearest focal sample and must lie inside the band the SLM pixels can
/// address.
inline GsResult gerchberg_saxton(const std::vector<SpotTarget>& targets, const MaskGeometry& g,
                                 const OpticalTrain& train, const GsOptions& opt = {}) {
  if (targets.empty()) throw ConfigError("Gerchberg-Saxton needs at least one target");
  if (opt.iterations < 0) throw ConfigError("iteration count must be non-negative");
  train.validate();
  detail::FocalTransform ft(g, train);
  const double band = 0.5 * train.wavelength * train.focal_length / train.pupil_pitch(g.pitch);
  std::vector<std::pair<int, int>> idx;
  for (const auto& t : targets) {
    if (!(t.weight > 0)) throw ConfigError("spot weights must be positive");
    if (std::abs(t.y) >= band || std::abs(t.z) >= band)
      throw TargetOutOfBand("spot lies outside the addressable focal field");
    const int c = static_cast<int>(std::lround(t.y / ft.du() + 0.5 * ft.n()));
    const int r = static_cast<int>(std::lround(t.z / ft.du() + 0.5 * ft.n()));
    if (r < 0 || c < 0 || r >= ft.n() || c >= ft.n()) throw TargetOutOfBand("spot lies outside the focal grid");
    idx.emplace_back(r, c);
  }

  const CMatrix illum = pupil_field(PhaseMask(g), train);
  const RMatrix amp = illum.cwiseAbs();
  Rng rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  PhaseMask phase(g);
  for (auto& p : phase.phases()) p = uni(rng);

  GsResult res;
  res.iterations = opt.iterations;
  res.initial_guess_only = opt.iterations == 0;
  std::vector<double> w(targets.size(), 1.0);
  auto pupil_of = [&](const PhaseMask& ph) {
    CMatrix e(g.height, g.width);
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) e(r, c) = amp(r, c) * std::polar(1.0, ph.at(r, c));
    return e;
  };
  for (int it = 0; it < opt.iterations; ++it) {
    const CMatrix focal = ft.forward(pupil_of(phase));
    double mean = 0.0;
    std::vector<double> a(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      a[k] = std::abs(focal(idx[k].first, idx[k].second)) / std::sqrt(targets[k].weight);
      mean += a[k] / static_cast<double>(targets.size());
    }
    CMatrix constrained = CMatrix::Zero(ft.n(), ft.n());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (a[k] > 0) w[k] *= mean / a[k];
      const Complex e = focal(idx[k].first, idx[k].second);
      const double ph = std::abs(e) > 0 ? std::arg(e) : 0.0;
      constrained(idx[k].first, idx[k].second) += std::polar(w[k] * std::sqrt(targets[k].weight), ph);
    }
    const CMatrix back = ft.backward(constrained);
    for (int r = 0; r < g.height; ++r)
      for (int c = 0; c < g.width; ++c) phase.at(r, c) = wrap_phase(std::arg(back(r, c)));
  }
  res.mask = phase;
  const CMatrix focal = ft.forward(pupil_of(phase));
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double i = std::norm(focal(idx[k].first, idx[k].second));
    res.spot_intensities.push_back(i);
    lo = std::min(lo, i / targets[k].weight);
    hi = std::max(hi, i / targets[k].weight);
  }
  res.uniformity_error = hi + lo > 0 ? (hi - lo) / (hi + lo) : 0.0;
  return res;
}

}  // namespace tweezerlab
