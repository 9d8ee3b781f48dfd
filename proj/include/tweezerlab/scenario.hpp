#pragma once

// Scenario files: JSON, every key optional, unknown keys rejected.
// Frequencies are given in MHz or kHz and mean angular frequencies (x 2 pi);
// lengths, powers and times are SI with the unit in the key name.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "correction.hpp"
#include "io.hpp"
#include "mechanics.hpp"
#include "rabi_fit.hpp"

namespace tweezerlab {

using Json = nlohmann::ordered_json;

struct ScenarioError : ConfigError {
  ScenarioError(const std::string& msg, std::string field_path, int line_no, int column_no)
      : ConfigError(msg), field(std::move(field_path)), line(line_no), column(column_no) {}
  std::string field;
  int line = 0;  // 1-based, 0 when unknown
  int column = 0;
};

struct CorrectionSettings {
  CorrectionOptions options;
  std::vector<int> ladder{1, 16, 64, 256};
  int ladder_seeds = 5;
};

struct MapSettings {
  int points = 25;
  double spacing = 0.6e-6;
  int repeats = 1;
  bool noiseless = false;
};

struct CptSettings {
  int z_points = 41;
  double z_spacing = 0.25e-6;
  std::vector<double> power_fractions;  // of max_power
  std::vector<double> detunings;        // rad/s
  double tweezer_detuning = mhz(40.0);
  double sweep_power_fraction = 0.05;
  bool noiseless = false;
};

struct RabiSettings {
  int z_points = 25;
  double z_spacing = 1e-6;
  std::vector<double> detunings;  // rad/s
  double power_fraction = 0.05;   // of max_power
  bool noiseless = false;
};

struct ForceSettings {
  ForceBalanceConfig config;
  std::vector<double> omegas{khz(38.0), khz(60.0), khz(120.0), khz(150.0)};
  double map_omega = khz(38.0);
  int map_points = 161;
};

struct TwoTweezerSettings {
  int ions = 5;
  int site_a = 1;
  int site_b = 3;
  int cell_px = 4;
  bool correct_first = true;
  double scan_spacing = 0.25e-6;
};

struct ZernikeSettings {
  int max_order = 3;
};

struct Scenario {
  std::string name = "default";
  std::uint64_t seed = 1;
  LabConfig lab = default_lab();
  std::string flatness_file;  // as written in the scenario, relative to it
  CorrectionSettings correction;
  MapSettings map;
  CptSettings cpt = default_cpt();
  RabiSettings rabi = default_rabi();
  ForceSettings forces;
  TwoTweezerSettings two_tweezers;
  ZernikeSettings zernike;

  static LabConfig default_lab() {
    LabConfig cfg;
    cfg.aberration = reference_aberration(1.5);
    return cfg;
  }
  static CptSettings default_cpt() {
    CptSettings c;
    for (double f : {0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}) c.power_fractions.push_back(f);
    for (double d = -100.0; d <= 100.0; d += 10.0) c.detunings.push_back(mhz(d));
    return c;
  }
  static RabiSettings default_rabi() {
    RabiSettings r;
    for (double d : {-2500.0, -1600.0, -800.0, -400.0, -200.0, -100.0, -50.0, -25.0, 0.0, 25.0, 50.0, 100.0, 200.0,
                     400.0, 800.0, 1600.0, 2500.0})
      r.detunings.push_back(mhz(d));
    return r;
  }
};

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t offset) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Position of a key: searches for each path component in turn, so nested keys
// with common names resolve to the right object in the usual layouts.
inline std::pair<int, int> locate(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const auto hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) return {0, 0};
    pos = hit;
  }
  return line_column(text, pos);
}

class Reader {
 public:
  Reader(const Json& j, const std::string& text, std::vector<std::string> path = {})
      : j_(j), text_(text), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = {}) const {
    auto p = path_;
    if (!key.empty()) p.push_back(key);
    std::string field;
    for (const auto& k : p) field += (field.empty() ? "" : ".") + k;
    const auto [line, col] = locate(text_, p);
    std::string where = field.empty() ? "<root>" : field;
    if (line > 0) where += " (line " + std::to_string(line) + ", column " + std::to_string(col) + ")";
    throw ScenarioError(where + ": " + msg, field, line, col);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail("has the wrong type", key);
    }
  }

  void get_scaled(const std::string& key, double& out, double scale) {
    if (!has(key)) return;
    double v = 0.0;
    get(key, v);
    out = v * scale;
  }

  void get_list_scaled(const std::string& key, std::vector<double>& out, double scale) {
    if (!has(key)) return;
    std::vector<double> v;
    get(key, v);
    out.clear();
    for (double x : v) out.push_back(x * scale);
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    if (!j_.at(key).is_object()) fail("expected an object", key);
    auto p = path_;
    p.push_back(key);
    return Reader(j_.at(key), text_, p);
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail("unknown key", k);
  }

 private:
  const Json& j_;
  const std::string& text_;
  std::vector<std::string> path_;
  std::set<std::string> seen_;
};

inline constexpr double kMhz = kTwoPi * 1e6;
inline constexpr double kKhz = kTwoPi * 1e3;

inline void read_lab(Reader r, LabConfig& lab, std::string& flatness_file, const std::filesystem::path& base_dir) {
  if (r.has("slm")) {
    auto s = r.child("slm");
    s.get("width", lab.geometry.width);
    s.get("height", lab.geometry.height);
    s.get("pitch_m", lab.geometry.pitch);
    s.finish();
  }
  if (r.has("optics")) {
    auto s = r.child("optics");
    auto& t = lab.train;
    s.get("wavelength_m", t.wavelength);
    s.get("focal_length_m", t.focal_length);
    s.get("aperture_radius_m", t.aperture_radius);
    s.get("input_waist_m", t.input_beam_waist);
    s.get("numerical_aperture", t.numerical_aperture);
    s.get("magnification", t.magnification);
    s.get("padding", t.padding);
    s.finish();
  }
  if (r.has("trap")) {
    auto s = r.child("trap");
    auto& t = lab.trap;
    s.get_scaled("omega_x_khz", t.omega_x, kKhz);
    s.get_scaled("omega_y_khz", t.omega_y, kKhz);
    s.get_scaled("omega_z_khz", t.omega_z, kKhz);
    s.get_scaled("mass_u", t.mass, constants::atomic_mass_unit);
    s.get_scaled("rf_mhz", t.rf_frequency, kMhz);
    s.finish();
  }
  if (r.has("ion")) {
    auto s = r.child("ion");
    s.get("temperature_k", lab.ion.temperature);
    s.get("micromotion_m", lab.ion.micromotion);
    s.finish();
  }
  if (r.has("camera")) {
    auto s = r.child("camera");
    auto& c = lab.camera;
    s.get("magnification", c.magnification);
    s.get("psf_sigma_m", c.psf_sigma);
    s.get("pixel_size_m", c.pixel_size);
    s.get("exposure_s", c.exposure);
    s.get("dark_rate_hz", c.dark_rate);
    s.get("collection_efficiency", c.collection_efficiency);
    s.finish();
  }
  if (r.has("atoms")) {
    auto s = r.child("atoms");
    auto& a = lab.atoms;
    if (s.has("model")) {
      std::string m;
      s.get("model", m);
      if (m == "four-level") a.model = AtomModel::FourLevel;
      else if (m == "ten-level") a.model = AtomModel::TenLevel;
      else s.fail("must be \"four-level\" or \"ten-level\"", "model");
    }
    s.get("reference_power_w", a.reference_power);
    s.get_scaled("reference_rabi_mhz", a.reference_rabi, kMhz);
    s.get("power_w", a.power);
    s.get("max_power_w", a.max_power);
    s.get_scaled("doppler_rabi_mhz", a.params.doppler.rabi, kMhz);
    s.get_scaled("doppler_detuning_mhz", a.params.doppler.detuning, kMhz);
    s.get_scaled("tweezer_detuning_mhz", a.params.tweezer.detuning, kMhz);
    s.get("field_t", a.params.zeeman.field_magnitude);
    s.finish();
  }
  if (r.has("aberration")) {
    auto s = r.child("aberration");
    if (s.has("zernike_rad")) {
      const auto& z = s.raw("zernike_rad");
      if (!z.is_object()) s.fail("expected an object of Noll index -> rad", "zernike_rad");
      std::vector<std::pair<int, double>> values;
      for (const auto& [k, v] : z.items()) {
        int j = 0;
        const auto res = std::from_chars(k.data(), k.data() + k.size(), j);
        if (res.ec != std::errc() || res.ptr != k.data() + k.size() || j < 1 || !v.is_number())
          s.fail("entries must map a Noll index >= 1 to a number", "zernike_rad");
        values.emplace_back(j, v.get<double>());
      }
      lab.aberration = ZernikeCoefficients::from_values(values);
    }
    if (s.has("rms_rad")) {
      double rms = 0.0;
      s.get("rms_rad", rms);
      if (rms < 0.0) s.fail("must be non-negative", "rms_rad");
      if (rms == 0.0) lab.aberration = {};
      else lab.aberration = scaled_to_rms(lab.aberration.terms.empty() ? reference_aberration(1.0) : lab.aberration, rms);
    }
    s.finish();
  }
  if (r.has("flatness_twzm")) {
    r.get("flatness_twzm", flatness_file);
    lab.flatness = read_twzm((base_dir / flatness_file).string());
  }
  r.get("target_y_m", lab.target_y);
  r.get("target_z_m", lab.target_z);
  r.get("auto_power", lab.auto_power);
  r.get("auto_fraction", lab.auto_fraction);
  r.finish();
}

inline void read_forces(Reader r, ForceSettings& f) {
  auto& c = f.config;
  r.get_list_scaled("omegas_khz", f.omegas, kKhz);
  r.get_scaled("map_omega_khz", f.map_omega, kKhz);
  r.get("map_points", f.map_points);
  r.get_scaled("mass_u", c.mass, constants::atomic_mass_unit);
  r.get_scaled("tweezer_rabi_mhz", c.tweezer.rabi, kMhz);
  r.get("tweezer_waist_m", c.tweezer.waist);
  r.get_scaled("tweezer_detuning_mhz", c.tweezer.detuning, kMhz);
  r.get_scaled("doppler_rabi_mhz", c.doppler.rabi, kMhz);
  r.get_scaled("doppler_detuning_mhz", c.doppler.detuning, kMhz);
  r.get("doppler_wavelength_m", c.doppler.wavelength);
  r.get("doppler_direction", c.doppler.direction);
  r.get("tweezer_force", c.tweezer_force_enabled);
  r.get("doppler_force", c.doppler_force_enabled);
  r.finish();
}

}  // namespace detail

/// Parses scenario text. base_dir resolves relative file references.
inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ScenarioError("JSON syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                            e.what(),
                        "", line, col);
  }
  Scenario sc;
  detail::Reader r(j, text);
  r.get("name", sc.name);
  r.get("seed", sc.seed);
  if (r.has("lab")) detail::read_lab(r.child("lab"), sc.lab, sc.flatness_file, base_dir);
  if (r.has("correction")) {
    auto s = r.child("correction");
    auto& o = sc.correction.options;
    s.get("zones", o.zones);
    s.get("samples", o.sweep.samples);
    s.get("noiseless", o.sweep.noiseless);
    s.get("passes", o.passes);
    s.get("repeats", o.repeats);
    s.get("fit_waists", o.fit_waists);
    s.get("ladder", sc.correction.ladder);
    s.get("ladder_seeds", sc.correction.ladder_seeds);
    s.finish();
  }
  if (r.has("map")) {
    auto s = r.child("map");
    s.get("points", sc.map.points);
    s.get("spacing_m", sc.map.spacing);
    s.get("repeats", sc.map.repeats);
    s.get("noiseless", sc.map.noiseless);
    s.finish();
  }
  if (r.has("cpt")) {
    auto s = r.child("cpt");
    s.get("z_points", sc.cpt.z_points);
    s.get("z_spacing_m", sc.cpt.z_spacing);
    s.get("power_fractions", sc.cpt.power_fractions);
    s.get_list_scaled("detunings_mhz", sc.cpt.detunings, detail::kMhz);
    s.get_scaled("tweezer_detuning_mhz", sc.cpt.tweezer_detuning, detail::kMhz);
    s.get("sweep_power_fraction", sc.cpt.sweep_power_fraction);
    s.get("noiseless", sc.cpt.noiseless);
    s.finish();
  }
  if (r.has("rabi")) {
    auto s = r.child("rabi");
    s.get("z_points", sc.rabi.z_points);
    s.get("z_spacing_m", sc.rabi.z_spacing);
    s.get_list_scaled("detunings_mhz", sc.rabi.detunings, detail::kMhz);
    s.get("power_fraction", sc.rabi.power_fraction);
    s.get("noiseless", sc.rabi.noiseless);
    s.finish();
  }
  if (r.has("forces")) detail::read_forces(r.child("forces"), sc.forces);
  if (r.has("two_tweezers")) {
    auto s = r.child("two_tweezers");
    s.get("ions", sc.two_tweezers.ions);
    s.get("site_a", sc.two_tweezers.site_a);
    s.get("site_b", sc.two_tweezers.site_b);
    s.get("cell_px", sc.two_tweezers.cell_px);
    s.get("correct_first", sc.two_tweezers.correct_first);
    s.get("scan_spacing_m", sc.two_tweezers.scan_spacing);
    s.finish();
  }
  if (r.has("zernike")) {
    auto s = r.child("zernike");
    s.get("max_order", sc.zernike.max_order);
    s.finish();
  }
  r.finish();

  sc.lab.validate();
  sc.forces.config.validate();
  const auto& tt = sc.two_tweezers;
  if (tt.ions < 2 || tt.site_a < 0 || tt.site_b < 0 || tt.site_a >= tt.ions || tt.site_b >= tt.ions || tt.site_a == tt.site_b)
    throw ScenarioError("two_tweezers: sites must be two distinct ions of the chain", "two_tweezers", 0, 0);
  if (sc.correction.ladder.empty() || sc.correction.ladder_seeds < 1)
    throw ScenarioError("correction: ladder needs zone counts and at least one seed", "correction", 0, 0);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path());
}

/// Fully resolved scenario, defaults included, in the file schema.
inline Json scenario_to_json(const Scenario& sc) {
  using detail::kKhz;
  using detail::kMhz;
  const auto& l = sc.lab;
  Json aberr = Json::object();
  for (const auto& t : l.aberration.terms) aberr[std::to_string(t.j)] = t.coeff;
  if (l.aberration.piston != 0.0) aberr["1"] = l.aberration.piston;
  auto scaled = [](const std::vector<double>& v, double s) {
    std::vector<double> out;
    for (double x : v) out.push_back(x / s);
    return out;
  };
  Json lab = {
      {"slm", {{"width", l.geometry.width}, {"height", l.geometry.height}, {"pitch_m", l.geometry.pitch}}},
      {"optics",
       {{"wavelength_m", l.train.wavelength},
        {"focal_length_m", l.train.focal_length},
        {"aperture_radius_m", l.train.aperture_radius},
        {"input_waist_m", l.train.input_beam_waist},
        {"numerical_aperture", l.train.numerical_aperture},
        {"magnification", l.train.magnification},
        {"padding", l.train.padding}}},
      {"trap",
       {{"omega_x_khz", l.trap.omega_x / kKhz},
        {"omega_y_khz", l.trap.omega_y / kKhz},
        {"omega_z_khz", l.trap.omega_z / kKhz},
        {"mass_u", l.trap.mass / constants::atomic_mass_unit},
        {"rf_mhz", l.trap.rf_frequency / kMhz}}},
      {"ion", {{"temperature_k", l.ion.temperature}, {"micromotion_m", l.ion.micromotion}}},
      {"camera",
       {{"magnification", l.camera.magnification},
        {"psf_sigma_m", l.camera.psf_sigma},
        {"pixel_size_m", l.camera.pixel_size},
        {"exposure_s", l.camera.exposure},
        {"dark_rate_hz", l.camera.dark_rate},
        {"collection_efficiency", l.camera.collection_efficiency}}},
      {"atoms",
       {{"model", l.atoms.model == AtomModel::FourLevel ? "four-level" : "ten-level"},
        {"reference_power_w", l.atoms.reference_power},
        {"reference_rabi_mhz", l.atoms.reference_rabi / kMhz},
        {"power_w", l.atoms.power},
        {"max_power_w", l.atoms.max_power},
        {"doppler_rabi_mhz", l.atoms.params.doppler.rabi / kMhz},
        {"doppler_detuning_mhz", l.atoms.params.doppler.detuning / kMhz},
        {"tweezer_detuning_mhz", l.atoms.params.tweezer.detuning / kMhz},
        {"field_t", l.atoms.params.zeeman.field_magnitude}}},
      {"aberration", {{"zernike_rad", aberr}}},
      {"target_y_m", l.target_y},
      {"target_z_m", l.target_z},
      {"auto_power", l.auto_power},
      {"auto_fraction", l.auto_fraction}};
  if (l.flatness) lab["flatness_twzm"] = sc.flatness_file;
  const auto& co = sc.correction.options;
  const auto& f = sc.forces.config;
  return Json{
      {"name", sc.name},
      {"seed", sc.seed},
      {"lab", lab},
      {"correction",
       {{"zones", co.zones},
        {"samples", co.sweep.samples},
        {"noiseless", co.sweep.noiseless},
        {"passes", co.passes},
        {"repeats", co.repeats},
        {"fit_waists", co.fit_waists},
        {"ladder", sc.correction.ladder},
        {"ladder_seeds", sc.correction.ladder_seeds}}},
      {"map",
       {{"points", sc.map.points},
        {"spacing_m", sc.map.spacing},
        {"repeats", sc.map.repeats},
        {"noiseless", sc.map.noiseless}}},
      {"cpt",
       {{"z_points", sc.cpt.z_points},
        {"z_spacing_m", sc.cpt.z_spacing},
        {"power_fractions", sc.cpt.power_fractions},
        {"detunings_mhz", scaled(sc.cpt.detunings, kMhz)},
        {"tweezer_detuning_mhz", sc.cpt.tweezer_detuning / kMhz},
        {"sweep_power_fraction", sc.cpt.sweep_power_fraction},
        {"noiseless", sc.cpt.noiseless}}},
      {"rabi",
       {{"z_points", sc.rabi.z_points},
        {"z_spacing_m", sc.rabi.z_spacing},
        {"detunings_mhz", scaled(sc.rabi.detunings, kMhz)},
        {"power_fraction", sc.rabi.power_fraction},
        {"noiseless", sc.rabi.noiseless}}},
      {"forces",
       {{"omegas_khz", scaled(sc.forces.omegas, kKhz)},
        {"map_omega_khz", sc.forces.map_omega / kKhz},
        {"map_points", sc.forces.map_points},
        {"mass_u", f.mass / constants::atomic_mass_unit},
        {"tweezer_rabi_mhz", f.tweezer.rabi / kMhz},
        {"tweezer_waist_m", f.tweezer.waist},
        {"tweezer_detuning_mhz", f.tweezer.detuning / kMhz},
        {"doppler_rabi_mhz", f.doppler.rabi / kMhz},
        {"doppler_detuning_mhz", f.doppler.detuning / kMhz},
        {"doppler_wavelength_m", f.doppler.wavelength},
        {"doppler_direction", f.doppler.direction},
        {"tweezer_force", f.tweezer_force_enabled},
        {"doppler_force", f.doppler_force_enabled}}},
      {"two_tweezers",
       {{"ions", sc.two_tweezers.ions},
        {"site_a", sc.two_tweezers.site_a},
        {"site_b", sc.two_tweezers.site_b},
        {"cell_px", sc.two_tweezers.cell_px},
        {"correct_first", sc.two_tweezers.correct_first},
        {"scan_spacing_m", sc.two_tweezers.scan_spacing}}},
      {"zernike", {{"max_order", sc.zernike.max_order}}}};
}

/// 16 hex digits of FNV-1a over the resolved scenario JSON and the flatness map bytes.
inline std::string scenario_hash(const Scenario& sc) {
  auto h = fnv1a64(scenario_to_json(sc).dump());
  if (sc.lab.flatness) h = fnv1a64(encode_twzm(*sc.lab.flatness), h);
  return hex64(h);
}

}  // namespace tweezerlab
