#pragma once

// Pixelated SLM phase patterns, pattern composition and the TWZM file format.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "core.hpp"

namespace tweezerlab {

struct MaskGeometry {
  int width = 128;
  int height = 128;
  double pitch = 125e-6;  // m per pixel

  bool operator==(const MaskGeometry& o) const {
    return width == o.width && height == o.height && pitch == o.pitch;
  }

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  /// Centre of column c relative to the mask centre.
  double x(int col) const { return (col - 0.5 * (width - 1)) * pitch; }
  /// Centre of row r relative to the mask centre.
  double y(int row) const { return (row - 0.5 * (height - 1)) * pitch; }
  double inscribed_radius() const { return 0.5 * std::min(width, height) * pitch; }

  void validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("mask dimensions must be positive");
    if (!(pitch > 0.0)) throw ConfigError("mask pitch must be positive");
  }

  /// Full 1280x1024 panel at 12.5 um.
  static MaskGeometry panel() { return {1280, 1024, 12.5e-6}; }
};

/// Row-major phase grid in radians. Values are kept as given; canonical()
/// maps them into [0, 2*pi).
class PhaseMask {
 public:
  PhaseMask() = default;
  explicit PhaseMask(const MaskGeometry& g, double value = 0.0) : geom_(g), phases_(g.size(), value) {
    g.validate();
  }
  PhaseMask(const MaskGeometry& g, std::vector<double> phases) : geom_(g), phases_(std::move(phases)) {
    g.validate();
    if (phases_.size() != g.size()) throw GeometryMismatch("phase count does not match width*height");
  }

  const MaskGeometry& geometry() const { return geom_; }
  int width() const { return geom_.width; }
  int height() const { return geom_.height; }
  double pitch() const { return geom_.pitch; }

  double& at(int row, int col) { return phases_[static_cast<std::size_t>(row) * geom_.width + col]; }
  double at(int row, int col) const { return phases_[static_cast<std::size_t>(row) * geom_.width + col]; }
  const std::vector<double>& phases() const { return phases_; }
  std::vector<double>& phases() { return phases_; }

  PhaseMask canonical() const {
    PhaseMask out = *this;
    for (auto& p : out.phases_) p = wrap_phase(p);
    return out;
  }

  PhaseMask& operator+=(const PhaseMask& o) {
    require_same(o);
    for (std::size_t k = 0; k < phases_.size(); ++k) phases_[k] += o.phases_[k];
    return *this;
  }
  PhaseMask& operator-=(const PhaseMask& o) {
    require_same(o);
    for (std::size_t k = 0; k < phases_.size(); ++k) phases_[k] -= o.phases_[k];
    return *this;
  }
  friend PhaseMask operator+(PhaseMask a, const PhaseMask& b) { return a += b; }
  friend PhaseMask operator-(PhaseMask a, const PhaseMask& b) { return a -= b; }

  void require_same(const PhaseMask& o) const {
    if (!(geom_ == o.geom_)) throw GeometryMismatch("phase masks have different geometries");
  }

 private:
  MaskGeometry geom_;
  std::vector<double> phases_;
};

/// Linear phase ramp (2 pi / period)(r . direction) mod 2 pi. direction is
/// (column axis, row axis); an infinite period gives a flat mask.
inline PhaseMask blazed_grating(double period, const Eigen::Vector2d& direction, const MaskGeometry& g) {
  g.validate();
  PhaseMask mask(g);
  if (std::isinf(period)) return mask;
  if (!(period >= 2.0 * g.pitch)) throw AliasError("grating period is below two pixels");
  const double n = direction.norm();
  if (n == 0.0) throw ConfigError("grating direction has zero length");
  const Eigen::Vector2d d = direction / n;
  const double k = kTwoPi / period;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) mask.at(r, c) = wrap_phase(k * (g.x(c) * d.x() + g.y(r) * d.y()));
  return mask;
}

/// Pixelwise sum of the three layers, wrapped into [0, 2*pi).
inline PhaseMask compose_pattern(const PhaseMask& flatness, const PhaseMask& grating, const PhaseMask& correction) {
  flatness.require_same(grating);
  flatness.require_same(correction);
  PhaseMask out = flatness;
  out += grating;
  out += correction;
  return out.canonical();
}

// TWZM: "TWZM", u32 width, u32 height, f64 pitch, width*height f32 phases, all little-endian.
namespace detail {
template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ConfigError("TWZM data is truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}
}  // namespace detail

inline std::string encode_twzm(const PhaseMask& mask) {
  std::string buf = "TWZM";
  buf.reserve(20 + 4 * mask.geometry().size());
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(mask.width()));
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(mask.height()));
  detail::put_le<double>(buf, mask.pitch());
  for (double p : mask.phases()) detail::put_le<float>(buf, static_cast<float>(p));
  return buf;
}

inline PhaseMask decode_twzm(const std::string& buf) {
  if (buf.size() < 4 || buf.compare(0, 4, "TWZM") != 0) throw ConfigError("not a TWZM file");
  std::size_t pos = 4;
  MaskGeometry g;
  g.width = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
  g.height = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
  g.pitch = detail::get_le<double>(buf, pos);
  std::vector<double> phases(g.size());
  for (auto& p : phases) p = detail::get_le<float>(buf, pos);
  if (pos != buf.size()) throw ConfigError("TWZM file has trailing bytes");
  return PhaseMask(g, std::move(phases));
}

inline void write_twzm(const std::string& path, const PhaseMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path);
  const auto buf = encode_twzm(mask);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline PhaseMask read_twzm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_twzm(buf);
}

}  // namespace tweezerlab
