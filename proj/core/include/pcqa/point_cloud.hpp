#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pcqa {

using Vec3f = std::array<float, 3>;
using Rgb8 = std::array<std::uint8_t, 3>;

/// Colored point set: one RGB triple per position.
struct PointCloud {
  std::vector<Vec3f> points;
  std::vector<Rgb8> colors;

  std::size_t size() const noexcept { return points.size(); }
  bool operator==(const PointCloud&) const = default;

  /// Throws EmptyCloud / InvalidArgument on a violated invariant.
  void validate() const;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

PointCloud load_ply(const std::filesystem::path& path);
void save_ply(const PointCloud& pc, const std::filesystem::path& path,
              PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Centroid to the origin, largest absolute coordinate to 1.
PointCloud normalize_unit(const PointCloud& pc);

/// Centroid to the origin, largest distance from the origin to 1. Any rotation
/// of the result stays inside the [-1, 1] cube.
PointCloud normalize_unit_ball(const PointCloud& pc);

enum class DistortionKind { Downsample, GeometryGaussianNoise, ColorGaussianNoise };

struct DistortionSpec {
  DistortionKind kind = DistortionKind::GeometryGaussianNoise;
  double level = 0.0;
  std::uint64_t seed = 0;

  /// Parses the CLI form `kind:level:seed`, e.g. `geometry:0.01:7`.
  static DistortionSpec parse(std::string_view text);
};

std::string_view distortion_name(DistortionKind kind) noexcept;

/// Deterministic given spec.seed. Noise of level 0 is the identity.
PointCloud distort(const PointCloud& pc, const DistortionSpec& spec);

enum class ShapeKind { Sphere, Cube, Torus };

ShapeKind parse_shape_kind(std::string_view text);
std::string_view shape_name(ShapeKind kind) noexcept;

/// n surface samples of a unit-scale shape, colored by a periodic colormap
/// over the y coordinate.
PointCloud synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed);

/// Colormap used by synth_shape; t is wrapped into [0, 1).
Rgb8 stripe_colormap(double t);

/// Stable 64-bit FNV-1a hash of positions and colors.
std::uint64_t content_hash(const PointCloud& pc);

}  // namespace pcqa
