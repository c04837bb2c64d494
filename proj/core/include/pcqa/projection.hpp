#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "pcqa/point_cloud.hpp"

namespace pcqa {

/// Row-major interleaved RGB, channels in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, float fill = 1.0f)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool operator==(const Image&) const = default;
};

enum class ViewDirection { Horizontal, Vertical };

/// Views of one rotation direction, image i rendered at angle i * rs_deg.
struct ProjectionGroup {
  std::vector<Image> images;
  ViewDirection direction = ViewDirection::Horizontal;
  double rs_deg = 36.0;
};

struct ProjectionConfig {
  double rs_deg = 36.0;
  std::size_t raster_size = 512;
  int point_radius = 1;
  float white_threshold = 0.999f;
  std::size_t output_size = 224;

  /// Throws InvalidConfig on out-of-range fields.
  void validate() const;
};

/// floor(360 / rs_deg), the number of views per direction.
std::size_t view_count(double rs_deg);

enum class Axis { X, Y };

PointCloud rotate(const PointCloud& pc, Axis axis, double angle_deg);

/// Orthographic view along +Z: [-1, 1]^2 maps onto the canvas with a 5% margin,
/// each point splats a disc, and the largest z wins (later points win ties).
Image render_ortho(const PointCloud& pc, const ProjectionConfig& cfg);

/// Tight box around pixels whose smallest channel is below white_threshold.
/// An all-white image is returned unchanged.
Image crop_content(const Image& img, float white_threshold);

/// Half-pixel-centred bilinear resampling with edge clamping.
Image resize_bilinear(const Image& img, std::size_t width, std::size_t height);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

/// Quantize every channel to the nearest multiple of 1/255.
Image quantize_u8(const Image& img);

struct ViewGroups {
  ProjectionGroup horizontal;
  ProjectionGroup vertical;
};

/// Horizontal views rotate about Y, vertical views about X, both starting at
/// angle 0. The cloud is first centred and scaled into the unit ball so that
/// every rotation stays on the canvas. Views are rendered on up to `threads`
/// workers; output order is by view index regardless.
ViewGroups project_views(const PointCloud& pc, const ProjectionConfig& cfg, unsigned threads = 1);

void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace pcqa
