#include "pcqa/projection.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <thread>

#include "pcqa/error.hpp"

namespace pcqa {

void ProjectionConfig::validate() const {
  if (!(rs_deg > 0.0) || rs_deg > 360.0) fail(Errc::InvalidConfig, "rs_deg must be in (0, 360]");
  if (output_size == 0) fail(Errc::InvalidConfig, "output_size must be positive");
  if (raster_size < output_size) fail(Errc::InvalidConfig, "raster_size must be >= output_size");
  if (point_radius < 0) fail(Errc::InvalidConfig, "point_radius must be >= 0");
  if (!(white_threshold > 0.0f) || white_threshold > 1.0f) {
    fail(Errc::InvalidConfig, "white_threshold must be in (0, 1]");
  }
}

std::size_t view_count(double rs_deg) {
  if (!(rs_deg > 0.0) || rs_deg > 360.0) fail(Errc::InvalidConfig, "rs_deg must be in (0, 360]");
  // Small tolerance so that e.g. 360/36 is not floored to 9 by rounding.
  return static_cast<std::size_t>(std::floor(360.0 / rs_deg + 1e-9));
}

PointCloud rotate(const PointCloud& pc, Axis axis, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  PointCloud out;
  out.colors = pc.colors;
  out.points.resize(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double x = pc.points[i][0];
    const double y = pc.points[i][1];
    const double z = pc.points[i][2];
    if (axis == Axis::Y) {
      out.points[i] = {static_cast<float>(c * x + s * z), static_cast<float>(y),
                       static_cast<float>(-s * x + c * z)};
    } else {
      out.points[i] = {static_cast<float>(x), static_cast<float>(c * y - s * z),
                       static_cast<float>(s * y + c * z)};
    }
  }
  return out;
}

Image render_ortho(const PointCloud& pc, const ProjectionConfig& cfg) {
  const std::size_t size = cfg.raster_size;
  Image img(size, size, 1.0f);
  std::vector<float> depth(size * size, -std::numeric_limits<float>::infinity());
  const double margin = 0.05 * static_cast<double>(size);
  const double span = static_cast<double>(size) - 2.0 * margin;
  const int r = cfg.point_radius;
  const int r2 = r * r;
  const auto limit = static_cast<long>(size);

  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.points[i];
    const double px = margin + (p[0] + 1.0) * 0.5 * span - 0.5;
    const double py = margin + (1.0 - p[1]) * 0.5 * span - 0.5;
    const long cx = std::lround(px);
    const long cy = std::lround(py);
    const float z = p[2];
    const float rgb[3] = {pc.colors[i][0] / 255.0f, pc.colors[i][1] / 255.0f,
                          pc.colors[i][2] / 255.0f};
    for (int dy = -r; dy <= r; ++dy) {
      const long y = cy + dy;
      if (y < 0 || y >= limit) continue;
      for (int dx = -r; dx <= r; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const long x = cx + dx;
        if (x < 0 || x >= limit) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * size + static_cast<std::size_t>(x);
        if (z >= depth[idx]) {
          depth[idx] = z;
          float* px_out = &img.pixels[idx * 3];
          px_out[0] = rgb[0];
          px_out[1] = rgb[1];
          px_out[2] = rgb[2];
        }
      }
    }
  }
  return img;
}

Image crop_content(const Image& img, float white_threshold) {
  std::size_t x0 = img.width, y0 = img.height, x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const float m = std::min({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
      if (m < white_threshold) {
        any = true;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (!any) return img;
  Image out(x1 - x0 + 1, y1 - y0 + 1);
  for (std::size_t y = 0; y < out.height; ++y) {
    const float* src = &img.pixels[((y + y0) * img.width + x0) * 3];
    std::copy(src, src + out.width * 3, &out.pixels[y * out.width * 3]);
  }
  return out;
}

Image resize_bilinear(const Image& img, std::size_t width, std::size_t height) {
  if (img.width == 0 || img.height == 0) fail(Errc::InvalidArgument, "cannot resize an empty image");
  if (width == 0 || height == 0) fail(Errc::InvalidArgument, "target size must be positive");
  if (width == img.width && height == img.height) return img;

  struct Tap {
    std::size_t lo, hi;
    float w;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> t(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const auto lo = static_cast<std::size_t>(std::floor(s));
      const std::size_t hi = std::min(lo + 1, src - 1);
      t[i] = {lo, hi, static_cast<float>(s - static_cast<double>(lo))};
    }
    return t;
  };
  const auto tx = taps(img.width, width);
  const auto ty = taps(img.height, height);

  Image out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto& vy = ty[y];
    for (std::size_t x = 0; x < width; ++x) {
      const auto& vx = tx[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const float top = img.at(vx.lo, vy.lo, c) * (1.0f - vx.w) + img.at(vx.hi, vy.lo, c) * vx.w;
        const float bot = img.at(vx.lo, vy.hi, c) * (1.0f - vx.w) + img.at(vx.hi, vy.hi, c) * vx.w;
        out.at(x, y, c) = top * (1.0f - vy.w) + bot * vy.w;
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width, img.height);
  const std::size_t row = img.width * 3;
  for (std::size_t y = 0; y < img.height; ++y) {
    std::copy_n(&img.pixels[y * row], row, &out.pixels[(img.height - 1 - y) * row]);
  }
  return out;
}

Image quantize_u8(const Image& img) {
  Image out = img;
  for (auto& v : out.pixels) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

ViewGroups project_views(const PointCloud& pc, const ProjectionConfig& cfg, unsigned threads) {
  cfg.validate();
  pc.validate();
  const PointCloud unit = normalize_unit_ball(pc);
  const std::size_t n = view_count(cfg.rs_deg);

  ViewGroups groups;
  groups.horizontal.direction = ViewDirection::Horizontal;
  groups.vertical.direction = ViewDirection::Vertical;
  groups.horizontal.rs_deg = groups.vertical.rs_deg = cfg.rs_deg;
  groups.horizontal.images.resize(n);
  groups.vertical.images.resize(n);

  auto render_view = [&](std::size_t job) {
    const bool vertical = job >= n;
    const std::size_t i = vertical ? job - n : job;
    const PointCloud rotated = rotate(unit, vertical ? Axis::X : Axis::Y, static_cast<double>(i) * cfg.rs_deg);
    Image img = resize_bilinear(crop_content(render_ortho(rotated, cfg), cfg.white_threshold),
                                cfg.output_size, cfg.output_size);
    (vertical ? groups.vertical : groups.horizontal).images[i] = std::move(img);
  };

  const std::size_t jobs = 2 * n;
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs; ++j) render_view(j);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < jobs; j += workers) render_view(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  return groups;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(Errc::IoError, "libpng initialisation failed");
  }
  std::vector<png_byte> row(img.width * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(Errc::IoError, "PNG encoding failed for '" + path.string() + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t i = 0; i < img.width * 3; ++i) {
      row[i] = static_cast<png_byte>(std::lround(std::clamp(img.pixels[y * img.width * 3 + i], 0.0f, 1.0f) * 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace pcqa
