#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "pcqa/error.hpp"
#include "pcqa/point_cloud.hpp"
#include "pcqa/projection.hpp"

using namespace pcqa;

namespace {

PointCloud one_point(Vec3f p, Rgb8 c) {
  PointCloud pc;
  pc.points = {p};
  pc.colors = {c};
  return pc;
}

double image_mae(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(a.pixels[i] - b.pixels[i]);
  return s / static_cast<double>(a.pixels.size());
}

bool is_white(const Image& img, std::size_t x, std::size_t y) {
  return img.at(x, y, 0) == 1.0f && img.at(x, y, 1) == 1.0f && img.at(x, y, 2) == 1.0f;
}

}  // namespace

TEST(ViewCount, FloorsNonDivisibleStrides) {
  EXPECT_EQ(view_count(36), 10u);
  EXPECT_EQ(view_count(48), 7u);
  EXPECT_EQ(view_count(60), 6u);
  EXPECT_EQ(view_count(24), 15u);
  EXPECT_EQ(view_count(360), 1u);
  EXPECT_THROW(view_count(0), Error);
  EXPECT_THROW(view_count(400), Error);
}

TEST(Rotate, IdentityAnglesAndHandComputedY) {
  const PointCloud pc = synth_shape(ShapeKind::Cube, 50, 1);
  EXPECT_EQ(rotate(pc, Axis::Y, 0.0), pc);
  const PointCloud full = rotate(pc, Axis::X, 360.0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(full.points[i][k], pc.points[i][k], 1e-6);
  }
  const PointCloud r = rotate(one_point({1, 0, 0}, {0, 0, 0}), Axis::Y, 90.0);
  EXPECT_NEAR(r.points[0][0], 0.0, 1e-7);
  EXPECT_NEAR(r.points[0][1], 0.0, 1e-7);
  EXPECT_NEAR(r.points[0][2], -1.0, 1e-7);
  // X rotation of (0,1,0) by 90 -> (0,0,1)
  const PointCloud rx = rotate(one_point({0, 1, 0}, {0, 0, 0}), Axis::X, 90.0);
  EXPECT_NEAR(rx.points[0][2], 1.0, 1e-7);
  EXPECT_NEAR(rx.points[0][1], 0.0, 1e-7);
}

TEST(Rotate, ComposesAdditively) {
  const PointCloud pc = synth_shape(ShapeKind::Torus, 100, 4);
  const PointCloud a = rotate(rotate(pc, Axis::Y, 30.0), Axis::Y, 50.0);
  const PointCloud b = rotate(pc, Axis::Y, 80.0);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.points[i][k], b.points[i][k], 1e-5);
  }
  EXPECT_EQ(a.colors, pc.colors);
}

TEST(RenderOrtho, EmptyCanvasStaysWhite) {
  ProjectionConfig cfg;
  const Image img = render_ortho(one_point({0, 0, 0}, {255, 0, 0}), cfg);
  ASSERT_EQ(img.width, 512u);
  EXPECT_TRUE(is_white(img, 0, 0));
  EXPECT_TRUE(is_white(img, 511, 511));
  EXPECT_TRUE(is_white(img, 100, 400));
}

TEST(RenderOrtho, OriginPointIsDiscAtCenter) {
  ProjectionConfig cfg;
  const Image img = render_ortho(one_point({0, 0, 0}, {255, 0, 0}), cfg);
  std::size_t red = 0;
  double sx = 0, sy = 0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      if (!is_white(img, x, y)) {
        EXPECT_EQ(img.at(x, y, 0), 1.0f);
        EXPECT_EQ(img.at(x, y, 1), 0.0f);
        ++red;
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
      }
    }
  }
  // radius 1 disc is a plus sign of 5 pixels
  EXPECT_EQ(red, 5u);
  EXPECT_NEAR(sx / red, 255.5, 0.51);
  EXPECT_NEAR(sy / red, 255.5, 0.51);
}

TEST(RenderOrtho, NearestDepthWins) {
  PointCloud pc;
  pc.points = {{0, 0, 0.5f}, {0, 0, -0.5f}};
  pc.colors = {{255, 0, 0}, {0, 0, 255}};
  ProjectionConfig cfg;
  const Image img = render_ortho(pc, cfg);
  EXPECT_EQ(img.at(256, 256, 0), 1.0f);
  EXPECT_EQ(img.at(256, 256, 2), 0.0f);
  // swapping order does not change the answer
  std::swap(pc.points[0], pc.points[1]);
  std::swap(pc.colors[0], pc.colors[1]);
  EXPECT_EQ(render_ortho(pc, cfg), img);
}

TEST(RenderOrtho, DepthTieGoesToLaterPoint) {
  PointCloud pc;
  pc.points = {{0, 0, 0}, {0, 0, 0}};
  pc.colors = {{255, 0, 0}, {0, 255, 0}};
  const Image img = render_ortho(pc, ProjectionConfig{});
  EXPECT_EQ(img.at(256, 256, 1), 1.0f);
  EXPECT_EQ(img.at(256, 256, 0), 0.0f);
}

TEST(RenderOrtho, CornersLandInsideMargin) {
  PointCloud pc;
  pc.points = {{-1, 1, 0}, {1, -1, 0}};
  pc.colors = {{0, 0, 0}, {0, 0, 0}};
  ProjectionConfig cfg;
  cfg.point_radius = 0;
  const Image img = render_ortho(pc, cfg);
  const Image crop = crop_content(img, cfg.white_threshold);
  // 5% margin each side: content spans ~90% of the canvas
  EXPECT_NEAR(static_cast<double>(crop.width), 0.9 * 512, 2.0);
  EXPECT_NEAR(static_cast<double>(crop.height), 0.9 * 512, 2.0);
  EXPECT_FALSE(is_white(img, 25, 25));
  EXPECT_FALSE(is_white(img, 486, 486));
}

TEST(RenderOrtho, Deterministic) {
  const PointCloud pc = normalize_unit(synth_shape(ShapeKind::Torus, 20000, 3));
  EXPECT_EQ(render_ortho(pc, ProjectionConfig{}), render_ortho(pc, ProjectionConfig{}));
}

TEST(CropContent, AllWhiteUnchanged) {
  const Image img(100, 100, 1.0f);
  EXPECT_EQ(crop_content(img, 0.999f), img);
}

TEST(CropContent, SinglePixel) {
  Image img(100, 100, 1.0f);
  img.at(10, 20, 1) = 0.2f;
  const Image c = crop_content(img, 0.999f);
  ASSERT_EQ(c.width, 1u);
  ASSERT_EQ(c.height, 1u);
  EXPECT_EQ(c.at(0, 0, 1), 0.2f);
}

TEST(CropContent, RectangleSixByFive) {
  Image img(40, 30, 1.0f);
  for (std::size_t y = 5; y <= 10; ++y) {
    for (std::size_t x = 3; x <= 7; ++x) img.at(x, y, 0) = 0.0f;
  }
  const Image c = crop_content(img, 0.999f);
  EXPECT_EQ(c.height, 6u);
  EXPECT_EQ(c.width, 5u);
}

TEST(CropContent, NearWhiteAboveThresholdIsBackground) {
  Image img(10, 10, 1.0f);
  img.at(2, 2, 0) = 0.9995f;
  img.at(7, 7, 0) = 0.5f;
  const Image c = crop_content(img, 0.999f);
  EXPECT_EQ(c.width, 1u);
}

TEST(ResizeBilinear, ConstantStaysConstant) {
  const Image img(17, 9, 0.37f);
  for (auto [w, h] : {std::pair{224, 224}, {3, 50}, {1, 1}}) {
    const Image r = resize_bilinear(img, w, h);
    for (float v : r.pixels) EXPECT_FLOAT_EQ(v, 0.37f);
  }
}

TEST(ResizeBilinear, TwoPixelRampHandComputed) {
  Image img(2, 1, 0.0f);
  for (std::size_t c = 0; c < 3; ++c) img.at(1, 0, c) = 1.0f;
  const Image r = resize_bilinear(img, 4, 1);
  // half-pixel centers map output x to source (x+0.5)/2-0.5 clamped to [0,1]
  const float expect[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (std::size_t x = 0; x < 4; ++x) EXPECT_FLOAT_EQ(r.at(x, 0, 0), expect[x]);
}

TEST(ResizeBilinear, IdentityResizeEqual) {
  const PointCloud pc = normalize_unit(synth_shape(ShapeKind::Sphere, 2000, 3));
  ProjectionConfig cfg;
  cfg.raster_size = 64;
  const Image img = render_ortho(pc, cfg);
  EXPECT_EQ(resize_bilinear(img, 64, 64), img);
}

TEST(ResizeBilinear, OutputStaysInUnitRange) {
  Image img(5, 5, 0.0f);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = (i % 7) / 6.0f;
  const Image r = resize_bilinear(img, 13, 11);
  for (float v : r.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Flip, InvolutionAndPixelMapping) {
  Image img(3, 2, 0.0f);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i) / 18.0f;
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
  EXPECT_EQ(flip_horizontal(img).at(0, 1, 2), img.at(2, 1, 2));
  EXPECT_EQ(flip_vertical(img).at(1, 0, 0), img.at(1, 1, 0));
}

TEST(ProjectViews, CountsAndSizes) {
  const PointCloud pc = synth_shape(ShapeKind::Cube, 5000, 2);
  for (auto [rs, n] : {std::pair{36.0, 10u}, {60.0, 6u}, {48.0, 7u}, {24.0, 15u}}) {
    ProjectionConfig cfg;
    cfg.rs_deg = rs;
    cfg.raster_size = 128;
    cfg.output_size = 32;
    const ViewGroups g = project_views(pc, cfg);
    ASSERT_EQ(g.horizontal.images.size(), n);
    ASSERT_EQ(g.vertical.images.size(), n);
    EXPECT_EQ(g.horizontal.direction, ViewDirection::Horizontal);
    EXPECT_EQ(g.vertical.direction, ViewDirection::Vertical);
    EXPECT_DOUBLE_EQ(g.horizontal.rs_deg, rs);
    for (const auto* grp : {&g.horizontal, &g.vertical}) {
      for (const auto& img : grp->images) {
        EXPECT_EQ(img.width, 32u);
        EXPECT_EQ(img.height, 32u);
        for (float v : img.pixels) {
          ASSERT_GE(v, 0.0f);
          ASSERT_LE(v, 1.0f);
        }
      }
    }
  }
}

TEST(ProjectViews, DefaultIsTwentyImagesAt224) {
  const ViewGroups g = project_views(synth_shape(ShapeKind::Sphere, 3000, 1), ProjectionConfig{});
  EXPECT_EQ(g.horizontal.images.size() + g.vertical.images.size(), 20u);
  EXPECT_EQ(g.horizontal.images[3].width, 224u);
}

TEST(ProjectViews, ThreadCountDoesNotChangeOutput) {
  const PointCloud pc = synth_shape(ShapeKind::Torus, 8000, 5);
  ProjectionConfig cfg;
  cfg.rs_deg = 60;
  const ViewGroups a = project_views(pc, cfg, 1);
  const ViewGroups b = project_views(pc, cfg, 4);
  EXPECT_EQ(a.horizontal.images, b.horizontal.images);
  EXPECT_EQ(a.vertical.images, b.vertical.images);
}

TEST(ProjectViews, YPreRotationIsCyclicShift) {
  const PointCloud pc = synth_shape(ShapeKind::Torus, 40000, 7);
  ProjectionConfig cfg;
  const ViewGroups base = project_views(pc, cfg);
  const std::size_t n = base.horizontal.images.size();
  for (std::size_t k : {1u, 3u}) {
    const ViewGroups moved = project_views(rotate(pc, Axis::Y, k * cfg.rs_deg), cfg);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(image_mae(moved.horizontal.images[i], base.horizontal.images[(i + k) % n]), 0.02)
          << "k=" << k << " i=" << i;
    }
  }
}

TEST(ProjectionConfig, RejectsBadValues) {
  ProjectionConfig cfg;
  cfg.raster_size = 100;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.rs_deg = -5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(WritePng, WritesFile) {
  const auto p = std::filesystem::temp_directory_path() / "pcqa_test_write.png";
  write_png(Image(8, 4, 0.5f), p);
  EXPECT_GT(std::filesystem::file_size(p), 8u);
}
