#include "pcqa/point_cloud.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include "pcqa/error.hpp"
#include "pcqa/rng.hpp"

namespace pcqa {

void PointCloud::validate() const {
  if (points.empty()) fail(Errc::EmptyCloud, "point cloud has no points");
  if (points.size() != colors.size()) {
    fail(Errc::InvalidArgument, "point cloud has " + std::to_string(points.size()) +
                                    " points but " + std::to_string(colors.size()) + " colors");
  }
  for (const auto& p : points) {
    for (float c : p) {
      if (!std::isfinite(c)) fail(Errc::InvalidArgument, "point cloud has a non-finite coordinate");
    }
  }
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> parse_scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

enum class BodyFormat { Ascii, BinaryLE };

struct PlyHeader {
  BodyFormat format = BodyFormat::Ascii;
  std::vector<PlyElement> elements;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

PlyHeader read_header(std::istream& in) {
  PlyHeader header;
  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") fail(Errc::MalformedHeader, "missing 'ply' magic line");
  bool saw_format = false;
  bool saw_end = false;
  while (next_line()) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      saw_end = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() < 2) fail(Errc::MalformedHeader, "incomplete format line");
      if (tok[1] == "ascii") {
        header.format = BodyFormat::Ascii;
      } else if (tok[1] == "binary_little_endian") {
        header.format = BodyFormat::BinaryLE;
      } else if (tok[1] == "binary_big_endian") {
        fail(Errc::UnsupportedFormat, "binary_big_endian PLY is not supported");
      } else {
        fail(Errc::MalformedHeader, "unknown PLY format '" + std::string(tok[1]) + "'");
      }
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) fail(Errc::MalformedHeader, "bad element line: " + line);
      PlyElement el;
      el.name = std::string(tok[1]);
      auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), el.count);
      if (ec != std::errc{} || ptr != tok[2].data() + tok[2].size()) {
        fail(Errc::MalformedHeader, "bad element count: " + line);
      }
      header.elements.push_back(std::move(el));
    } else if (tok[0] == "property") {
      if (header.elements.empty()) fail(Errc::MalformedHeader, "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = parse_scalar_type(tok[2]);
        auto it = parse_scalar_type(tok[3]);
        if (!ct || !it) fail(Errc::MalformedHeader, "bad list property: " + line);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = parse_scalar_type(tok[1]);
        if (!t) fail(Errc::MalformedHeader, "bad property type: " + line);
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        fail(Errc::MalformedHeader, "bad property line: " + line);
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      fail(Errc::MalformedHeader, "unexpected header line: " + line);
    }
  }
  if (!saw_end) fail(Errc::MalformedHeader, "missing end_header");
  if (!saw_format) fail(Errc::MalformedHeader, "missing format line");
  return header;
}

double decode_scalar(const unsigned char* p, ScalarType t) {
  auto load = [p]<typename V>(V) {
    V v;
    std::memcpy(&v, p, sizeof(V));
    if constexpr (std::endian::native == std::endian::big && sizeof(V) > 1) {
      auto* b = reinterpret_cast<unsigned char*>(&v);
      std::reverse(b, b + sizeof(V));
    }
    return static_cast<double>(v);
  };
  switch (t) {
    case ScalarType::Int8: return load(std::int8_t{});
    case ScalarType::UInt8: return load(std::uint8_t{});
    case ScalarType::Int16: return load(std::int16_t{});
    case ScalarType::UInt16: return load(std::uint16_t{});
    case ScalarType::Int32: return load(std::int32_t{});
    case ScalarType::UInt32: return load(std::uint32_t{});
    case ScalarType::Float32: return load(float{});
    case ScalarType::Float64: return load(double{});
  }
  return 0.0;
}

// Slot assignment for the vertex element: which property feeds which field.
struct VertexLayout {
  int x = -1, y = -1, z = -1, r = -1, g = -1, b = -1;
};

VertexLayout vertex_layout(const PlyElement& el) {
  VertexLayout lay;
  for (std::size_t i = 0; i < el.properties.size(); ++i) {
    const auto& p = el.properties[i];
    if (p.is_list) continue;
    const int idx = static_cast<int>(i);
    if (p.name == "x") lay.x = idx;
    else if (p.name == "y") lay.y = idx;
    else if (p.name == "z") lay.z = idx;
    else if (p.name == "red" || p.name == "diffuse_red") lay.r = idx;
    else if (p.name == "green" || p.name == "diffuse_green") lay.g = idx;
    else if (p.name == "blue" || p.name == "diffuse_blue") lay.b = idx;
  }
  if (lay.x < 0 || lay.y < 0 || lay.z < 0) {
    fail(Errc::MalformedHeader, "vertex element lacks x/y/z properties");
  }
  if (lay.r < 0 || lay.g < 0 || lay.b < 0) {
    fail(Errc::MissingColorProperty, "vertex element lacks red/green/blue properties");
  }
  return lay;
}

std::uint8_t to_color(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void emit_vertex(PointCloud& pc, const VertexLayout& lay, const std::vector<double>& values) {
  pc.points.push_back({static_cast<float>(values[lay.x]), static_cast<float>(values[lay.y]),
                       static_cast<float>(values[lay.z])});
  pc.colors.push_back({to_color(values[lay.r]), to_color(values[lay.g]), to_color(values[lay.b])});
}

void read_binary_body(std::istream& in, const PlyHeader& header, PointCloud& pc) {
  std::vector<unsigned char> buf(8);
  auto read_exact = [&](std::size_t n) {
    buf.resize(std::max<std::size_t>(n, 8));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      fail(Errc::TruncatedBody, "PLY body ends before all declared records were read");
    }
  };
  for (const auto& el : header.elements) {
    const bool is_vertex = el.name == "vertex";
    VertexLayout lay;
    if (is_vertex) {
      lay = vertex_layout(el);
      pc.points.reserve(el.count);
      pc.colors.reserve(el.count);
    }
    std::vector<double> values(el.properties.size(), 0.0);
    for (std::size_t rec = 0; rec < el.count; ++rec) {
      for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
        const auto& p = el.properties[pi];
        if (p.is_list) {
          read_exact(scalar_size(p.count_type));
          const double count = decode_scalar(buf.data(), p.count_type);
          if (count < 0) fail(Errc::MalformedHeader, "negative list length");
          read_exact(static_cast<std::size_t>(count) * scalar_size(p.type));
        } else {
          read_exact(scalar_size(p.type));
          values[pi] = decode_scalar(buf.data(), p.type);
        }
      }
      if (is_vertex) emit_vertex(pc, lay, values);
    }
    if (is_vertex) return;
  }
}

void read_ascii_body(std::istream& in, const PlyHeader& header, PointCloud& pc) {
  std::string token;
  auto next_number = [&]() -> double {
    if (!(in >> token)) fail(Errc::TruncatedBody, "PLY body ends before all declared records were read");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(Errc::TruncatedBody, "malformed PLY record token '" + token + "'");
    }
    return v;
  };
  for (const auto& el : header.elements) {
    const bool is_vertex = el.name == "vertex";
    VertexLayout lay;
    if (is_vertex) {
      lay = vertex_layout(el);
      pc.points.reserve(el.count);
      pc.colors.reserve(el.count);
    }
    std::vector<double> values(el.properties.size(), 0.0);
    for (std::size_t rec = 0; rec < el.count; ++rec) {
      for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
        if (el.properties[pi].is_list) {
          const double count = next_number();
          for (long k = 0; k < static_cast<long>(count); ++k) next_number();
        } else {
          values[pi] = next_number();
        }
      }
      if (is_vertex) emit_vertex(pc, lay, values);
    }
    if (is_vertex) return;
  }
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path.string() + "'");
  const PlyHeader header = read_header(in);
  const auto vertex = std::find_if(header.elements.begin(), header.elements.end(),
                                   [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex == header.elements.end()) fail(Errc::MalformedHeader, "no vertex element");
  vertex_layout(*vertex);

  PointCloud pc;
  if (header.format == BodyFormat::BinaryLE) {
    read_binary_body(in, header, pc);
  } else {
    read_ascii_body(in, header, pc);
  }
  pc.validate();
  return pc;
}

void save_ply(const PointCloud& pc, const std::filesystem::path& path, PlyFormat format) {
  if (path.empty()) fail(Errc::IoError, "empty output path");
  pc.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path.string() + "' for writing");

  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << pc.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";

  if (format == PlyFormat::Ascii) {
    char buf[32];
    std::string line;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      line.clear();
      for (float c : pc.points[i]) {
        auto res = std::to_chars(buf, buf + sizeof(buf), c);
        line.append(buf, res.ptr);
        line.push_back(' ');
      }
      const auto& col = pc.colors[i];
      line += std::to_string(col[0]) + ' ' + std::to_string(col[1]) + ' ' + std::to_string(col[2]);
      line.push_back('\n');
      out << line;
    }
  } else {
    std::vector<char> record(15);
    for (std::size_t i = 0; i < pc.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        auto bits = std::bit_cast<std::uint32_t>(pc.points[i][k]);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        std::memcpy(record.data() + 4 * k, &bits, 4);
      }
      std::memcpy(record.data() + 12, pc.colors[i].data(), 3);
      out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
  }
  if (!out) fail(Errc::IoError, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

std::array<double, 3> centroid(const PointCloud& pc) {
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (const auto& p : pc.points) {
    for (int k = 0; k < 3; ++k) c[k] += p[k];
  }
  for (auto& v : c) v /= static_cast<double>(pc.size());
  return c;
}

template <typename Extent>
PointCloud center_and_scale(const PointCloud& pc, Extent extent) {
  if (pc.points.empty()) fail(Errc::EmptyCloud, "cannot normalize an empty point cloud");
  const auto c = centroid(pc);
  std::vector<std::array<double, 3>> centered(pc.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) centered[i][k] = pc.points[i][k] - c[k];
    scale = std::max(scale, extent(centered[i]));
  }
  PointCloud out;
  out.colors = pc.colors;
  out.points.resize(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      out.points[i][k] = scale > 0.0 ? static_cast<float>(centered[i][k] / scale) : 0.0f;
    }
  }
  return out;
}

}  // namespace

PointCloud normalize_unit(const PointCloud& pc) {
  return center_and_scale(pc, [](const std::array<double, 3>& p) {
    return std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])});
  });
}

PointCloud normalize_unit_ball(const PointCloud& pc) {
  return center_and_scale(pc, [](const std::array<double, 3>& p) {
    return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  });
}

// ---------------------------------------------------------------------------
// Distortion

std::string_view distortion_name(DistortionKind kind) noexcept {
  switch (kind) {
    case DistortionKind::Downsample: return "downsample";
    case DistortionKind::GeometryGaussianNoise: return "geometry";
    case DistortionKind::ColorGaussianNoise: return "color";
  }
  return "unknown";
}

DistortionSpec DistortionSpec::parse(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) {
    fail(Errc::InvalidArgument, "distortion must be kind:level:seed, got '" + std::string(text) + "'");
  }
  const auto kind = text.substr(0, c1);
  const auto level = text.substr(c1 + 1, c2 - c1 - 1);
  const auto seed = text.substr(c2 + 1);
  DistortionSpec spec;
  if (kind == "downsample") spec.kind = DistortionKind::Downsample;
  else if (kind == "geometry" || kind == "gaussian" || kind == "geometry_noise")
    spec.kind = DistortionKind::GeometryGaussianNoise;
  else if (kind == "color" || kind == "color_noise")
    spec.kind = DistortionKind::ColorGaussianNoise;
  else
    fail(Errc::InvalidArgument, "unknown distortion kind '" + std::string(kind) + "'");
  auto r1 = std::from_chars(level.data(), level.data() + level.size(), spec.level);
  auto r2 = std::from_chars(seed.data(), seed.data() + seed.size(), spec.seed);
  if (r1.ec != std::errc{} || r1.ptr != level.data() + level.size() || r2.ec != std::errc{} ||
      r2.ptr != seed.data() + seed.size()) {
    fail(Errc::InvalidArgument, "malformed distortion '" + std::string(text) + "'");
  }
  return spec;
}

PointCloud distort(const PointCloud& pc, const DistortionSpec& spec) {
  pc.validate();
  if (!std::isfinite(spec.level) || spec.level < 0.0) {
    fail(Errc::InvalidArgument, "distortion level must be finite and non-negative");
  }
  Rng rng(spec.seed);
  switch (spec.kind) {
    case DistortionKind::Downsample: {
      if (spec.level > 1.0) fail(Errc::InvalidArgument, "downsample keep-ratio must be <= 1");
      const std::size_t n = pc.size();
      const auto keep = static_cast<std::size_t>(std::llround(spec.level * static_cast<double>(n)));
      if (keep == 0) fail(Errc::EmptyResult, "downsample would keep no points");
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (std::size_t i = 0; i < keep; ++i) {
        std::swap(idx[i], idx[i + rng.below(n - i)]);
      }
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
      PointCloud out;
      out.points.reserve(keep);
      out.colors.reserve(keep);
      for (auto i : idx) {
        out.points.push_back(pc.points[i]);
        out.colors.push_back(pc.colors[i]);
      }
      return out;
    }
    case DistortionKind::GeometryGaussianNoise: {
      if (spec.level == 0.0) return pc;
      // Noise is specified in normalized units; scale it back to the input frame.
      const auto c = centroid(pc);
      double unit = 0.0;
      for (const auto& p : pc.points) {
        for (int k = 0; k < 3; ++k) unit = std::max(unit, std::abs(p[k] - c[k]));
      }
      const double sigma = spec.level * (unit > 0.0 ? unit : 1.0);
      PointCloud out = pc;
      for (auto& p : out.points) {
        for (auto& v : p) v = static_cast<float>(v + rng.normal(0.0, sigma));
      }
      return out;
    }
    case DistortionKind::ColorGaussianNoise: {
      if (spec.level == 0.0) return pc;
      const double sigma = 255.0 * spec.level;
      PointCloud out = pc;
      for (auto& col : out.colors) {
        for (auto& ch : col) ch = to_color(ch + rng.normal(0.0, sigma));
      }
      return out;
    }
  }
  return pc;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

ShapeKind parse_shape_kind(std::string_view text) {
  if (text == "sphere") return ShapeKind::Sphere;
  if (text == "cube") return ShapeKind::Cube;
  if (text == "torus") return ShapeKind::Torus;
  fail(Errc::InvalidArgument, "unknown shape '" + std::string(text) + "'");
}

std::string_view shape_name(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Cube: return "cube";
    case ShapeKind::Torus: return "torus";
  }
  return "unknown";
}

Rgb8 stripe_colormap(double t) {
  t -= std::floor(t);
  auto channel = [t](double phase) {
    const double v = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (t - phase));
    return static_cast<std::uint8_t>(std::lround(30.0 + 195.0 * v));
  };
  return {channel(0.0), channel(1.0 / 3.0), channel(2.0 / 3.0)};
}

namespace {

using Vec3d = std::array<double, 3>;

Vec3d sample_sphere(Rng& rng) {
  for (;;) {
    Vec3d v{rng.normal(), rng.normal(), rng.normal()};
    const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (r > 1e-12) return {v[0] / r, v[1] / r, v[2] / r};
  }
}

Vec3d sample_cube(Rng& rng) {
  const auto face = rng.below(6);
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  const double s = (face % 2 == 0) ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {s, u, v};
    case 1: return {u, s, v};
    default: return {u, v, s};
  }
}

constexpr double kTorusMajor = 0.7;
constexpr double kTorusMinor = 0.3;

Vec3d sample_torus(Rng& rng) {
  // Rejection on the area element (R + r cos v) keeps the density uniform.
  for (;;) {
    const double u = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double w = rng.uniform(0.0, kTorusMajor + kTorusMinor);
    const double ring = kTorusMajor + kTorusMinor * std::cos(v);
    if (w <= ring) return {ring * std::cos(u), kTorusMinor * std::sin(v), ring * std::sin(u)};
  }
}

// Zero-sum triple on the surface that touches the shape's extreme x
// coordinate. Together with antipodal pairs it pins the centroid at the
// origin for odd sample counts.
std::vector<Vec3d> zero_sum_triple(ShapeKind kind) {
  if (kind == ShapeKind::Cube) return {{1.0, 0.0, 0.0}, {-0.5, 1.0, 0.0}, {-0.5, -1.0, 0.0}};
  const double e = kind == ShapeKind::Torus ? kTorusMajor + kTorusMinor : 1.0;
  const double c = std::sqrt(3.0) / 2.0;
  return {{e, 0.0, 0.0}, {-0.5 * e, 0.0, c * e}, {-0.5 * e, 0.0, -c * e}};
}

}  // namespace

PointCloud synth_shape(ShapeKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(Errc::InvalidArgument, "synth_shape needs n >= 1");
  Rng rng(seed);
  auto sample = [&]() -> Vec3d {
    switch (kind) {
      case ShapeKind::Sphere: return sample_sphere(rng);
      case ShapeKind::Cube: return sample_cube(rng);
      case ShapeKind::Torus: return sample_torus(rng);
    }
    return {0.0, 0.0, 0.0};
  };

  // Centrally symmetric sample: the centroid is the origin and the extreme
  // x coordinate is attained, so normalization leaves the surface in place.
  std::vector<Vec3d> pts;
  pts.reserve(n);
  if (n == 1) {
    pts.push_back(sample());
  } else {
    if (n % 2 == 1 && n >= 3) {
      pts = zero_sum_triple(kind);
    } else {
      const auto first = zero_sum_triple(kind).front();
      pts.push_back(first);
      pts.push_back({-first[0], -first[1], -first[2]});
    }
    while (pts.size() + 2 <= n) {
      const Vec3d p = sample();
      pts.push_back(p);
      pts.push_back({-p[0], -p[1], -p[2]});
    }
  }

  PointCloud pc;
  pc.points.reserve(n);
  pc.colors.reserve(n);
  for (const auto& p : pts) {
    pc.points.push_back({static_cast<float>(p[0]), static_cast<float>(p[1]), static_cast<float>(p[2])});
    // Two colormap periods over y in [-1, 1].
    pc.colors.push_back(stripe_colormap(p[1] + 1.0));
  }
  return pc;
}

std::uint64_t content_hash(const PointCloud& pc) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t n = pc.size();
  mix(&n, sizeof(n));
  for (std::size_t i = 0; i < pc.size(); ++i) {
    mix(pc.points[i].data(), sizeof(float) * 3);
    mix(pc.colors[i].data(), 3);
  }
  return h;
}

}  // namespace pcqa
