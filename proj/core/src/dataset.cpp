#include "pcqa/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pcqa/error.hpp"
#include "pcqa/rng.hpp"

namespace pcqa {

PackedGroup PackedGroup::pack(const ProjectionGroup& g) {
  PackedGroup p;
  p.count = g.images.size();
  p.rs_deg = g.rs_deg;
  p.direction = g.direction;
  if (p.count == 0) return p;
  p.size = g.images[0].width;
  const std::size_t plane = p.size * p.size;
  p.data.resize(p.count * 3 * plane);
  for (std::size_t i = 0; i < p.count; ++i) {
    const Image& im = g.images[i];
    if (im.width != p.size || im.height != p.size) fail(Errc::ShapeMismatch, "packed views must be square and equal");
    std::uint8_t* dst = p.data.data() + i * 3 * plane;
    for (std::size_t px = 0; px < plane; ++px) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(im.pixels[px * 3 + c], 0.0f, 1.0f);
        dst[c * plane + px] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return p;
}

ProjectionGroup PackedGroup::unpack() const {
  ProjectionGroup g;
  g.rs_deg = rs_deg;
  g.direction = direction;
  const std::size_t plane = size * size;
  for (std::size_t i = 0; i < count; ++i) {
    Image im(size, size);
    const std::uint8_t* src = image(i);
    for (std::size_t px = 0; px < plane; ++px) {
      for (std::size_t c = 0; c < 3; ++c) im.pixels[px * 3 + c] = static_cast<float>(src[c * plane + px]) / 255.0f;
    }
    g.images.push_back(std::move(im));
  }
  return g;
}

PackedViews pack_views(const ViewGroups& v) {
  return {PackedGroup::pack(v.horizontal), PackedGroup::pack(v.vertical)};
}

// ---------------------------------------------------------------------------
// View cache

namespace {

constexpr char kMagic[4] = {'P', 'C', 'Q', 'V'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv_mix(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename V>
void put(std::ostream& out, V v) {
  static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
bool get(std::istream& in, V& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

void put_group(std::ostream& out, const PackedGroup& g) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.count));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.size));
  put<std::uint32_t>(out, g.direction == ViewDirection::Horizontal ? 0u : 1u);
  put<double>(out, g.rs_deg);
  out.write(reinterpret_cast<const char*>(g.data.data()), static_cast<std::streamsize>(g.data.size()));
}

bool get_group(std::istream& in, PackedGroup& g) {
  std::uint32_t count = 0, size = 0, dir = 0;
  if (!get(in, count) || !get(in, size) || !get(in, dir) || !get(in, g.rs_deg) || dir > 1) return false;
  if (static_cast<std::uint64_t>(count) * size * size > (1ULL << 32)) return false;
  g.count = count;
  g.size = size;
  g.direction = dir == 0 ? ViewDirection::Horizontal : ViewDirection::Vertical;
  g.data.resize(g.count * 3 * g.size * g.size);
  return static_cast<bool>(in.read(reinterpret_cast<char*>(g.data.data()), static_cast<std::streamsize>(g.data.size())));
}

}  // namespace

std::uint64_t projection_config_hash(const ProjectionConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t raster = cfg.raster_size, out = cfg.output_size;
  const std::int64_t radius = cfg.point_radius;
  h = fnv_mix(h, &cfg.rs_deg, sizeof cfg.rs_deg);
  h = fnv_mix(h, &raster, sizeof raster);
  h = fnv_mix(h, &radius, sizeof radius);
  h = fnv_mix(h, &cfg.white_threshold, sizeof cfg.white_threshold);
  h = fnv_mix(h, &out, sizeof out);
  return fnv_mix(h, &kVersion, sizeof kVersion);
}

void write_packed_views(const std::filesystem::path& path, const PackedViews& views) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // write-then-rename keeps concurrent readers from seeing half a file
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write view cache entry '" + tmp + "'");
    out.write(kMagic, 4);
    put(out, kVersion);
    put_group(out, views.horizontal);
    put_group(out, views.vertical);
    if (!out) fail(Errc::IoError, "failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::optional<PackedViews> read_packed_views(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::uint32_t version = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0 || !get(in, version) || version != kVersion) {
    return std::nullopt;
  }
  PackedViews v;
  if (!get_group(in, v.horizontal) || !get_group(in, v.vertical)) return std::nullopt;
  return v;
}

ViewCache::ViewCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ViewCache::default_dir() {
  if (const char* env = std::getenv("PCQ_CACHE_DIR"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return std::filesystem::path(xdg) / "pcqa";
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".cache" / "pcqa";
  return std::filesystem::temp_directory_path() / "pcqa-cache";
}

std::filesystem::path ViewCache::entry_path(const PointCloud& pc, const ProjectionConfig& cfg) const {
  char name[48];
  std::snprintf(name, sizeof name, "%016llx-%016llx.pcqv", static_cast<unsigned long long>(content_hash(pc)),
                static_cast<unsigned long long>(projection_config_hash(cfg)));
  return dir_ / name;
}

std::optional<PackedViews> ViewCache::find(const PointCloud& pc, const ProjectionConfig& cfg) const {
  auto v = read_packed_views(entry_path(pc, cfg));
  if (v && (v->horizontal.count != view_count(cfg.rs_deg) || v->horizontal.size != cfg.output_size)) {
    return std::nullopt;
  }
  return v;
}

void ViewCache::store(const PointCloud& pc, const ProjectionConfig& cfg, const PackedViews& views) const {
  write_packed_views(entry_path(pc, cfg), views);
}

PackedViews ViewCache::get_or_render(const PointCloud& pc, const ProjectionConfig& cfg, unsigned threads) const {
  if (auto hit = find(pc, cfg)) return *hit;
  PackedViews v = pack_views(project_views(pc, cfg, threads));
  store(pc, cfg, v);
  return v;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& file, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    fail(Errc::IoError, file.string() + ":" + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
  return v;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& csv,
                                               const std::vector<std::string>& header) {
  std::ifstream in(csv);
  if (!in) fail(Errc::IoError, "cannot read '" + csv.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(Errc::MalformedHeader, "'" + csv.string() + "' is empty");
  const auto head = split_csv_line(line);
  if (head.size() != header.size() || (!header.empty() && head[0] != header[0] && header[0] != "*")) {
    fail(Errc::MalformedHeader, "'" + csv.string() + "' header must be " + [&] {
      std::string h;
      for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
      return h;
    }());
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != "*" && head[i] != header[i]) {
      fail(Errc::MalformedHeader, "'" + csv.string() + "' unexpected column '" + head[i] + "'");
    }
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(Errc::IoError, csv.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& csv) {
  const auto rows = read_csv(csv, {"content_id", "path", "mos"});
  const auto base = csv.parent_path();
  std::vector<ManifestEntry> out;
  std::size_t line_no = 1;
  for (const auto& r : rows) {
    ++line_no;
    std::filesystem::path p = r[1];
    if (p.is_relative()) p = base / p;
    out.push_back({r[0], p, parse_number(r[2], csv, line_no)});
  }
  return out;
}

void save_manifest(const std::filesystem::path& csv, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write '" + csv.string() + "'");
  const auto base = csv.parent_path();
  out << "content_id,path,mos\n";
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mos);
    out << e.content_id << "," << std::filesystem::relative(e.path, base.empty() ? "." : base).generic_string()
        << "," << buf << "\n";
  }
}

std::vector<std::pair<std::string, double>> load_score_csv(const std::filesystem::path& csv) {
  const auto rows = read_csv(csv, {"id", "*"});
  std::vector<std::pair<std::string, double>> out;
  std::size_t line_no = 1;
  for (const auto& r : rows) out.emplace_back(r[0], parse_number(r[1], csv, ++line_no));
  return out;
}

void save_score_csv(const std::filesystem::path& csv, const std::string& column,
                    const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(csv, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write '" + csv.string() + "'");
  out << "id," << column << "\n";
  char buf[64];
  for (const auto& [id, v] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << id << "," << buf << "\n";
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> LabeledDataset::content_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.content_id);
  return ids;
}

void LabeledDataset::validate() const {
  if (!(mos_min < mos_max)) fail(Errc::InvalidArgument, "MOS range must be non-empty");
  for (const auto& s : samples) {
    if (!std::isfinite(s.mos) || s.mos < mos_min || s.mos > mos_max) {
      fail(Errc::InvalidArgument, "MOS of '" + s.id + "' is outside [" + std::to_string(mos_min) + ", " +
                                      std::to_string(mos_max) + "]");
    }
  }
}

LabeledDataset load_dataset(const std::filesystem::path& manifest, const ProjectionConfig& cfg,
                            const ViewCache* cache, double mos_min, double mos_max, unsigned threads) {
  LabeledDataset ds;
  ds.mos_min = mos_min;
  ds.mos_max = mos_max;
  for (const auto& e : load_manifest(manifest)) {
    const PointCloud pc = load_ply(e.path);
    LabeledSample s;
    s.id = e.id();
    s.content_id = e.content_id;
    s.mos = e.mos;
    s.views = cache ? cache->get_or_render(pc, cfg, threads) : pack_views(project_views(pc, cfg, threads));
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

std::vector<ManifestEntry> synth_dataset(const std::filesystem::path& out_dir, const SynthOptions& opt) {
  if (opt.n_contents == 0 || opt.noise_levels.empty() || opt.points == 0) {
    fail(Errc::InvalidArgument, "synth needs contents, noise levels and points");
  }
  for (double s : opt.noise_levels) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail(Errc::InvalidArgument, "noise levels must be non-negative");
  }
  const double sigma_max = *std::max_element(opt.noise_levels.begin(), opt.noise_levels.end());
  const auto cloud_dir = out_dir / "clouds";
  std::filesystem::create_directories(cloud_dir);
  Rng rng(opt.seed);
  std::vector<ManifestEntry> entries;
  std::vector<std::pair<std::string, double>> mos_rows;
  static constexpr ShapeKind kinds[3] = {ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Torus};
  for (std::size_t c = 0; c < opt.n_contents; ++c) {
    PointCloud pc = synth_shape(kinds[c % 3], opt.points, rng.next_u64());
    const double sx = rng.uniform(0.6, 1.0), sy = rng.uniform(0.6, 1.0), sz = rng.uniform(0.6, 1.0);
    for (auto& p : pc.points) {
      p[0] = static_cast<float>(p[0] * sx);
      p[1] = static_cast<float>(p[1] * sy);
      p[2] = static_cast<float>(p[2] * sz);
    }
    pc = rotate(rotate(pc, Axis::X, rng.uniform(0.0, 360.0)), Axis::Y, rng.uniform(0.0, 360.0));
    pc = normalize_unit(pc);
    char content[16];
    std::snprintf(content, sizeof content, "c%02zu", c);
    for (std::size_t l = 0; l < opt.noise_levels.size(); ++l) {
      const double sigma = opt.noise_levels[l];
      const PointCloud d = distort(pc, {DistortionKind::GeometryGaussianNoise, sigma, rng.next_u64()});
      const auto path = cloud_dir / (std::string(content) + "_l" + std::to_string(l) + ".ply");
      save_ply(d, path);
      const double mos = sigma_max > 0 ? opt.mos_max * (1.0 - sigma / sigma_max) : opt.mos_max;
      entries.push_back({content, path, mos});
      mos_rows.emplace_back(entries.back().id(), mos);
    }
  }
  save_manifest(out_dir / "manifest.csv", entries);
  save_score_csv(out_dir / "mos.csv", "mos", mos_rows);
  return entries;
}

}  // namespace pcqa
