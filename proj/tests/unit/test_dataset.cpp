#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "pcqa/dataset.hpp"
#include "pcqa/error.hpp"

using namespace pcqa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "pcqa_test_dataset" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ProjectionConfig small_projection() {
  ProjectionConfig cfg;
  cfg.rs_deg = 90;
  cfg.raster_size = 64;
  cfg.output_size = 32;
  return cfg;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

}  // namespace

TEST(PackedGroup, RoundTripOfQuantizedImages) {
  const auto views = project_views(synth_shape(ShapeKind::Cube, 2000, 1), small_projection());
  const PackedViews packed = pack_views(views);
  EXPECT_EQ(packed.horizontal.count, 4u);
  EXPECT_EQ(packed.horizontal.size, 32u);
  EXPECT_EQ(packed.vertical.direction, ViewDirection::Vertical);
  const ProjectionGroup back = packed.horizontal.unpack();
  ASSERT_EQ(back.images.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.images[i], quantize_u8(views.horizontal.images[i]));
  EXPECT_EQ(PackedGroup::pack(back), packed.horizontal);
}

TEST(PackedGroup, RejectsMixedSizes) {
  ProjectionGroup g;
  g.images = {Image(4, 4), Image(5, 5)};
  EXPECT_THROW(PackedGroup::pack(g), Error);
}

TEST(PackedViewsFile, WriteReadAndCorruption) {
  const auto dir = fresh_dir("pcqv");
  const PackedViews v = pack_views(project_views(synth_shape(ShapeKind::Torus, 2000, 2), small_projection()));
  const auto p = dir / "x.pcqv";
  write_packed_views(p, v);
  const auto back = read_packed_views(p);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(*back, v);
  fs::resize_file(p, fs::file_size(p) / 2);
  EXPECT_FALSE(read_packed_views(p).has_value());
  write_text(p, "garbage");
  EXPECT_FALSE(read_packed_views(p).has_value());
  EXPECT_FALSE(read_packed_views(dir / "missing.pcqv").has_value());
}

TEST(ViewCache, KeyedByContentAndConfig) {
  const auto dir = fresh_dir("cache");
  ViewCache cache(dir);
  const PointCloud a = synth_shape(ShapeKind::Sphere, 1500, 3);
  const PointCloud b = synth_shape(ShapeKind::Sphere, 1500, 4);
  ProjectionConfig cfg = small_projection();
  EXPECT_FALSE(cache.find(a, cfg).has_value());
  const PackedViews va = cache.get_or_render(a, cfg);
  EXPECT_TRUE(fs::exists(cache.entry_path(a, cfg)));
  EXPECT_EQ(*cache.find(a, cfg), va);
  EXPECT_NE(cache.entry_path(a, cfg), cache.entry_path(b, cfg));
  ProjectionConfig other = cfg;
  other.rs_deg = 60;
  EXPECT_NE(cache.entry_path(a, cfg), cache.entry_path(a, other));
  EXPECT_NE(projection_config_hash(cfg), projection_config_hash(other));
  EXPECT_EQ(cache.get_or_render(a, cfg), pack_views(project_views(a, cfg)));
  // no temp files left behind
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().extension(), ".pcqv");
}

TEST(ViewCache, DefaultDirHonoursEnvironment) {
  ::setenv("PCQ_CACHE_DIR", "/tmp/pcqa_env_cache", 1);
  EXPECT_EQ(ViewCache::default_dir(), fs::path("/tmp/pcqa_env_cache"));
  ::unsetenv("PCQ_CACHE_DIR");
  EXPECT_FALSE(ViewCache::default_dir().empty());
}

TEST(Manifest, RoundTripWithRelativePaths) {
  const auto dir = fresh_dir("manifest");
  const std::vector<ManifestEntry> entries{{"c0", dir / "clouds" / "a.ply", 7.5}, {"c1", dir / "b.ply", 2.25}};
  save_manifest(dir / "manifest.csv", entries);
  std::ifstream in(dir / "manifest.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "content_id,path,mos");
  EXPECT_EQ(first.find(dir.string()), std::string::npos) << "paths should be stored relative";
  const auto back = load_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].content_id, "c0");
  EXPECT_EQ(fs::weakly_canonical(back[0].path), fs::weakly_canonical(entries[0].path));
  EXPECT_DOUBLE_EQ(back[1].mos, 2.25);
  EXPECT_EQ(back[0].id(), "a");
}

TEST(Manifest, Errors) {
  const auto dir = fresh_dir("manifest_bad");
  write_text(dir / "m1.csv", "id,path,score\nc,a.ply,1\n");
  EXPECT_THROW(load_manifest(dir / "m1.csv"), Error);
  write_text(dir / "m2.csv", "content_id,path,mos\nc,a.ply,abc\n");
  EXPECT_THROW(load_manifest(dir / "m2.csv"), Error);
  write_text(dir / "m3.csv", "content_id,path,mos\nc,a.ply\n");
  EXPECT_THROW(load_manifest(dir / "m3.csv"), Error);
  EXPECT_THROW(load_manifest(dir / "missing.csv"), Error);
}

TEST(ScoreCsv, RoundTrip) {
  const auto dir = fresh_dir("scores");
  const std::vector<std::pair<std::string, double>> rows{{"a", 0.1}, {"b", 1.0 / 3.0}};
  save_score_csv(dir / "p.csv", "pred", rows);
  EXPECT_EQ(load_score_csv(dir / "p.csv"), rows);
}

TEST(LabeledDataset, ValidateRange) {
  LabeledDataset d;
  d.mos_min = 0;
  d.mos_max = 10;
  d.samples.push_back({"a", "c", 5.0, {}});
  EXPECT_NO_THROW(d.validate());
  d.samples.push_back({"b", "c", 11.0, {}});
  EXPECT_THROW(d.validate(), Error);
  d.samples.back().mos = NAN;
  EXPECT_THROW(d.validate(), Error);
}

TEST(Synth, ManifestAndMosRule) {
  const auto dir = fresh_dir("synth");
  SynthOptions opt;
  opt.n_contents = 3;
  opt.points = 500;
  opt.noise_levels = {0.0, 0.02, 0.04};
  const auto entries = synth_dataset(dir, opt);
  ASSERT_EQ(entries.size(), 9u);
  std::set<std::string> contents;
  for (const auto& e : entries) {
    EXPECT_TRUE(fs::exists(e.path)) << e.path;
    contents.insert(e.content_id);
  }
  EXPECT_EQ(contents.size(), 3u);
  EXPECT_DOUBLE_EQ(entries[0].mos, 10.0);
  EXPECT_DOUBLE_EQ(entries[1].mos, 5.0);
  EXPECT_DOUBLE_EQ(entries[2].mos, 0.0);
  EXPECT_TRUE(fs::exists(dir / "manifest.csv"));
  EXPECT_EQ(load_score_csv(dir / "mos.csv").size(), 9u);
  // same seed, same files
  const auto dir2 = fresh_dir("synth2");
  synth_dataset(dir2, opt);
  EXPECT_EQ(load_ply(dir / "clouds" / entries[4].path.filename()), load_ply(dir2 / "clouds" / entries[4].path.filename()));
}

TEST(Synth, LoadDatasetUsesCache) {
  const auto dir = fresh_dir("synth_load");
  SynthOptions opt;
  opt.n_contents = 2;
  opt.points = 800;
  opt.noise_levels = {0.0, 0.04};
  synth_dataset(dir, opt);
  ViewCache cache(dir / "cache");
  const auto d1 = load_dataset(dir / "manifest.csv", small_projection(), &cache, 0, 10);
  ASSERT_EQ(d1.samples.size(), 4u);
  const auto ids = d1.content_ids();
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 2u);
  EXPECT_EQ(d1.samples[0].views.horizontal.count, 4u);
  std::size_t cached = 0;
  for (const auto& e : fs::directory_iterator(dir / "cache")) cached += e.path().extension() == ".pcqv";
  EXPECT_EQ(cached, 4u);
  const auto d2 = load_dataset(dir / "manifest.csv", small_projection(), &cache, 0, 10, 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d1.samples[i].views, d2.samples[i].views);
  const auto d3 = load_dataset(dir / "manifest.csv", small_projection(), nullptr, 0, 10);
  EXPECT_EQ(d3.samples[3].views, d1.samples[3].views);
  EXPECT_THROW(load_dataset(dir / "manifest.csv", small_projection(), nullptr, 0, 5), Error);
}
