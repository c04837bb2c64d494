#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcqa/projection.hpp"

namespace pcqa {

/// One direction group stored as 8-bit [count, 3, size, size], channel-major.
struct PackedGroup {
  std::size_t count = 0;
  std::size_t size = 0;
  double rs_deg = 36.0;
  ViewDirection direction = ViewDirection::Horizontal;
  std::vector<std::uint8_t> data;

  static PackedGroup pack(const ProjectionGroup& g);
  ProjectionGroup unpack() const;
  const std::uint8_t* image(std::size_t i) const { return data.data() + i * 3 * size * size; }
  bool operator==(const PackedGroup&) const = default;
};

struct PackedViews {
  PackedGroup horizontal;
  PackedGroup vertical;
  bool operator==(const PackedViews&) const = default;
};

PackedViews pack_views(const ViewGroups& v);

/// Content-addressed store of rendered views keyed by (cloud, projection config).
class ViewCache {
 public:
  explicit ViewCache(std::filesystem::path dir);

  /// $PCQ_CACHE_DIR, else $XDG_CACHE_HOME/pcqa, else ~/.cache/pcqa.
  static std::filesystem::path default_dir();

  std::filesystem::path entry_path(const PointCloud& pc, const ProjectionConfig& cfg) const;
  std::optional<PackedViews> find(const PointCloud& pc, const ProjectionConfig& cfg) const;
  void store(const PointCloud& pc, const ProjectionConfig& cfg, const PackedViews& views) const;
  PackedViews get_or_render(const PointCloud& pc, const ProjectionConfig& cfg, unsigned threads = 1) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Stable hash of every field that changes the rendered pixels.
std::uint64_t projection_config_hash(const ProjectionConfig& cfg);

void write_packed_views(const std::filesystem::path& path, const PackedViews& views);
/// nullopt when the file is missing or malformed.
std::optional<PackedViews> read_packed_views(const std::filesystem::path& path);

struct ManifestEntry {
  std::string content_id;
  std::filesystem::path path;  // resolved against the manifest's directory
  double mos = 0.0;

  /// Sample id: the file stem.
  std::string id() const { return path.stem().string(); }
};

/// CSV with header `content_id,path,mos`.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& csv);
void save_manifest(const std::filesystem::path& csv, const std::vector<ManifestEntry>& entries);

/// Two-column CSV `id,<column>` with a header row.
std::vector<std::pair<std::string, double>> load_score_csv(const std::filesystem::path& csv);
void save_score_csv(const std::filesystem::path& csv, const std::string& column,
                    const std::vector<std::pair<std::string, double>>& rows);

struct LabeledSample {
  std::string id;
  std::string content_id;
  double mos = 0.0;
  PackedViews views;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  double mos_min = 0.0;
  double mos_max = 10.0;

  std::vector<std::string> content_ids() const;
  /// Throws InvalidArgument unless every MOS is finite and within range.
  void validate() const;
};

/// Loads every cloud of a manifest and attaches its (cached) views.
LabeledDataset load_dataset(const std::filesystem::path& manifest, const ProjectionConfig& cfg,
                            const ViewCache* cache, double mos_min, double mos_max, unsigned threads = 1);

struct SynthOptions {
  std::size_t n_contents = 12;
  std::vector<double> noise_levels{0.0, 0.01, 0.02, 0.03, 0.04};
  std::size_t points = 60000;
  double mos_max = 10.0;
  std::uint64_t seed = 0;
};

/// Pristine shapes with random anisotropic scale and orientation, each
/// distorted by geometry noise at every level. Writes `clouds/*.ply`,
/// `manifest.csv` and `mos.csv`; MOS = mos_max (1 - sigma / max sigma).
std::vector<ManifestEntry> synth_dataset(const std::filesystem::path& out_dir, const SynthOptions& opt);

}  // namespace pcqa
