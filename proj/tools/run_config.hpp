#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "pcqa/gcn_model.hpp"
#include "pcqa/training.hpp"

namespace pcqa::cli {

/// Everything a training run needs, loadable from one JSON file:
///
///   {"model": {...model.json layout...},
///    "train": {"batch_size": 8, "lr0": 1e-3, ...},
///    "data": {"manifest": "synth/manifest.csv", "mos_min": 0, "mos_max": 10, "cache_dir": ""},
///    "seed": 0}
///
/// Unknown keys anywhere are InvalidConfig. A top-level seed, when present,
/// seeds both the model initialisation and the training RNG.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path manifest;
  double mos_min = 0.0;
  double mos_max = 10.0;
  std::filesystem::path cache_dir;  // empty: ViewCache::default_dir()
  std::optional<std::uint64_t> seed;

  void apply_seed(std::uint64_t s) {
    seed = s;
    model.seed = s;
    train.seed = s;
  }

  void validate() const;
};

RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved form, every default spelled out.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace pcqa::cli
