#include "run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>

#include "pcqa/error.hpp"

namespace pcqa::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(Errc::InvalidConfig, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(Errc::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read_opt(const json& j, const char* key, V& dst, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    dst = it->get<V>();
  } catch (const json::exception&) {
    fail(Errc::InvalidConfig, "bad value for '" + std::string(key) + "' in " + where);
  }
}

json train_to_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"lr0", t.lr0},
          {"lr_halve_every", t.lr_halve_every},
          {"max_epochs", t.max_epochs},
          {"early_stop_patience", t.early_stop_patience},
          {"seed", t.seed},
          {"folds", t.folds},
          {"augment", t.augment},
          {"val_fraction", t.val_fraction}};
}

void train_from_json(const json& j, TrainConfig& t) {
  const std::string w = "train";
  reject_unknown(j,
                 {"batch_size", "lr0", "lr_halve_every", "max_epochs", "early_stop_patience", "seed", "folds",
                  "augment", "val_fraction"},
                 w);
  read_opt(j, "batch_size", t.batch_size, w);
  read_opt(j, "lr0", t.lr0, w);
  read_opt(j, "lr_halve_every", t.lr_halve_every, w);
  read_opt(j, "max_epochs", t.max_epochs, w);
  read_opt(j, "early_stop_patience", t.early_stop_patience, w);
  read_opt(j, "seed", t.seed, w);
  read_opt(j, "folds", t.folds, w);
  read_opt(j, "augment", t.augment, w);
  read_opt(j, "val_fraction", t.val_fraction, w);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(mos_max > mos_min)) fail(Errc::InvalidConfig, "mos_max must exceed mos_min");
}

RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed run config: ") + e.what());
  }
  reject_unknown(j, {"model", "train", "data", "seed"}, "run config");
  RunConfig cfg;
  if (j.contains("model")) cfg.model = model_config_from_json(j.at("model").dump());
  if (j.contains("train")) train_from_json(j.at("train"), cfg.train);
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"manifest", "mos_min", "mos_max", "cache_dir"}, "data");
    std::string manifest, cache;
    read_opt(d, "manifest", manifest, "data");
    read_opt(d, "cache_dir", cache, "data");
    read_opt(d, "mos_min", cfg.mos_min, "data");
    read_opt(d, "mos_max", cfg.mos_max, "data");
    // relative paths are taken from the config file's directory
    auto resolve = [&](const std::string& p) {
      const std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    if (!manifest.empty()) cfg.manifest = resolve(manifest);
    if (!cache.empty()) cfg.cache_dir = resolve(cache);
  }
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    read_opt(j, "seed", s, "run config");
    cfg.apply_seed(s);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = json::parse(model_config_to_json(cfg.model));
  j["train"] = train_to_json(cfg.train);
  j["data"] = {{"manifest", cfg.manifest.string()},
               {"mos_min", cfg.mos_min},
               {"mos_max", cfg.mos_max},
               {"cache_dir", cfg.cache_dir.string()}};
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j.dump(2);
}

}  // namespace pcqa::cli
