#pragma once

// nlohmann adapters for the config structs; private to the library.

#include <initializer_list>
#include <json.hpp>
#include <string>

#include "pcqa/error.hpp"
#include "pcqa/gcn_model.hpp"

namespace pcqa::detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
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

inline json to_json(const ProjectionConfig& c) {
  return {{"rs_deg", c.rs_deg},
          {"raster_size", c.raster_size},
          {"point_radius", c.point_radius},
          {"white_threshold", c.white_threshold},
          {"output_size", c.output_size}};
}

inline void from_json(const json& j, ProjectionConfig& c) {
  const std::string w = "projection";
  reject_unknown(j, {"rs_deg", "raster_size", "point_radius", "white_threshold", "output_size"}, w);
  read_opt(j, "rs_deg", c.rs_deg, w);
  read_opt(j, "raster_size", c.raster_size, w);
  read_opt(j, "point_radius", c.point_radius, w);
  read_opt(j, "white_threshold", c.white_threshold, w);
  read_opt(j, "output_size", c.output_size, w);
}

inline json to_json(const BackboneConfig& c) {
  return {{"kind", c.kind == BackboneKind::SmallCnn ? "small_cnn" : "feature_maps"},
          {"stage_channels", c.stage_channels},
          {"stem_channels", c.stem_channels},
          {"input_size", c.input_size},
          {"pretrained", c.pretrained},
          {"freeze", c.freeze},
          {"feature_dir", c.feature_dir.string()}};
}

inline void from_json(const json& j, BackboneConfig& c) {
  const std::string w = "backbone";
  reject_unknown(j, {"kind", "stage_channels", "stem_channels", "input_size", "pretrained", "freeze", "feature_dir"},
                 w);
  std::string kind = c.kind == BackboneKind::SmallCnn ? "small_cnn" : "feature_maps";
  read_opt(j, "kind", kind, w);
  if (kind == "small_cnn") {
    c.kind = BackboneKind::SmallCnn;
  } else if (kind == "feature_maps") {
    c.kind = BackboneKind::FeatureMaps;
  } else {
    fail(Errc::InvalidConfig, "backbone kind must be small_cnn or feature_maps");
  }
  read_opt(j, "stage_channels", c.stage_channels, w);
  read_opt(j, "stem_channels", c.stem_channels, w);
  read_opt(j, "input_size", c.input_size, w);
  read_opt(j, "pretrained", c.pretrained, w);
  read_opt(j, "freeze", c.freeze, w);
  std::string dir = c.feature_dir.string();
  read_opt(j, "feature_dir", dir, w);
  c.feature_dir = dir;
}

inline json to_json(const GcnConfig& c) { return {{"layer_channels", c.layer_channels}}; }

inline void from_json(const json& j, GcnConfig& c) {
  reject_unknown(j, {"layer_channels"}, "gcn");
  read_opt(j, "layer_channels", c.layer_channels, "gcn");
}

inline json to_json(const ModelConfig& c) {
  return {{"backbone", to_json(c.backbone)},
          {"gcn", to_json(c.gcn)},
          {"projection", to_json(c.projection)},
          {"theta_deg", c.theta_deg},
          {"normalization", normalization_name(c.normalization)},
          {"attention_reduction", c.attention_reduction},
          {"seed", c.seed},
          {"target_mean", c.target_mean},
          {"target_scale", c.target_scale}};
}

inline void from_json(const json& j, ModelConfig& c) {
  const std::string w = "model";
  reject_unknown(j,
                 {"backbone", "gcn", "projection", "theta_deg", "normalization", "attention_reduction", "seed",
                  "target_mean", "target_scale"},
                 w);
  if (j.contains("backbone")) from_json(j.at("backbone"), c.backbone);
  if (j.contains("gcn")) from_json(j.at("gcn"), c.gcn);
  if (j.contains("projection")) from_json(j.at("projection"), c.projection);
  read_opt(j, "theta_deg", c.theta_deg, w);
  std::string norm = normalization_name(c.normalization);
  read_opt(j, "normalization", norm, w);
  c.normalization = parse_normalization(norm);
  read_opt(j, "attention_reduction", c.attention_reduction, w);
  read_opt(j, "seed", c.seed, w);
  read_opt(j, "target_mean", c.target_mean, w);
  read_opt(j, "target_scale", c.target_scale, w);
}

inline json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::InvalidConfig, "malformed " + what + ": " + e.what());
  }
}

}  // namespace pcqa::detail
