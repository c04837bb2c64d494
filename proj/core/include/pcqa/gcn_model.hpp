#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcqa/feature_extractor.hpp"
#include "pcqa/graph_builder.hpp"
#include "pcqa/projection.hpp"

namespace pcqa {

struct GcnConfig {
  std::vector<std::size_t> layer_channels{512, 128, 32, 1};

  /// Exactly four layers, all positive, the last one with a single channel.
  void validate() const;
};

struct ModelConfig {
  BackboneConfig backbone;
  GcnConfig gcn;
  ProjectionConfig projection;
  double theta_deg = 36.0;
  AdjacencyNormalization normalization = AdjacencyNormalization::Symmetric;
  std::size_t attention_reduction = 4;
  std::uint64_t seed = 0;
  // The network regresses (mos - target_mean) / target_scale.
  double target_mean = 0.0;
  double target_scale = 1.0;

  std::size_t n_views() const { return view_count(projection.rs_deg); }
  std::size_t feature_dim() const { return backbone.stage_channels[0] + backbone.stage_channels[3]; }
  void validate() const;
};

/// softplus(BN(Â H W)). H is [N, C_in] or [G, N, C_in]; BN statistics run
/// over every node of every graph in the batch.
template <typename T>
Var<T> gcn_block(const Var<T>& h, const Var<T>& adj, const Var<T>& weight, BatchNormLayer<T>& bn, BnMode mode);

template <typename T>
using GcnLevels = std::array<Var<T>, 4>;

/// Four stacked gcn_blocks for one direction group.
template <typename T>
class GcnBranch {
 public:
  GcnBranch() = default;
  GcnBranch(ParameterStore<T>& store, const std::string& name, std::size_t input_dim, const GcnConfig& cfg,
            Rng& rng);

  GcnLevels<T> forward(const Var<T>& nodes, const Var<T>& adj, BnMode mode);

  std::vector<Var<T>>& weights() { return weights_; }

 private:
  std::vector<Var<T>> weights_;
  std::vector<BatchNormLayer<T>> bn_;
};

/// Per-direction summary: [L1(avg H1), L2(avg H2), L3(avg H3), L4(H4), avg H4].
template <typename T>
class FusionHead {
 public:
  FusionHead() = default;
  FusionHead(ParameterStore<T>& store, const std::string& name, const GcnConfig& cfg, std::size_t n_views,
             Rng& rng);

  /// Levels [G, N, C_l] (or [N, C_l]) -> [G, 5] (or [5]).
  Var<T> forward(const GcnLevels<T>& levels) const;

  std::array<LinearLayer<T>, 4>& maps() { return maps_; }

 private:
  std::array<LinearLayer<T>, 4> maps_;
};

template <typename T>
struct ForwardTrace {
  GcnLevels<T> levels_h, levels_v;
  Var<T> fused_h, fused_v;  // [G, 5]
  Var<T> score;             // [G], standardized units
};

struct ModelDescription {
  std::size_t n_views = 0;
  std::size_t feature_dim = 0;
  std::size_t backbone = 0;
  std::size_t attention = 0;
  std::size_t gcn_weights_per_direction = 0;
  std::size_t gcn_batchnorm = 0;
  std::size_t fusion = 0;
  std::size_t head = 0;
  std::size_t total = 0;
};

/// Parameter arithmetic for the GCN weights of one direction.
std::size_t gcn_weight_count(std::size_t input_dim, const std::vector<std::size_t>& channels);

/// Stacks RGB images into [count, 3, S, S] (channel-major), quantized to
/// 8 bits so fresh renders and cached views feed identical inputs.
template <typename T>
Tensor<T> images_to_tensor(std::span<const Image* const> images);

template <typename T>
class QualityModel {
 public:
  explicit QualityModel(ModelConfig cfg);
  QualityModel(const QualityModel&) = delete;
  QualityModel& operator=(const QualityModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  void set_target_stats(double mean, double scale);
  ParameterStore<T>& parameters() { return store_; }
  const ParameterStore<T>& parameters() const { return store_; }
  FeatureExtractor<T>& extractor() { return extractor_; }

  /// h_nodes / v_nodes: [G, N, D].
  ForwardTrace<T> forward_nodes(const Var<T>& h_nodes, const Var<T>& v_nodes, BnMode mode);

  /// h_images / v_images: [G*N, 3, S, S], cloud-major. The backbone runs once
  /// over both directions. Keys name each image (may be empty for the CNN).
  ForwardTrace<T> forward(const Var<T>& h_images, const Var<T>& v_images, std::span<const std::string> h_keys,
                          std::span<const std::string> v_keys, BnMode mode);

  /// Eval-mode score in MOS units. Throws ConfigMismatch when the groups were
  /// rendered with a different stride than the model expects.
  double predict(const ProjectionGroup& ph, const ProjectionGroup& pv, std::string_view key = {});

  ModelDescription describe() const;

  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<QualityModel> load(const std::filesystem::path& dir);

 private:
  ModelConfig cfg_;
  ParameterStore<T> store_;
  Rng rng_;
  FeatureExtractor<T> extractor_;
  GcnBranch<T> gcn_h_, gcn_v_;
  FusionHead<T> fusion_h_, fusion_v_;
  LinearLayer<T> head_;
  Var<T> adj_;
};

/// Image keys used by feature-map backbones: "{key}_h_00", "{key}_v_03", ...
std::vector<std::string> view_keys(std::string_view key, ViewDirection dir, std::size_t n);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace pcqa
