#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcqa/layers.hpp"

namespace pcqa {

enum class BackboneKind {
  SmallCnn,     // 4-stage CNN trained with the rest of the model
  FeatureMaps,  // stage-1 / stage-4 maps exported by an external network
};

struct BackboneConfig {
  BackboneKind kind = BackboneKind::SmallCnn;
  std::array<std::size_t, 4> stage_channels{16, 32, 64, 128};
  std::size_t stem_channels = 8;
  std::size_t input_size = 224;
  bool pretrained = false;  // reserved; no bundled weights
  bool freeze = false;
  std::filesystem::path feature_dir;  // FeatureMaps only

  void validate() const;
};

template <typename T>
struct StageFeatures {
  Var<T> f1;  // [B, C1, S/4, S/4]
  Var<T> f4;  // [B, C4, S/32, S/32]
};

/// Source of the stage-1 and stage-4 feature maps for a batch of views.
/// `keys` name each image (used by backbones that read from disk).
template <typename T>
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual StageFeatures<T> forward(const Var<T>& images, std::span<const std::string> keys, BnMode mode) = 0;
  virtual std::size_t stage1_channels() const = 0;
  virtual std::size_t stage4_channels() const = 0;
};

/// Stem conv (stride 2) followed by four conv3x3/stride-2 -> BN -> ReLU stages.
template <typename T>
class SmallCnnBackbone final : public Backbone<T> {
 public:
  SmallCnnBackbone(ParameterStore<T>& store, const BackboneConfig& cfg, Rng& rng);

  StageFeatures<T> forward(const Var<T>& images, std::span<const std::string> keys, BnMode mode) override;
  std::size_t stage1_channels() const override { return cfg_.stage_channels[0]; }
  std::size_t stage4_channels() const override { return cfg_.stage_channels[3]; }

 private:
  struct Stage {
    Conv2dLayer<T> conv;
    BatchNormLayer<T> bn;
  };
  Var<T> run(Stage& s, const Var<T>& x, BnMode mode) { return relu(s.bn(s.conv(x), mode)); }

  BackboneConfig cfg_;
  Stage stem_;
  std::array<Stage, 4> stages_;
};

/// Reads `{key}.f1.bin` / `{key}.f4.bin` (raw little-endian scalars) with the
/// shapes declared in the sidecar `{key}.json`:
///   {"f1": [C1, H1, W1], "f4": [C4, H4, W4], "dtype": "float32"}
template <typename T>
class FeatureMapBackbone final : public Backbone<T> {
 public:
  explicit FeatureMapBackbone(const BackboneConfig& cfg);

  StageFeatures<T> forward(const Var<T>& images, std::span<const std::string> keys, BnMode mode) override;
  std::size_t stage1_channels() const override { return cfg_.stage_channels[0]; }
  std::size_t stage4_channels() const override { return cfg_.stage_channels[3]; }

 private:
  BackboneConfig cfg_;
};

/// Writes one image's feature maps in the FeatureMapBackbone layout.
void write_feature_maps(const std::filesystem::path& dir, const std::string& key, const Tensor<float>& f1,
                        const Tensor<float>& f4);

/// rescale = (spatial map x channel map) * F + F
template <typename T>
Var<T> attentive_combine(const Var<T>& f, const Var<T>& spatial, const Var<T>& channel) {
  return (spatial * channel) * f + f;
}

/// Spatial gate sigmoid(conv1x1(F)) and channel gate
/// sigmoid(up(down(avg(F)))) applied to F with a residual connection.
template <typename T>
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(ParameterStore<T>& store, const std::string& name, std::size_t channels, std::size_t reduction,
                 Rng& rng);

  /// [B, C, H, W] -> [B, 1, H, W], entries in (0, 1).
  Var<T> spatial_attention(const Var<T>& f) const { return sigmoid(spatial_(f)); }
  /// [B, C, H, W] -> [B, C, 1, 1], entries in (0, 1).
  Var<T> channel_attention(const Var<T>& f) const { return sigmoid(up_(down_(mean(f, {2, 3}, true)))); }

  Var<T> operator()(const Var<T>& f) const {
    return attentive_combine(f, spatial_attention(f), channel_attention(f));
  }

  Conv2dLayer<T>& spatial_conv() { return spatial_; }
  Conv2dLayer<T>& channel_down() { return down_; }
  Conv2dLayer<T>& channel_up() { return up_; }

 private:
  Conv2dLayer<T> spatial_;
  Conv2dLayer<T> down_;
  Conv2dLayer<T> up_;
};

/// Global average of both attentive maps, concatenated: [B, C1 + C4].
template <typename T>
Var<T> node_vector(const Var<T>& f1_hat, const Var<T>& f4_hat);

/// Backbone + per-level attention + multi-level conversion.
template <typename T>
class FeatureExtractor {
 public:
  FeatureExtractor(ParameterStore<T>& store, const BackboneConfig& cfg, std::size_t reduction, Rng& rng);

  /// images [B, 3, S, S] -> node vectors [B, D].
  Var<T> forward(const Var<T>& images, std::span<const std::string> keys, BnMode mode);

  std::size_t feature_dim() const { return backbone_->stage1_channels() + backbone_->stage4_channels(); }
  Backbone<T>& backbone() { return *backbone_; }

 private:
  std::unique_ptr<Backbone<T>> backbone_;
  AttentionBlock<T> att1_;
  AttentionBlock<T> att4_;
};

}  // namespace pcqa
