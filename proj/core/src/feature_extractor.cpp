#include "pcqa/feature_extractor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "pcqa/error.hpp"

namespace pcqa {

void BackboneConfig::validate() const {
  for (auto c : stage_channels) {
    if (c == 0) fail(Errc::InvalidConfig, "backbone stage channels must be positive");
  }
  if (kind == BackboneKind::SmallCnn) {
    if (stem_channels == 0) fail(Errc::InvalidConfig, "stem_channels must be positive");
    if (input_size < 32 || input_size % 32 != 0) {
      fail(Errc::InvalidConfig, "backbone input_size must be a positive multiple of 32");
    }
  }
  if (kind == BackboneKind::FeatureMaps && feature_dir.empty()) {
    fail(Errc::InvalidConfig, "feature-map backbone needs feature_dir");
  }
}

// ---------------------------------------------------------------------------

template <typename T>
SmallCnnBackbone<T>::SmallCnnBackbone(ParameterStore<T>& store, const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const Conv2dOptions down{2, 1};
  stem_ = {Conv2dLayer<T>(store, "backbone.stem.conv", 3, cfg.stem_channels, 3, down, rng),
           BatchNormLayer<T>(store, "backbone.stem.bn", cfg.stem_channels)};
  std::size_t in = cfg.stem_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "backbone.stage" + std::to_string(i + 1);
    const std::size_t out = cfg.stage_channels[i];
    stages_[i] = {Conv2dLayer<T>(store, name + ".conv", in, out, 3, down, rng),
                  BatchNormLayer<T>(store, name + ".bn", out)};
    in = out;
  }
  if (cfg.freeze) store.set_frozen("backbone.", true);
}

template <typename T>
StageFeatures<T> SmallCnnBackbone<T>::forward(const Var<T>& images, std::span<const std::string>, BnMode mode) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != cfg_.input_size || s[3] != cfg_.input_size) {
    fail(Errc::ShapeMismatch, "backbone expects [B, 3, " + std::to_string(cfg_.input_size) + ", " +
                                  std::to_string(cfg_.input_size) + "], got " + shape_str(s));
  }
  Var<T> x = run(stem_, images, mode);
  StageFeatures<T> out;
  x = run(stages_[0], x, mode);
  out.f1 = x;
  x = run(stages_[1], x, mode);
  x = run(stages_[2], x, mode);
  out.f4 = run(stages_[3], x, mode);
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
FeatureMapBackbone<T>::FeatureMapBackbone(const BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

namespace {

template <typename T>
void read_raw(const std::filesystem::path& path, std::size_t count, const std::string& dtype, T* dst) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot read feature map '" + path.string() + "'");
  const std::size_t width = dtype == "float64" ? 8 : 4;
  std::vector<char> raw(count * width);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail(Errc::TruncatedBody, "feature map '" + path.string() + "' is shorter than its declared shape");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 4) {
      float v;
      std::memcpy(&v, raw.data() + 4 * i, 4);
      dst[i] = static_cast<T>(v);
    } else {
      double v;
      std::memcpy(&v, raw.data() + 8 * i, 8);
      dst[i] = static_cast<T>(v);
    }
  }
}

}  // namespace

template <typename T>
StageFeatures<T> FeatureMapBackbone<T>::forward(const Var<T>&, std::span<const std::string> keys, BnMode) {
  if (keys.empty()) fail(Errc::InvalidArgument, "feature-map backbone needs one key per image");
  Shape s1, s4;
  Tensor<T> f1, f4;
  for (std::size_t b = 0; b < keys.size(); ++b) {
    const auto base = cfg_.feature_dir / keys[b];
    std::ifstream side(base.string() + ".json");
    if (!side) fail(Errc::IoError, "missing feature sidecar '" + base.string() + ".json'");
    nlohmann::json meta;
    try {
      side >> meta;
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::IoError, std::string("malformed feature sidecar: ") + e.what());
    }
    const Shape m1 = meta.at("f1").get<Shape>();
    const Shape m4 = meta.at("f4").get<Shape>();
    const std::string dtype = meta.value("dtype", std::string("float32"));
    if (m1.size() != 3 || m4.size() != 3 || m1[0] != cfg_.stage_channels[0] || m4[0] != cfg_.stage_channels[3]) {
      fail(Errc::ShapeMismatch, "feature maps for '" + keys[b] + "' do not match the configured channels");
    }
    if (b == 0) {
      s1 = m1;
      s4 = m4;
      f1 = Tensor<T>({keys.size(), m1[0], m1[1], m1[2]});
      f4 = Tensor<T>({keys.size(), m4[0], m4[1], m4[2]});
    } else if (m1 != s1 || m4 != s4) {
      fail(Errc::ShapeMismatch, "feature maps within one batch must share a shape");
    }
    const std::size_t n1 = shape_numel(m1);
    const std::size_t n4 = shape_numel(m4);
    read_raw(base.string() + ".f1.bin", n1, dtype, f1.raw() + b * n1);
    read_raw(base.string() + ".f4.bin", n4, dtype, f4.raw() + b * n4);
  }
  return {constant(std::move(f1)), constant(std::move(f4))};
}

void write_feature_maps(const std::filesystem::path& dir, const std::string& key, const Tensor<float>& f1,
                        const Tensor<float>& f4) {
  if (f1.rank() != 3 || f4.rank() != 3) fail(Errc::ShapeMismatch, "feature maps must be [C, H, W]");
  std::filesystem::create_directories(dir);
  const auto base = (dir / key).string();
  auto dump = [](const std::string& path, const Tensor<float>& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  };
  dump(base + ".f1.bin", f1);
  dump(base + ".f4.bin", f4);
  std::ofstream side(base + ".json", std::ios::trunc);
  side << nlohmann::json{{"f1", f1.shape()}, {"f4", f4.shape()}, {"dtype", "float32"}}.dump() << "\n";
}

// ---------------------------------------------------------------------------

template <typename T>
AttentionBlock<T>::AttentionBlock(ParameterStore<T>& store, const std::string& name, std::size_t channels,
                                  std::size_t reduction, Rng& rng) {
  const std::size_t reduced = std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction));
  spatial_ = Conv2dLayer<T>(store, name + ".spatial", channels, 1, 1, {}, rng);
  down_ = Conv2dLayer<T>(store, name + ".channel_down", channels, reduced, 1, {}, rng);
  up_ = Conv2dLayer<T>(store, name + ".channel_up", reduced, channels, 1, {}, rng);
}

template <typename T>
Var<T> node_vector(const Var<T>& f1_hat, const Var<T>& f4_hat) {
  if (f1_hat.shape().size() != 4 || f4_hat.shape().size() != 4 || f1_hat.shape()[0] != f4_hat.shape()[0]) {
    fail(Errc::ShapeMismatch, "node_vector needs two [B, C, H, W] maps with the same batch size");
  }
  return concat<T>({mean(f1_hat, {2, 3}), mean(f4_hat, {2, 3})}, 1);
}

template <typename T>
FeatureExtractor<T>::FeatureExtractor(ParameterStore<T>& store, const BackboneConfig& cfg, std::size_t reduction,
                                      Rng& rng) {
  if (cfg.kind == BackboneKind::SmallCnn) {
    backbone_ = std::make_unique<SmallCnnBackbone<T>>(store, cfg, rng);
  } else {
    backbone_ = std::make_unique<FeatureMapBackbone<T>>(cfg);
  }
  att1_ = AttentionBlock<T>(store, "attention1", backbone_->stage1_channels(), reduction, rng);
  att4_ = AttentionBlock<T>(store, "attention4", backbone_->stage4_channels(), reduction, rng);
}

template <typename T>
Var<T> FeatureExtractor<T>::forward(const Var<T>& images, std::span<const std::string> keys, BnMode mode) {
  const StageFeatures<T> f = backbone_->forward(images, keys, mode);
  return node_vector(att1_(f.f1), att4_(f.f4));
}

template class SmallCnnBackbone<float>;
template class SmallCnnBackbone<double>;
template class FeatureMapBackbone<float>;
template class FeatureMapBackbone<double>;
template class AttentionBlock<float>;
template class AttentionBlock<double>;
template class FeatureExtractor<float>;
template class FeatureExtractor<double>;
template Var<float> node_vector(const Var<float>&, const Var<float>&);
template Var<double> node_vector(const Var<double>&, const Var<double>&);

}  // namespace pcqa
