#include "pcqa/gcn_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace pcqa {

void GcnConfig::validate() const {
  if (layer_channels.size() != 4) fail(Errc::InvalidConfig, "gcn needs exactly four layers");
  for (auto c : layer_channels) {
    if (c == 0) fail(Errc::InvalidConfig, "gcn layer channels must be positive");
  }
  if (layer_channels.back() != 1) fail(Errc::InvalidConfig, "last gcn layer must have one channel");
}

void ModelConfig::validate() const {
  backbone.validate();
  gcn.validate();
  projection.validate();
  if (!(theta_deg >= 0.0)) fail(Errc::InvalidConfig, "theta_deg must be non-negative");
  if (attention_reduction == 0) fail(Errc::InvalidConfig, "attention_reduction must be positive");
  if (backbone.kind == BackboneKind::SmallCnn && projection.output_size != backbone.input_size) {
    fail(Errc::InvalidConfig, "projection output_size must equal backbone input_size");
  }
  if (!(target_scale > 0.0) || !std::isfinite(target_scale) || !std::isfinite(target_mean)) {
    fail(Errc::InvalidConfig, "target statistics must be finite with positive scale");
  }
}

std::size_t gcn_weight_count(std::size_t input_dim, const std::vector<std::size_t>& channels) {
  std::size_t total = 0, in = input_dim;
  for (auto c : channels) {
    total += in * c;
    in = c;
  }
  return total;
}

template <typename T>
Var<T> gcn_block(const Var<T>& h, const Var<T>& adj, const Var<T>& weight, BatchNormLayer<T>& bn, BnMode mode) {
  const Shape& hs = h.shape();
  const Shape& as = adj.shape();
  const Shape& ws = weight.shape();
  if (hs.size() < 2 || hs.size() > 3 || as.size() != 2 || as[0] != as[1] || ws.size() != 2 ||
      as[1] != hs[hs.size() - 2] || ws[0] != hs.back()) {
    fail(Errc::ShapeMismatch, "gcn_block shapes do not conform: H " + shape_str(hs) + ", A " + shape_str(as) +
                                  ", W " + shape_str(ws));
  }
  Var<T> z = matmul(matmul(adj, h), weight);
  if (hs.size() == 3) {
    const Shape out = z.shape();
    z = reshape(bn(reshape(z, {out[0] * out[1], out[2]}), mode), out);
  } else {
    z = bn(z, mode);
  }
  return softplus(z);
}

template <typename T>
GcnBranch<T>::GcnBranch(ParameterStore<T>& store, const std::string& name, std::size_t input_dim,
                        const GcnConfig& cfg, Rng& rng) {
  cfg.validate();
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < cfg.layer_channels.size(); ++l) {
    const std::size_t out = cfg.layer_channels[l];
    const std::string layer = name + ".layer" + std::to_string(l + 1);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    weights_.push_back(store.add_parameter(layer + ".weight", uniform_init<T>({in, out}, limit, rng)));
    bn_.emplace_back(store, layer + ".bn", out);
    in = out;
  }
}

template <typename T>
GcnLevels<T> GcnBranch<T>::forward(const Var<T>& nodes, const Var<T>& adj, BnMode mode) {
  GcnLevels<T> out;
  Var<T> h = nodes;
  for (std::size_t l = 0; l < 4; ++l) {
    h = gcn_block(h, adj, weights_[l], bn_[l], mode);
    out[l] = h;
  }
  return out;
}

template <typename T>
FusionHead<T>::FusionHead(ParameterStore<T>& store, const std::string& name, const GcnConfig& cfg,
                          std::size_t n_views, Rng& rng) {
  for (std::size_t l = 0; l < 3; ++l) {
    maps_[l] = LinearLayer<T>(store, name + ".level" + std::to_string(l + 1), cfg.layer_channels[l], 1, rng);
  }
  maps_[3] = LinearLayer<T>(store, name + ".nodes", n_views, 1, rng);
}

template <typename T>
Var<T> FusionHead<T>::forward(const GcnLevels<T>& levels) const {
  const bool single = levels[0].shape().size() == 2;
  GcnLevels<T> h = levels;
  if (single) {
    for (auto& v : h) {
      Shape s = v.shape();
      s.insert(s.begin(), 1);
      v = reshape(v, s);
    }
  }
  const Shape& s4 = h[3].shape();
  if (s4.size() != 3 || s4[2] != 1 || s4[1] != maps_[3].weight.shape()[0]) {
    fail(Errc::ShapeMismatch, "fusion expects last level [G, N, 1] with N = " +
                                  std::to_string(maps_[3].weight.shape()[0]) + ", got " + shape_str(s4));
  }
  std::vector<Var<T>> parts;
  for (std::size_t l = 0; l < 3; ++l) parts.push_back(maps_[l](mean(h[l], {1})));
  parts.push_back(maps_[3](reshape(h[3], {s4[0], s4[1]})));
  parts.push_back(mean(h[3], {1}));
  Var<T> fused = concat(parts, 1);
  return single ? reshape(fused, {5}) : fused;
}

template <typename T>
Tensor<T> images_to_tensor(std::span<const Image* const> images) {
  if (images.empty()) fail(Errc::InvalidArgument, "no images to stack");
  const std::size_t w = images[0]->width, hgt = images[0]->height;
  Tensor<T> out({images.size(), 3, hgt, w});
  const std::size_t plane = w * hgt;
  T* dst = out.raw();
  for (const Image* img : images) {
    if (img->width != w || img->height != hgt) fail(Errc::ShapeMismatch, "images in a batch must share a size");
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(img->pixels[p * 3 + c], 0.0f, 1.0f);
        dst[c * plane + p] = static_cast<T>(std::lround(v * 255.0f)) / T(255);
      }
    }
    dst += 3 * plane;
  }
  return out;
}

std::vector<std::string> view_keys(std::string_view key, ViewDirection dir, std::size_t n) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%c_%02zu", dir == ViewDirection::Horizontal ? 'h' : 'v', i);
    keys.push_back(std::string(key) + buf);
  }
  return keys;
}

namespace {

ModelConfig validated(ModelConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

template <typename T>
QualityModel<T>::QualityModel(ModelConfig cfg)
    : cfg_(validated(std::move(cfg))),
      rng_(cfg_.seed),
      extractor_(store_, cfg_.backbone, cfg_.attention_reduction, rng_) {
  const std::size_t n = cfg_.n_views();
  const std::size_t d = extractor_.feature_dim();
  gcn_h_ = GcnBranch<T>(store_, "gcn_h", d, cfg_.gcn, rng_);
  gcn_v_ = GcnBranch<T>(store_, "gcn_v", d, cfg_.gcn, rng_);
  fusion_h_ = FusionHead<T>(store_, "fusion_h", cfg_.gcn, n, rng_);
  fusion_v_ = FusionHead<T>(store_, "fusion_v", cfg_.gcn, n, rng_);
  head_ = LinearLayer<T>(store_, "head", 10, 1, rng_);
  adj_ = constant(cast_tensor<T>(
      normalize_adjacency(build_adjacency(n, cfg_.projection.rs_deg, cfg_.theta_deg), cfg_.normalization)));
}

template <typename T>
void QualityModel<T>::set_target_stats(double mean, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(mean)) {
    fail(Errc::InvalidArgument, "target statistics must be finite with positive scale");
  }
  cfg_.target_mean = mean;
  cfg_.target_scale = scale;
}

template <typename T>
ForwardTrace<T> QualityModel<T>::forward_nodes(const Var<T>& h_nodes, const Var<T>& v_nodes, BnMode mode) {
  const std::size_t n = cfg_.n_views();
  const std::size_t d = extractor_.feature_dim();
  for (const Var<T>* v : {&h_nodes, &v_nodes}) {
    const Shape& s = v->shape();
    if (s.size() != 3 || s[1] != n || s[2] != d || s[0] != h_nodes.shape()[0]) {
      fail(Errc::ShapeMismatch, "node batches must be [G, " + std::to_string(n) + ", " + std::to_string(d) +
                                    "], got " + shape_str(s));
    }
  }
  ForwardTrace<T> t;
  t.levels_h = gcn_h_.forward(h_nodes, adj_, mode);
  t.levels_v = gcn_v_.forward(v_nodes, adj_, mode);
  t.fused_h = fusion_h_.forward(t.levels_h);
  t.fused_v = fusion_v_.forward(t.levels_v);
  Var<T> q = head_(concat<T>({t.fused_h, t.fused_v}, 1));
  t.score = reshape(q, {h_nodes.shape()[0]});
  return t;
}

template <typename T>
ForwardTrace<T> QualityModel<T>::forward(const Var<T>& h_images, const Var<T>& v_images,
                                         std::span<const std::string> h_keys, std::span<const std::string> v_keys,
                                         BnMode mode) {
  const std::size_t n = cfg_.n_views();
  if (h_images.shape().empty() || h_images.shape() != v_images.shape() || h_images.shape()[0] % n != 0) {
    fail(Errc::ShapeMismatch, "expected matching [G*" + std::to_string(n) + ", 3, S, S] image batches");
  }
  const std::size_t g = h_images.shape()[0] / n;
  std::vector<std::string> keys(h_keys.begin(), h_keys.end());
  keys.insert(keys.end(), v_keys.begin(), v_keys.end());
  Var<T> nodes = extractor_.forward(concat<T>({h_images, v_images}, 0), keys, mode);
  nodes = reshape(nodes, {2 * g, n, extractor_.feature_dim()});
  return forward_nodes(slice(nodes, 0, 0, g), slice(nodes, 0, g, 2 * g), mode);
}

template <typename T>
double QualityModel<T>::predict(const ProjectionGroup& ph, const ProjectionGroup& pv, std::string_view key) {
  const std::size_t n = cfg_.n_views();
  for (const ProjectionGroup* g : {&ph, &pv}) {
    if (std::abs(g->rs_deg - cfg_.projection.rs_deg) > 1e-9 || g->images.size() != n) {
      fail(Errc::ConfigMismatch, "model expects " + std::to_string(n) + " views at rs=" +
                                     std::to_string(cfg_.projection.rs_deg) + ", got " +
                                     std::to_string(g->images.size()) + " at rs=" + std::to_string(g->rs_deg));
    }
  }
  NoGradGuard guard;
  auto stack = [](const ProjectionGroup& g) {
    std::vector<const Image*> ptrs;
    for (const auto& im : g.images) ptrs.push_back(&im);
    return constant(images_to_tensor<T>(ptrs));
  };
  std::vector<std::string> hk, vk;
  if (cfg_.backbone.kind == BackboneKind::FeatureMaps) {
    hk = view_keys(key, ViewDirection::Horizontal, n);
    vk = view_keys(key, ViewDirection::Vertical, n);
  }
  const ForwardTrace<T> t = forward(stack(ph), stack(pv), hk, vk, BnMode::Eval);
  const double raw = static_cast<double>(t.score.value()[0]);
  const double score = cfg_.target_mean + cfg_.target_scale * raw;
  if (!std::isfinite(score)) fail(Errc::NonFiniteLoss, "model produced a non-finite score");
  return score;
}

template <typename T>
ModelDescription QualityModel<T>::describe() const {
  ModelDescription d;
  d.n_views = cfg_.n_views();
  d.feature_dim = cfg_.feature_dim();
  d.backbone = store_.parameter_count("backbone.");
  d.attention = store_.parameter_count("attention");
  d.gcn_weights_per_direction = gcn_weight_count(d.feature_dim, cfg_.gcn.layer_channels);
  d.gcn_batchnorm = store_.parameter_count("gcn_h.") + store_.parameter_count("gcn_v.") -
                    2 * d.gcn_weights_per_direction;
  d.fusion = store_.parameter_count("fusion_");
  d.head = store_.parameter_count("head.");
  d.total = store_.parameter_count();
  return d;
}

template <typename T>
void QualityModel<T>::save(const std::filesystem::path& dir) const {
  save_tensors(store_, dir);
  auto j = detail::to_json(cfg_);
  j["dtype"] = sizeof(T) == 4 ? "float32" : "float64";
  std::ofstream out(dir / "model.json", std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + (dir / "model.json").string());
  out << j.dump(2) << "\n";
}

template <typename T>
std::unique_ptr<QualityModel<T>> QualityModel<T>::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) fail(Errc::IoError, "cannot read " + (dir / "model.json").string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = detail::parse_json(ss.str(), "model.json");
  j.erase("dtype");
  ModelConfig cfg;
  detail::from_json(j, cfg);
  auto model = std::make_unique<QualityModel<T>>(cfg);
  load_tensors(model->store_, dir);
  return model;
}

std::string model_config_to_json(const ModelConfig& cfg) { return detail::to_json(cfg).dump(2); }

ModelConfig model_config_from_json(std::string_view text) {
  ModelConfig cfg;
  detail::from_json(detail::parse_json(text, "model config"), cfg);
  return cfg;
}

#define PCQA_INSTANTIATE(T)                                                                                \
  template Var<T> gcn_block(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormLayer<T>&, BnMode);      \
  template class GcnBranch<T>;                                                                             \
  template class FusionHead<T>;                                                                            \
  template Tensor<T> images_to_tensor(std::span<const Image* const>);                                     \
  template class QualityModel<T>;

PCQA_INSTANTIATE(float)
PCQA_INSTANTIATE(double)

}  // namespace pcqa
