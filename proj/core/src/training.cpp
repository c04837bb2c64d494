#include "pcqa/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pcqa/error.hpp"

namespace pcqa {

void TrainConfig::validate() const {
  if (batch_size == 0 || max_epochs == 0 || lr_halve_every == 0) {
    fail(Errc::InvalidConfig, "batch_size, max_epochs and lr_halve_every must be positive");
  }
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) fail(Errc::InvalidConfig, "lr0 must be positive");
  if (folds < 2) fail(Errc::InvalidConfig, "folds must be at least 2");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail(Errc::InvalidConfig, "val_fraction must be in [0, 1)");
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target) {
  if (pred.size() != target.size()) {
    fail(Errc::LengthMismatch, "l1_loss: " + std::to_string(pred.size()) + " predictions vs " +
                                   std::to_string(target.size()) + " targets");
  }
  if (pred.size() == 0) fail(Errc::LengthMismatch, "l1_loss needs at least one sample");
  const std::size_t n = pred.size();
  const T* p = pred.value().raw();
  const T* t = target.value().raw();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  return make_op<T>("l1_loss", std::move(out), {pred, target}, [n](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(n);
    const Tensor<T>& pv = self.inputs[0]->value;
    const Tensor<T>& tv = self.inputs[1]->value;
    Tensor<T> gp(pv.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const T d = pv[i] - tv[i];
      gp[i] = d > 0 ? g : (d < 0 ? -g : T(0));
    }
    if (self.inputs[1]->requires_grad) {
      Tensor<T> gt(tv.shape());
      for (std::size_t i = 0; i < n; ++i) gt[i] = -gp[i];
      accumulate_grad(*self.inputs[1], std::move(gt));
    }
    accumulate_grad(*self.inputs[0], std::move(gp));
  });
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(0.5, static_cast<double>(epoch / cfg.lr_halve_every));
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const AdamOptions& opt) {
  if (params.size() != grads.size()) fail(Errc::ShapeMismatch, "adam: parameter / gradient sizes differ");
  if (state.m.empty() && state.t == 0) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  if (state.m.size() != params.size()) fail(Errc::ShapeMismatch, "adam: state does not match parameters");
  ++state.t;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    const double v = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    params[i] = static_cast<T>(params[i] - lr * (m / c1) / (std::sqrt(v / c2) + opt.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Var<T>> params, AdamOptions opt)
    : params_(std::move(params)), state_(params_.size()), opt_(opt) {}

template <typename T>
void Adam<T>::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<T>& p = params_[i];
    if (!p.has_grad()) continue;
    Tensor<T>& value = p.mutable_value();
    const Tensor<T>& g = p.grad();
    adam_step<T>(std::span<T>(value.raw(), value.size()), std::span<const T>(g.raw(), g.size()), state_[i], lr,
                 opt_);
  }
}

std::vector<FlipDraw> draw_flips(std::size_t n, Rng& rng) {
  std::vector<FlipDraw> out(n);
  for (auto& f : out) {
    f.horizontal = rng.bernoulli(0.5);
    f.vertical = rng.bernoulli(0.5);
  }
  return out;
}

ProjectionGroup augment_flip(const ProjectionGroup& group, Rng& rng) {
  const auto flips = draw_flips(group.images.size(), rng);
  ProjectionGroup out = group;
  for (std::size_t i = 0; i < flips.size(); ++i) {
    if (flips[i].horizontal) out.images[i] = flip_horizontal(out.images[i]);
    if (flips[i].vertical) out.images[i] = flip_vertical(out.images[i]);
  }
  return out;
}

std::vector<Fold> kfold_split(std::span<const std::string> content_ids, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> contents;
  for (const auto& c : content_ids) {
    if (std::find(contents.begin(), contents.end(), c) == contents.end()) contents.push_back(c);
  }
  if (k < 2) fail(Errc::InvalidArgument, "k-fold needs k >= 2");
  if (k > contents.size()) {
    fail(Errc::TooFewContents, "cannot split " + std::to_string(contents.size()) + " contents into " +
                                   std::to_string(k) + " folds");
  }
  Rng rng(seed);
  for (std::size_t i = contents.size(); i > 1; --i) std::swap(contents[i - 1], contents[rng.below(i)]);
  std::vector<Fold> folds(k);
  for (std::size_t s = 0; s < content_ids.size(); ++s) {
    const auto pos = static_cast<std::size_t>(std::find(contents.begin(), contents.end(), content_ids[s]) -
                                              contents.begin());
    for (std::size_t f = 0; f < k; ++f) (pos % k == f ? folds[f].test : folds[f].train).push_back(s);
  }
  return folds;
}

std::string log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,lr,train_loss,val_loss\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.train_loss, e.val_loss);
    out += buf;
  }
  return out;
}

template <typename T>
void stack_samples(const LabeledDataset& data, std::span<const std::size_t> indices, Tensor<T>& h, Tensor<T>& v,
                   std::span<const FlipDraw> flips) {
  if (indices.empty()) fail(Errc::InvalidArgument, "no samples to stack");
  const PackedGroup& first = data.samples.at(indices[0]).views.horizontal;
  const std::size_t n = first.count, s = first.size, plane = s * s;
  const std::size_t images = indices.size() * n;
  if (!flips.empty() && flips.size() != 2 * images) fail(Errc::LengthMismatch, "one flip draw per image expected");
  h = Tensor<T>({images, 3, s, s});
  v = Tensor<T>({images, 3, s, s});
  std::array<T, 256> lut;
  for (std::size_t i = 0; i < 256; ++i) lut[i] = static_cast<T>(i) / T(255);
  for (std::size_t dir = 0; dir < 2; ++dir) {
    Tensor<T>& dst = dir == 0 ? h : v;
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const PackedViews& pv = data.samples.at(indices[b]).views;
      const PackedGroup& g = dir == 0 ? pv.horizontal : pv.vertical;
      if (g.count != n || g.size != s) fail(Errc::ShapeMismatch, "samples in a batch must share view layout");
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t img = b * n + i;
        const FlipDraw f = flips.empty() ? FlipDraw{} : flips[dir * images + img];
        const std::uint8_t* src = g.image(i);
        T* out = dst.raw() + img * 3 * plane;
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t y = 0; y < s; ++y) {
            const std::size_t sy = f.vertical ? s - 1 - y : y;
            const std::uint8_t* row = src + c * plane + sy * s;
            T* orow = out + c * plane + y * s;
            if (f.horizontal) {
              for (std::size_t x = 0; x < s; ++x) orow[x] = lut[row[s - 1 - x]];
            } else {
              for (std::size_t x = 0; x < s; ++x) orow[x] = lut[row[x]];
            }
          }
        }
      }
    }
  }
}

namespace {

template <typename T>
void batch_keys(const QualityModel<T>& model, const LabeledDataset& data, std::span<const std::size_t> idx,
                std::vector<std::string>& hk, std::vector<std::string>& vk) {
  hk.clear();
  vk.clear();
  if (model.config().backbone.kind != BackboneKind::FeatureMaps) return;
  const std::size_t n = model.config().n_views();
  for (auto i : idx) {
    for (auto& k : view_keys(data.samples[i].id, ViewDirection::Horizontal, n)) hk.push_back(std::move(k));
    for (auto& k : view_keys(data.samples[i].id, ViewDirection::Vertical, n)) vk.push_back(std::move(k));
  }
}

}  // namespace

template <typename T>
std::vector<double> predict_samples(QualityModel<T>& model, const LabeledDataset& data,
                                    std::span<const std::size_t> indices, std::size_t batch) {
  NoGradGuard guard;
  std::vector<double> out;
  out.reserve(indices.size());
  const auto& cfg = model.config();
  Tensor<T> h, v;
  std::vector<std::string> hk, vk;
  for (std::size_t start = 0; start < indices.size(); start += std::max<std::size_t>(1, batch)) {
    const auto chunk = indices.subspan(start, std::min(std::max<std::size_t>(1, batch), indices.size() - start));
    stack_samples(data, chunk, h, v);
    batch_keys(model, data, chunk, hk, vk);
    const auto t = model.forward(constant(std::move(h)), constant(std::move(v)), hk, vk, BnMode::Eval);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.push_back(cfg.target_mean + cfg.target_scale * static_cast<double>(t.score.value()[i]));
    }
  }
  return out;
}

template <typename T>
TrainResult train(QualityModel<T>& model, const LabeledDataset& data, std::span<const std::size_t> train_indices,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_indices.empty()) fail(Errc::InvalidArgument, "training set is empty");
  Rng rng(cfg.seed);

  // hold out whole contents for early stopping
  std::vector<std::string> contents;
  for (auto i : train_indices) {
    const auto& c = data.samples.at(i).content_id;
    if (std::find(contents.begin(), contents.end(), c) == contents.end()) contents.push_back(c);
  }
  for (std::size_t i = contents.size(); i > 1; --i) std::swap(contents[i - 1], contents[rng.below(i)]);
  std::size_t n_val = 0;
  if (contents.size() >= 2 && cfg.val_fraction > 0.0) {
    n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.val_fraction * contents.size())));
    n_val = std::min(n_val, contents.size() - 1);
  }
  std::vector<std::size_t> fit, val;
  for (auto i : train_indices) {
    const auto& c = data.samples[i].content_id;
    const bool held = std::find(contents.begin(), contents.begin() + static_cast<std::ptrdiff_t>(n_val), c) !=
                      contents.begin() + static_cast<std::ptrdiff_t>(n_val);
    (held ? val : fit).push_back(i);
  }
  if (val.empty()) val = fit;

  double mean = 0, var = 0;
  for (auto i : fit) mean += data.samples[i].mos;
  mean /= static_cast<double>(fit.size());
  for (auto i : fit) var += (data.samples[i].mos - mean) * (data.samples[i].mos - mean);
  const double sd = std::sqrt(var / static_cast<double>(fit.size()));
  model.set_target_stats(mean, sd > 1e-12 ? sd : 1.0);
  const double scale = model.config().target_scale;

  ParameterStore<T>& store = model.parameters();
  Adam<T> adam(store.trainable());
  TrainResult result;
  result.best_val_loss = INFINITY;
  auto best = store.snapshot();
  std::size_t since_best = 0;
  std::vector<std::size_t> order = fit;
  Tensor<T> h, v;
  std::vector<std::string> hk, vk;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto chunk = std::span<const std::size_t>(order).subspan(
          start, std::min(cfg.batch_size, order.size() - start));
      std::vector<FlipDraw> flips;
      if (cfg.augment) flips = draw_flips(2 * chunk.size() * model.config().n_views(), rng);
      stack_samples(data, chunk, h, v, flips);
      batch_keys(model, data, chunk, hk, vk);
      Tensor<T> target({chunk.size()});
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        target[i] = static_cast<T>((data.samples[chunk[i]].mos - mean) / scale);
      }
      store.zero_grad();
      const auto t = model.forward(constant(std::move(h)), constant(std::move(v)), hk, vk, BnMode::Train);
      Var<T> loss = l1_loss(t.score, constant(std::move(target)));
      const double lv = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(lv)) {
        fail(Errc::NonFiniteLoss, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(start / cfg.batch_size));
      }
      backward(loss);
      adam.step(lr);
      loss_sum += lv * static_cast<double>(chunk.size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = loss_sum / static_cast<double>(order.size()) * scale;
    const auto pred = predict_samples(model, data, val);
    double val_loss = 0;
    for (std::size_t i = 0; i < val.size(); ++i) val_loss += std::abs(pred[i] - data.samples[val[i]].mos);
    entry.val_loss = val_loss / static_cast<double>(val.size());
    if (!std::isfinite(entry.val_loss)) fail(Errc::NonFiniteLoss, "non-finite validation loss at epoch " + std::to_string(epoch));
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (entry.val_loss < result.best_val_loss) {
      result.best_val_loss = entry.val_loss;
      result.best_epoch = epoch;
      best = store.snapshot();
      since_best = 0;
    } else if (++since_best > cfg.early_stop_patience) {
      break;
    }
  }
  store.restore(best);
  store.zero_grad();
  return result;
}

#define PCQA_INSTANTIATE(T)                                                                                  \
  template Var<T> l1_loss(const Var<T>&, const Var<T>&);                                                     \
  template void adam_step(std::span<T>, std::span<const T>, AdamState<T>&, double, const AdamOptions&);      \
  template class Adam<T>;                                                                                    \
  template void stack_samples(const LabeledDataset&, std::span<const std::size_t>, Tensor<T>&, Tensor<T>&,  \
                              std::span<const FlipDraw>);                                                    \
  template TrainResult train(QualityModel<T>&, const LabeledDataset&, std::span<const std::size_t>,         \
                             const TrainConfig&, const std::function<void(const EpochLog&)>&);               \
  template std::vector<double> predict_samples(QualityModel<T>&, const LabeledDataset&,                      \
                                               std::span<const std::size_t>, std::size_t);

PCQA_INSTANTIATE(float)
PCQA_INSTANTIATE(double)

}  // namespace pcqa
