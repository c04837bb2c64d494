#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcqa/dataset.hpp"
#include "pcqa/gcn_model.hpp"

namespace pcqa {

struct TrainConfig {
  std::size_t batch_size = 32;  // point clouds per step
  double lr0 = 1e-3;
  std::size_t lr_halve_every = 10;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 20;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  bool augment = true;
  double val_fraction = 0.1;

  void validate() const;
};

/// mean |pred - target|; the subgradient at zero is 0.
template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target);

double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of `params` in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const AdamOptions& opt = {});

template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Var<T>> params, AdamOptions opt = {});
  /// Applies the accumulated gradients; parameters without a gradient are skipped.
  void step(double lr);
  std::size_t steps() const { return state_.empty() ? 0 : state_[0].t; }

 private:
  std::vector<Var<T>> params_;
  std::vector<AdamState<T>> state_;
  AdamOptions opt_;
};

struct FlipDraw {
  bool horizontal = false;
  bool vertical = false;
};

/// Two Bernoulli(0.5) draws per image, horizontal first.
std::vector<FlipDraw> draw_flips(std::size_t n, Rng& rng);

ProjectionGroup augment_flip(const ProjectionGroup& group, Rng& rng);

struct Fold {
  std::vector<std::size_t> train;  // sample indices
  std::vector<std::size_t> test;
};

/// Splits by content: every sample of a content lands in the same test fold.
std::vector<Fold> kfold_split(std::span<const std::string> content_ids, std::size_t k, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // MOS units
  double val_loss = 0.0;
};

std::string log_csv(const std::vector<EpochLog>& log);

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Writes the given samples into [count * N, 3, S, S] tensors per direction,
/// applying `flips` (one per image, horizontal images first) when non-empty.
template <typename T>
void stack_samples(const LabeledDataset& data, std::span<const std::size_t> indices, Tensor<T>& h, Tensor<T>& v,
                   std::span<const FlipDraw> flips = {});

/// Trains on `train_indices`, holding out whole contents for early stopping,
/// and leaves the model at its best-validation parameters.
template <typename T>
TrainResult train(QualityModel<T>& model, const LabeledDataset& data, std::span<const std::size_t> train_indices,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Eval-mode scores in MOS units, evaluated `batch` clouds at a time.
template <typename T>
std::vector<double> predict_samples(QualityModel<T>& model, const LabeledDataset& data,
                                    std::span<const std::size_t> indices, std::size_t batch = 8);

}  // namespace pcqa
