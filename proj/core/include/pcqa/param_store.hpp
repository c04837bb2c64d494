#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pcqa/autograd.hpp"

namespace pcqa {

/// Ordered registry of named model tensors. Parameters are trainable leaves;
/// buffers (BatchNorm running statistics) are saved with the model but never
/// receive gradients.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool is_parameter = true;
  };

  Var<T> add_parameter(const std::string& name, Tensor<T> init);
  Var<T> add_buffer(const std::string& name, Tensor<T> init);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const Entry* find(std::string_view name) const;

  /// Parameters currently marked requires_grad.
  std::vector<Var<T>> trainable() const;
  /// Scalar count over all parameters (frozen ones included, buffers excluded).
  std::size_t parameter_count() const;
  std::size_t parameter_count(std::string_view prefix) const;

  void zero_grad();
  void set_frozen(std::string_view prefix, bool frozen);

  std::vector<Tensor<T>> snapshot() const;
  void restore(const std::vector<Tensor<T>>& values);

 private:
  std::vector<Entry> entries_;
};

/// Writes `manifest.json` (ordered [{name, shape, dtype}]) and `weights.bin`
/// (little-endian raw scalars in manifest order) into `dir`.
template <typename T>
void save_tensors(const ParameterStore<T>& store, const std::filesystem::path& dir);

/// Loads a directory written by save_tensors into an identically laid-out
/// store; float32/float64 data converts to T. Throws ConfigMismatch when
/// names or shapes disagree.
template <typename T>
void load_tensors(ParameterStore<T>& store, const std::filesystem::path& dir);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace pcqa
