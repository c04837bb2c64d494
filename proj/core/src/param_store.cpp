#include "pcqa/param_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "pcqa/error.hpp"

namespace pcqa {

namespace {

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

bool has_prefix(std::string_view name, std::string_view prefix) {
  return name.substr(0, prefix.size()) == prefix;
}

}  // namespace

template <typename T>
Var<T> ParameterStore<T>::add_parameter(const std::string& name, Tensor<T> init) {
  if (find(name)) fail(Errc::InvalidArgument, "duplicate tensor name '" + name + "'");
  Var<T> v(std::move(init), true);
  entries_.push_back({name, v, true});
  return v;
}

template <typename T>
Var<T> ParameterStore<T>::add_buffer(const std::string& name, Tensor<T> init) {
  if (find(name)) fail(Errc::InvalidArgument, "duplicate tensor name '" + name + "'");
  Var<T> v(std::move(init), false);
  entries_.push_back({name, v, false});
  return v;
}

template <typename T>
const typename ParameterStore<T>::Entry* ParameterStore<T>::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename T>
std::vector<Var<T>> ParameterStore<T>::trainable() const {
  std::vector<Var<T>> out;
  for (const auto& e : entries_) {
    if (e.is_parameter && e.var.requires_grad()) out.push_back(e.var);
  }
  return out;
}

template <typename T>
std::size_t ParameterStore<T>::parameter_count() const {
  return parameter_count("");
}

template <typename T>
std::size_t ParameterStore<T>::parameter_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.is_parameter && has_prefix(e.name, prefix)) n += e.var.size();
  }
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

template <typename T>
void ParameterStore<T>::set_frozen(std::string_view prefix, bool frozen) {
  for (auto& e : entries_) {
    if (e.is_parameter && has_prefix(e.name, prefix)) e.var.set_requires_grad(!frozen);
  }
}

template <typename T>
std::vector<Tensor<T>> ParameterStore<T>::snapshot() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var.value());
  return out;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<Tensor<T>>& values) {
  if (values.size() != entries_.size()) fail(Errc::ConfigMismatch, "snapshot does not match the parameter layout");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (values[i].shape() != entries_[i].var.shape()) {
      fail(Errc::ConfigMismatch, "snapshot shape mismatch for '" + entries_[i].name + "'");
    }
    entries_[i].var.mutable_value() = values[i];
  }
}

template <typename T>
void save_tensors(const ParameterStore<T>& store, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::IoError, "cannot create '" + dir.string() + "': " + ec.message());

  nlohmann::json manifest = nlohmann::json::array();
  std::ofstream bin(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!bin) fail(Errc::IoError, "cannot write '" + (dir / "weights.bin").string() + "'");
  for (const auto& e : store.entries()) {
    manifest.push_back({{"name", e.name}, {"shape", e.var.shape()}, {"dtype", dtype_name<T>()}});
    const auto& data = e.var.value().storage();
    if constexpr (std::endian::native == std::endian::little) {
      bin.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    } else {
      for (T v : data) {
        auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        bin.write(bytes.data(), sizeof(T));
      }
    }
  }
  if (!bin) fail(Errc::IoError, "write failed for weights.bin");
  std::ofstream man(dir / "manifest.json", std::ios::trunc);
  if (!man) fail(Errc::IoError, "cannot write '" + (dir / "manifest.json").string() + "'");
  man << manifest.dump(2) << "\n";
}

template <typename T>
void load_tensors(ParameterStore<T>& store, const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.json");
  if (!man) fail(Errc::IoError, "cannot read '" + (dir / "manifest.json").string() + "'");
  nlohmann::json manifest;
  try {
    man >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::IoError, std::string("malformed manifest.json: ") + e.what());
  }
  if (!manifest.is_array() || manifest.size() != store.entries().size()) {
    fail(Errc::ConfigMismatch, "checkpoint tensor list does not match the model layout");
  }
  std::ifstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) fail(Errc::IoError, "cannot read '" + (dir / "weights.bin").string() + "'");

  std::vector<Tensor<T>> values;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& rec = manifest[i];
    const auto& entry = store.entries()[i];
    const std::string name = rec.at("name").get<std::string>();
    const Shape shape = rec.at("shape").get<Shape>();
    const std::string dtype = rec.at("dtype").get<std::string>();
    if (name != entry.name || shape != entry.var.shape()) {
      fail(Errc::ConfigMismatch, "checkpoint tensor '" + name + "' " + shape_str(shape) + " does not match model tensor '" +
                                     entry.name + "' " + shape_str(entry.var.shape()));
    }
    Tensor<T> t(shape);
    const std::size_t width = dtype == "float32" ? 4 : dtype == "float64" ? 8 : 0;
    if (width == 0) fail(Errc::ConfigMismatch, "unsupported dtype '" + dtype + "'");
    std::vector<char> raw(t.size() * width);
    bin.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(bin.gcount()) != raw.size()) fail(Errc::TruncatedBody, "weights.bin is truncated");
    for (std::size_t j = 0; j < t.size(); ++j) {
      char* p = raw.data() + j * width;
      if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + width);
      if (width == 4) {
        float v;
        std::memcpy(&v, p, 4);
        t[j] = static_cast<T>(v);
      } else {
        double v;
        std::memcpy(&v, p, 8);
        t[j] = static_cast<T>(v);
      }
    }
    values.push_back(std::move(t));
  }
  store.restore(values);
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void save_tensors(const ParameterStore<float>&, const std::filesystem::path&);
template void save_tensors(const ParameterStore<double>&, const std::filesystem::path&);
template void load_tensors(ParameterStore<float>&, const std::filesystem::path&);
template void load_tensors(ParameterStore<double>&, const std::filesystem::path&);

}  // namespace pcqa
