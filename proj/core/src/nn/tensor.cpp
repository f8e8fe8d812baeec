// SPDX-License-Identifier: Apache-2.0

#include "thzvr/nn/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "thzvr/errors.hpp"

namespace thzvr::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'H', 'Z', 'V', 'R', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("truncated parameter file");
  return v;
}

}  // namespace

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> extents, double fill)
    : shape(std::move(extents)), data(element_count(shape), fill) {}

Eigen::Map<RowMatrix> Tensor::matrix() {
  const auto rows = static_cast<Eigen::Index>(shape.empty() ? 1 : shape[0]);
  return {data.data(), rows, rows == 0 ? 0 : static_cast<Eigen::Index>(data.size()) / rows};
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  const auto rows = static_cast<Eigen::Index>(shape.empty() ? 1 : shape[0]);
  return {data.data(), rows, rows == 0 ? 0 : static_cast<Eigen::Index>(data.size()) / rows};
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor& ParameterTree::add(const std::string& name, std::vector<std::size_t> shape) {
  if (contains(name)) throw ContractError("duplicate parameter: " + name);
  grads_[name] = Tensor(shape);
  return values_[name] = Tensor(std::move(shape));
}

void ParameterTree::set(const std::string& name, Tensor value) {
  grads_[name] = Tensor(value.shape);
  values_[name] = std::move(value);
}

Tensor& ParameterTree::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterTree::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterTree::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterTree::grad(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParameterTree::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_) out.push_back(k);
  return out;
}

std::size_t ParameterTree::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : values_) n += v.size();
  return n;
}

void ParameterTree::zero_grad() {
  for (auto& [_, g] : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

double ParameterTree::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, g] : grads_) s += g.flat().squaredNorm();
  return std::sqrt(s);
}

void ParameterTree::clip_grad_norm(double max_norm) {
  const double n = grad_norm();
  if (n <= max_norm || n == 0.0) return;
  const double scale = max_norm / n;
  for (auto& [_, g] : grads_) g.flat() *= scale;
}

bool ParameterTree::same_structure(const ParameterTree& other) const {
  if (values_.size() != other.values_.size()) return false;
  for (auto a = values_.begin(), b = other.values_.begin(); a != values_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape != b->second.shape) return false;
  }
  return true;
}

void ParameterTree::copy_values_from(const ParameterTree& other) {
  if (!same_structure(other)) throw ContractError("parameter trees differ in structure");
  for (auto& [k, v] : values_) v.data = other.values_.at(k).data;
}

void ParameterTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, values_.size());
  for (const auto& [name, t] : values_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

ParameterTree ParameterTree::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ConfigError("not a parameter file: " + path.string());
  }
  ParameterTree tree;
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw ConfigError("truncated parameter file");
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = get<std::uint64_t>(in);
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)))) {
      throw ConfigError("truncated parameter file");
    }
    tree.set(name, std::move(t));
  }
  return tree;
}

void ParameterTree::save_manifest(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [name, t] : values_) out << name << ' ' << shape_string(t.shape) << ' ' << t.size() << '\n';
}

std::size_t ParameterTree::serialized_bytes() const {
  std::size_t n = sizeof kMagic + 8;
  for (const auto& [name, t] : values_) n += 4 + name.size() + 4 + 8 * t.shape.size() + 8 * t.size();
  return n;
}

}  // namespace thzvr::nn
