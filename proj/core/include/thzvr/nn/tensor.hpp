// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace thzvr::nn {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// 32-byte aligned storage so vectorised reductions split the same way wherever a buffer lives;
/// with plain malloc alignment the peeling (and therefore the rounding) depends on the address.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> extents, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  /// View as a rows x cols row-major matrix where rows = shape[0] and cols = the rest.
  Eigen::Map<RowMatrix> matrix();
  Eigen::Map<const RowMatrix> matrix() const;
  Eigen::Map<Vector> flat() { return {data.data(), static_cast<Eigen::Index>(data.size())}; }
  Eigen::Map<const Vector> flat() const { return {data.data(), static_cast<Eigen::Index>(data.size())}; }

  bool all_finite() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

/// Named parameters with parallel gradient buffers. Iteration order is by name.
class ParameterTree {
 public:
  /// Adds a zero-initialised parameter. Throws ContractError on duplicate names.
  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  void set(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t tensor_count() const { return values_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();
  double grad_norm() const;
  /// Rescales all gradients so that their joint L2 norm is at most `max_norm`.
  void clip_grad_norm(double max_norm);

  /// Same names and shapes.
  bool same_structure(const ParameterTree& other) const;
  /// Copies values from `other`; throws ContractError when structures differ.
  void copy_values_from(const ParameterTree& other);

  /// Binary: magic, tensor count, then per tensor name, rank, u64 extents and f64 LE values.
  void save(const std::filesystem::path& path) const;
  static ParameterTree load(const std::filesystem::path& path);
  /// One line per tensor: "name shape elements".
  void save_manifest(const std::filesystem::path& path) const;
  /// Size in bytes of the binary encoding (used to size model exchange payloads).
  std::size_t serialized_bytes() const;

  friend bool operator==(const ParameterTree& a, const ParameterTree& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> grads_;
};

}  // namespace thzvr::nn
