// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <cstdint>
#include <string>
#include <vector>

#include "thzvr/nn/layers.hpp"

namespace thzvr::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares analytic gradients against central differences.
///
/// `loss` evaluates the objective at the current parameter values; `backprop` must zero and then
/// fill params' gradients. At most `max_per_tensor` entries of each tensor are probed (evenly
/// strided). Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(ParameterTree& params, const std::function<double()>& loss,
                           const std::function<void()>& backprop, double tol,
                           std::size_t max_per_tensor = 64, double step = 1e-5);

/// Convenience wrapper over a Sequential with an MSE head.
GradCheckReport grad_check_mse(Sequential& model, const RowMatrix& x, const RowMatrix& target, double tol,
                               std::size_t max_per_tensor = 64);

/// Convenience wrapper over a Sequential with a softmax cross-entropy head.
GradCheckReport grad_check_ce(Sequential& model, const RowMatrix& x, const std::vector<int>& labels, double tol,
                              std::size_t max_per_tensor = 64);

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

/// Seeded checks covering every layer type and both recurrent cells: dense, relu, conv, maxpool,
/// GRU and LSTM (the recurrent ones through several BPTT steps).
std::vector<NamedGradCheck> grad_check_suite(double tol = 1e-4, std::uint64_t seed = 1);

}  // namespace thzvr::nn
