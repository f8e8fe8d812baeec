// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "thzvr/nn/tensor.hpp"

namespace thzvr::nn {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossGrad {
  double loss = 0.0;
  RowMatrix grad;  // d loss / d input, same shape as the input
};

/// Row-wise softmax (max-shifted).
RowMatrix softmax(const RowMatrix& logits);

/// Mean over rows of the summed squared error of each row: (1/B) sum_b sum_j (p - t)^2.
double mse(const RowMatrix& pred, const RowMatrix& target);
LossGrad mse_grad(const RowMatrix& pred, const RowMatrix& target);

/// -log(max(p[label], 1e-12)) averaged over rows.
double cross_entropy(const RowMatrix& probs, const std::vector<int>& labels);

/// Softmax followed by cross-entropy; the gradient is taken with respect to the logits.
LossGrad softmax_cross_entropy(const RowMatrix& logits, const std::vector<int>& labels);

}  // namespace thzvr::nn
