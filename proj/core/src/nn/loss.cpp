// SPDX-License-Identifier: Apache-2.0

#include "thzvr/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "thzvr/errors.hpp"

namespace thzvr::nn {
namespace {

void check_labels(const RowMatrix& m, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != m.rows()) throw ContractError("label count != batch size");
  for (int l : labels) {
    if (l < 0 || l >= m.cols()) throw ContractError("label out of range");
  }
}

}  // namespace

RowMatrix softmax(const RowMatrix& logits) {
  RowMatrix out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

double mse(const RowMatrix& pred, const RowMatrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ContractError("mse: shape mismatch");
  if (pred.rows() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.rows());
}

LossGrad mse_grad(const RowMatrix& pred, const RowMatrix& target) {
  LossGrad out;
  out.loss = mse(pred, target);
  out.grad = 2.0 * (pred - target) / static_cast<double>(std::max<Eigen::Index>(1, pred.rows()));
  return out;
}

double cross_entropy(const RowMatrix& probs, const std::vector<int>& labels) {
  check_labels(probs, labels);
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    s -= std::log(std::max(probs(static_cast<Eigen::Index>(b), labels[b]), kProbabilityFloor));
  }
  return s / static_cast<double>(labels.size());
}

LossGrad softmax_cross_entropy(const RowMatrix& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  LossGrad out;
  const RowMatrix p = softmax(logits);
  out.loss = cross_entropy(p, labels);
  out.grad = p;
  for (std::size_t b = 0; b < labels.size(); ++b) out.grad(static_cast<Eigen::Index>(b), labels[b]) -= 1.0;
  out.grad /= static_cast<double>(std::max<std::size_t>(1, labels.size()));
  return out;
}

}  // namespace thzvr::nn
