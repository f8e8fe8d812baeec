// SPDX-License-Identifier: Apache-2.0

#include "thzvr/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "thzvr/nn/loss.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::nn {

GradCheckReport grad_check(ParameterTree& params, const std::function<double()>& loss,
                           const std::function<void()>& backprop, double tol, std::size_t max_per_tensor,
                           double step) {
  GradCheckReport report;
  report.tolerance = tol;
  backprop();
  for (const auto& name : params.names()) {
    auto& value = params.value(name).data;
    const auto& grad = params.grad(name).data;
    const std::size_t stride = std::max<std::size_t>(1, value.size() / std::max<std::size_t>(1, max_per_tensor));
    for (std::size_t i = 0; i < value.size(); i += stride) {
      const double saved = value[i];
      value[i] = saved + step;
      const double up = loss();
      value[i] = saved - step;
      const double down = loss();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport grad_check_mse(Sequential& model, const RowMatrix& x, const RowMatrix& target, double tol,
                               std::size_t max_per_tensor) {
  return grad_check(
      model.params(), [&] { return mse(model.forward(x), target); },
      [&] {
        model.params().zero_grad();
        model.backward(mse_grad(model.forward_train(x), target).grad);
      },
      tol, max_per_tensor);
}

GradCheckReport grad_check_ce(Sequential& model, const RowMatrix& x, const std::vector<int>& labels, double tol,
                              std::size_t max_per_tensor) {
  return grad_check(
      model.params(), [&] { return softmax_cross_entropy(model.forward(x), labels).loss; },
      [&] {
        model.params().zero_grad();
        model.backward(softmax_cross_entropy(model.forward_train(x), labels).grad);
      },
      tol, max_per_tensor);
}

namespace {

RowMatrix gaussian_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

std::vector<NamedGradCheck> grad_check_suite(double tol, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NamedGradCheck> out;
  {
    Sequential net(rng());
    net.input_features(5).dense(7).relu().dense(3);
    out.push_back({"dense+relu", grad_check_mse(net, gaussian_rows(4, 5, rng), gaussian_rows(4, 3, rng), tol)});
  }
  {
    Sequential net(rng());
    net.input_image(5, 5, 2).conv2d(3).relu().conv2d(2).maxpool2x2().dense(4).relu().dense(2);
    out.push_back({"conv+maxpool", grad_check_ce(net, gaussian_rows(3, 50, rng), {0, 1, 1}, tol)});
  }
  {
    Sequential net(rng());
    net.input_sequence(5, 3).gru(6).dense(2);
    out.push_back({"gru", grad_check_mse(net, gaussian_rows(3, 15, rng), gaussian_rows(3, 2, rng), tol)});
  }
  {
    Sequential net(rng());
    net.input_sequence(5, 4).lstm(5).dense(4);
    out.push_back({"lstm", grad_check_ce(net, gaussian_rows(3, 20, rng), {3, 0, 2}, tol)});
  }
  return out;
}

}  // namespace thzvr::nn
