// SPDX-License-Identifier: Apache-2.0

#include "thzvr/nn/optim.hpp"

#include <cmath>

namespace thzvr::nn {

void sgd_step(ParameterTree& params, double lr) {
  for (const auto& name : params.names()) params.value(name).flat() -= lr * params.grad(name).flat();
}

void Adam::step(ParameterTree& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    auto g = params.grad(name).flat();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != g.size()) {
      m = Vector::Zero(g.size());
      v = Vector::Zero(g.size());
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    params.value(name).flat().array() -=
        cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

}  // namespace thzvr::nn
