// SPDX-License-Identifier: Apache-2.0

#include "thzvr/predictors/viewpoint.hpp"

#include "thzvr/errors.hpp"
#include "thzvr/nn/loss.hpp"
#include "thzvr/nn/optim.hpp"

namespace thzvr::predictors {

nn::ParameterTree fedavg_aggregate(const std::vector<FedClientState>& clients) {
  if (clients.empty()) throw ContractError("fedavg: no clients");
  std::size_t total = 0;
  for (const auto& c : clients) {
    if (!c.params.same_structure(clients.front().params)) throw ContractError("fedavg: client shapes differ");
    total += c.samples;
  }
  if (total == 0) throw ContractError("fedavg: no client holds samples");
  nn::ParameterTree out = clients.front().params;
  for (const auto& name : out.names()) {
    auto acc = out.value(name).flat();
    acc.setZero();
    for (const auto& c : clients) {
      if (c.samples == 0) continue;
      acc += (static_cast<double>(c.samples) / static_cast<double>(total)) * c.params.value(name).flat();
    }
  }
  return out;
}

GruRegressor::GruRegressor(const GruRegressorConfig& cfg, std::uint64_t seed) : cfg_(cfg), net_(seed) {
  if (cfg.window == 0 || cfg.hidden == 0) throw ConfigError("viewpoint GRU window and hidden size must be positive");
  net_.input_sequence(cfg.window, 2).gru(cfg.hidden).dense(1);
}

nn::RowMatrix GruRegressor::encode(const std::deque<double>& history) const {
  const std::size_t n = history.size();
  nn::RowMatrix x(1, static_cast<Eigen::Index>(2 * cfg_.window));
  for (std::size_t t = 0; t < cfg_.window; ++t) {
    const std::size_t at = n - cfg_.window + t;
    x(0, static_cast<Eigen::Index>(2 * t)) = history[at] / cfg_.angle_scale;
    x(0, static_cast<Eigen::Index>(2 * t + 1)) = (history[at] - history[at - 1]) / cfg_.delta_scale;
  }
  return x;
}

double GruRegressor::predict(const std::deque<double>& history) const {
  if (!ready(history)) return history.empty() ? 0.0 : history.back();
  return history.back() + cfg_.delta_scale * net_.forward(encode(history))(0, 0);
}

std::vector<double> GruRegressor::predict_batch(const std::vector<const std::deque<double>*>& histories) const {
  std::vector<double> out(histories.size());
  std::vector<std::size_t> ready_idx;
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (ready(*histories[i])) ready_idx.push_back(i);
    else out[i] = histories[i]->empty() ? 0.0 : histories[i]->back();
  }
  if (ready_idx.empty()) return out;
  nn::RowMatrix x(static_cast<Eigen::Index>(ready_idx.size()), static_cast<Eigen::Index>(2 * cfg_.window));
  for (std::size_t r = 0; r < ready_idx.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = encode(*histories[ready_idx[r]]);
  const nn::RowMatrix y = net_.forward(x);
  for (std::size_t r = 0; r < ready_idx.size(); ++r) {
    out[ready_idx[r]] = histories[ready_idx[r]]->back() + cfg_.delta_scale * y(static_cast<Eigen::Index>(r), 0);
  }
  return out;
}

double GruRegressor::sgd_update(const std::vector<const std::deque<double>*>& histories,
                                const std::vector<double>& actual, double lr) {
  std::vector<std::size_t> ready_idx;
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (ready(*histories[i])) ready_idx.push_back(i);
  }
  if (ready_idx.empty()) return 0.0;
  const auto rows = static_cast<Eigen::Index>(ready_idx.size());
  nn::RowMatrix x(rows, static_cast<Eigen::Index>(2 * cfg_.window));
  nn::RowMatrix target(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& h = *histories[ready_idx[static_cast<std::size_t>(r)]];
    x.row(r) = encode(h);
    target(r, 0) = (actual[ready_idx[static_cast<std::size_t>(r)]] - h.back()) / cfg_.delta_scale;
  }
  net_.params().zero_grad();
  const auto lg = nn::mse_grad(net_.forward_train(x), target);
  net_.backward(lg.grad);
  nn::sgd_step(net_.params(), lr);
  return lg.loss;
}

ViewpointLearner::ViewpointLearner(const ViewpointLearnerConfig& cfg, std::size_t users, std::uint64_t seed)
    : cfg_(cfg), global_(cfg.model, seed), histories_(users), sample_counts_(users, 0) {
  if (cfg.local_steps == 0) throw ConfigError("viewpoint local_steps must be >= 1");
  if (!(cfg.lr >= 0)) throw ConfigError("viewpoint learning rate must be >= 0");
}

std::vector<double> ViewpointLearner::predict() const {
  std::vector<const std::deque<double>*> hs;
  for (const auto& h : histories_) hs.push_back(&h);
  return global_.predict_batch(hs);
}

void ViewpointLearner::observe(const std::vector<double>& actual) {
  if (actual.size() != histories_.size()) throw ContractError("viewpoint observe: user count mismatch");
  if (cfg_.mode == ViewpointMode::Centralized) {
    std::vector<const std::deque<double>*> hs;
    for (const auto& h : histories_) hs.push_back(&h);
    for (std::size_t s = 0; s < cfg_.local_steps; ++s) global_.sgd_update(hs, actual, cfg_.lr);
  } else {
    std::vector<FedClientState> clients;
    for (std::size_t k = 0; k < histories_.size(); ++k) {
      if (!global_.ready(histories_[k])) continue;
      GruRegressor local = global_;
      for (std::size_t s = 0; s < cfg_.local_steps; ++s) local.sgd_update({&histories_[k]}, {actual[k]}, cfg_.lr);
      clients.push_back({std::move(local.params()), ++sample_counts_[k]});
    }
    if (!clients.empty()) global_.params().copy_values_from(fedavg_aggregate(clients));
  }
  for (std::size_t k = 0; k < histories_.size(); ++k) {
    histories_[k].push_back(actual[k]);
    if (histories_[k].size() > cfg_.model.window + 1) histories_[k].pop_front();
  }
}

double ViewpointLearner::model_payload_bits() const {
  return 32.0 * static_cast<double>(global_.params().parameter_count());
}

}  // namespace thzvr::predictors
