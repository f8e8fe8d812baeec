// SPDX-License-Identifier: Apache-2.0

#include "thzvr/predictors/direction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thzvr/errors.hpp"
#include "thzvr/nn/loss.hpp"
#include "thzvr/nn/optim.hpp"

namespace thzvr::predictors {

using geometry::Direction;
using geometry::Position3;

std::optional<Direction> displacement_direction(const Position3& from, const Position3& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (std::abs(dx) < 1e-9 && std::abs(dy) < 1e-9) return std::nullopt;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? Direction::Right : Direction::Left;
  return dy > 0 ? Direction::Up : Direction::Down;
}

DirectionPredictor::DirectionPredictor(const DirectionConfig& cfg, std::uint64_t seed) : cfg_(cfg), net_(seed) {
  if (cfg.window == 0 || cfg.hidden == 0 || cfg.minibatch == 0) {
    throw ConfigError("direction LSTM window, hidden size and minibatch must be positive");
  }
  if (!(cfg.speed > 0) || !(cfg.room_width > 0)) throw ConfigError("direction predictor needs positive speed and room");
  net_.input_sequence(cfg.window, 4).lstm(cfg.hidden).dense(4);
}

nn::RowMatrix DirectionPredictor::encode(const std::deque<Position3>& history) const {
  if (!ready(history)) throw ContractError("direction encode: history shorter than window + 1");
  const std::size_t n = history.size();
  nn::RowMatrix x(1, static_cast<Eigen::Index>(4 * cfg_.window));
  for (std::size_t t = 0; t < cfg_.window; ++t) {
    const Position3& p = history[n - cfg_.window + t];
    const Position3& q = history[n - cfg_.window + t - 1];
    const auto c = static_cast<Eigen::Index>(4 * t);
    x(0, c) = p.x / cfg_.room_width;
    x(0, c + 1) = p.y / cfg_.room_width;
    x(0, c + 2) = (p.x - q.x) / cfg_.speed;
    x(0, c + 3) = (p.y - q.y) / cfg_.speed;
  }
  return x;
}

std::array<double, 4> DirectionPredictor::probabilities(const std::deque<Position3>& history) const {
  if (!ready(history)) return {0.25, 0.25, 0.25, 0.25};
  const nn::RowMatrix p = nn::softmax(net_.forward(encode(history)));
  return {p(0, 0), p(0, 1), p(0, 2), p(0, 3)};
}

nn::RowMatrix DirectionPredictor::probabilities_batch(const std::vector<const std::deque<Position3>*>& histories) const {
  nn::RowMatrix out = nn::RowMatrix::Constant(static_cast<Eigen::Index>(histories.size()), 4, 0.25);
  std::vector<std::size_t> ready_idx;
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (ready(*histories[i])) ready_idx.push_back(i);
  }
  if (ready_idx.empty()) return out;
  nn::RowMatrix x(static_cast<Eigen::Index>(ready_idx.size()), static_cast<Eigen::Index>(4 * cfg_.window));
  for (std::size_t r = 0; r < ready_idx.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = encode(*histories[ready_idx[r]]);
  const nn::RowMatrix p = nn::softmax(net_.forward(x));
  for (std::size_t r = 0; r < ready_idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(ready_idx[r])) = p.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

Position3 DirectionPredictor::step(const Position3& from, std::size_t direction, double speed, double width) {
  Position3 p = from;
  switch (static_cast<Direction>(direction)) {
    case Direction::Up: p.y += speed; break;
    case Direction::Down: p.y -= speed; break;
    case Direction::Left: p.x -= speed; break;
    case Direction::Right: p.x += speed; break;
  }
  p.x = std::clamp(p.x, 0.0, width);
  p.y = std::clamp(p.y, 0.0, width);
  return p;
}

Position3 DirectionPredictor::predict_next(const std::deque<Position3>& history) const {
  if (history.empty()) throw ContractError("predict_next: empty history");
  if (!ready(history)) return history.back();
  const auto p = probabilities(history);
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  return step(history.back(), best, cfg_.speed, cfg_.room_width);
}

std::optional<DirectionSample> DirectionPredictor::make_sample(const std::deque<Position3>& history,
                                                              const Position3& next) const {
  if (!ready(history)) return std::nullopt;
  const auto d = displacement_direction(history.back(), next);
  if (!d) return std::nullopt;
  return DirectionSample{encode(history), static_cast<int>(direction_index(*d))};
}

void DirectionPredictor::remember(DirectionSample sample) {
  replay_.push_back(std::move(sample));
  if (replay_.size() > cfg_.replay_capacity) replay_.pop_front();
}

double DirectionPredictor::train_on(const std::vector<const DirectionSample*>& batch, double lr) {
  if (batch.empty()) return 0.0;
  nn::RowMatrix x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(4 * cfg_.window));
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = batch[i]->features;
    labels.push_back(batch[i]->label);
  }
  net_.params().zero_grad();
  const auto lg = nn::softmax_cross_entropy(net_.forward_train(x), labels);
  net_.backward(lg.grad);
  nn::sgd_step(net_.params(), lr);
  return lg.loss;
}

double DirectionPredictor::train_step(Rng& rng) {
  if (replay_.empty()) return 0.0;
  const std::size_t n = std::min(cfg_.minibatch, replay_.size());
  std::vector<const DirectionSample*> batch;
  if (n == replay_.size()) {
    for (const auto& s : replay_) batch.push_back(&s);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&replay_[pick(rng)]);
  }
  return train_on(batch, cfg_.lr);
}

double DirectionPredictor::loss(const std::vector<DirectionSample>& samples) const {
  if (samples.empty()) return 0.0;
  nn::RowMatrix x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(4 * cfg_.window));
  std::vector<int> labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = samples[i].features;
    labels.push_back(samples[i].label);
  }
  return nn::cross_entropy(nn::softmax(net_.forward(x)), labels);
}

double DirectionPredictor::error_rate(const std::vector<DirectionSample>& samples) const {
  if (samples.empty()) return 0.0;
  nn::RowMatrix x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(4 * cfg_.window));
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = samples[i].features;
  const nn::RowMatrix logits = net_.forward(x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Eigen::Index arg = 0;
    logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    wrong += arg != samples[i].label;
  }
  return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

std::vector<DirectionSample> generate_direction_samples(const DirectionPredictor& encoder,
                                                        const geometry::MobilityGrid& grid, std::size_t users,
                                                        std::size_t slots, double height, Rng& rng) {
  std::vector<DirectionSample> out;
  const std::size_t window = encoder.config().window;
  for (std::size_t u = 0; u < users; ++u) {
    auto state = geometry::random_mobility_state(grid, height, encoder.config().speed, rng);
    std::deque<Position3> history{state.position};
    for (std::size_t t = 1; t < slots; ++t) {
      state = geometry::vrmm_step(state, grid, rng);
      if (auto s = encoder.make_sample(history, state.position)) out.push_back(std::move(*s));
      history.push_back(state.position);
      if (history.size() > window + 1) history.pop_front();
    }
  }
  return out;
}

PretrainCurve pretrain_direction(DirectionPredictor& model, const std::vector<DirectionSample>& train,
                                 const std::vector<DirectionSample>& validation, std::size_t epochs, Rng& rng) {
  PretrainCurve curve;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = model.config().minibatch;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<const DirectionSample*> mb;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) mb.push_back(&train[order[i]]);
      sum += model.train_on(mb, model.config().pretrain_lr);
      ++batches;
    }
    curve.train_loss.push_back(batches ? sum / static_cast<double>(batches) : 0.0);
    curve.validation_loss.push_back(model.loss(validation));
  }
  return curve;
}

}  // namespace thzvr::predictors
