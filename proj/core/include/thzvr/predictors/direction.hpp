// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <deque>
#include <optional>
#include <vector>

#include "thzvr/geometry.hpp"
#include "thzvr/nn/layers.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::predictors {

/// Class index of a direction in the probability vector (Up, Down, Left, Right).
inline std::size_t direction_index(geometry::Direction d) { return static_cast<std::size_t>(d); }

/// Direction of the dominant displacement axis; nullopt when the user did not move.
std::optional<geometry::Direction> displacement_direction(const geometry::Position3& from,
                                                          const geometry::Position3& to);

struct DirectionConfig {
  std::size_t window = 10;  // T_o
  std::size_t hidden = 64;
  double lr = 0.005;           // online step size
  double pretrain_lr = 0.05;   // offline pretraining step size
  std::size_t minibatch = 64;
  std::size_t replay_capacity = 4096;
  double room_width = 20.0;
  double speed = 1.0;
};

struct DirectionSample {
  nn::RowMatrix features;  // 1 x (window * 4)
  int label = 0;
};

/// LSTM classifier over the last `window` positions. Per step features are
/// (x / W, y / W, dx / speed, dy / speed).
class DirectionPredictor {
 public:
  DirectionPredictor(const DirectionConfig& cfg, std::uint64_t seed);

  /// Needs window + 1 positions.
  bool ready(const std::deque<geometry::Position3>& history) const { return history.size() >= cfg_.window + 1; }
  nn::RowMatrix encode(const std::deque<geometry::Position3>& history) const;

  /// Softmax over the four directions; uniform during warm-up.
  std::array<double, 4> probabilities(const std::deque<geometry::Position3>& history) const;
  /// Batched probabilities for several histories (rows follow the input order).
  nn::RowMatrix probabilities_batch(const std::vector<const std::deque<geometry::Position3>*>& histories) const;

  /// Last position plus one speed step along the most likely direction, clamped to the room. During
  /// warm-up the last position is returned unchanged.
  geometry::Position3 predict_next(const std::deque<geometry::Position3>& history) const;
  static geometry::Position3 step(const geometry::Position3& from, std::size_t direction, double speed, double width);

  /// Window ending at history.back() labelled with the move to `next`; nullopt during warm-up or
  /// when the user stood still.
  std::optional<DirectionSample> make_sample(const std::deque<geometry::Position3>& history,
                                             const geometry::Position3& next) const;
  /// Adds a labelled window to the replay ring.
  void remember(DirectionSample sample);
  std::size_t replay_size() const { return replay_.size(); }
  /// One SGD step on averaged cross-entropy over a minibatch drawn from the replay ring.
  /// Returns the minibatch loss; 0 when the ring is empty.
  double train_step(Rng& rng);

  /// One SGD step on the given samples at rate `lr`.
  double train_on(const std::vector<const DirectionSample*>& batch, double lr);
  double loss(const std::vector<DirectionSample>& samples) const;
  /// Fraction of samples whose argmax differs from the label.
  double error_rate(const std::vector<DirectionSample>& samples) const;

  nn::Sequential& model() { return net_; }
  const DirectionConfig& config() const { return cfg_; }

 private:
  DirectionConfig cfg_;
  nn::Sequential net_;
  std::deque<DirectionSample> replay_;
};

/// Labelled windows from VRMM walks: `users` walkers of `slots` steps each on `grid`. Windows end at
/// slot t-1 and are labelled with the move t-1 -> t; stationary slots are skipped.
std::vector<DirectionSample> generate_direction_samples(const DirectionPredictor& encoder,
                                                        const geometry::MobilityGrid& grid, std::size_t users,
                                                        std::size_t slots, double height, Rng& rng);

struct PretrainCurve {
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch
};

/// Shuffled minibatch SGD at the pretraining rate for `epochs` passes over `train`.
PretrainCurve pretrain_direction(DirectionPredictor& model, const std::vector<DirectionSample>& train,
                                 const std::vector<DirectionSample>& validation, std::size_t epochs, Rng& rng);

}  // namespace thzvr::predictors
