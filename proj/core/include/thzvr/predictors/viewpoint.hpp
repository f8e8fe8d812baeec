// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <vector>

#include "thzvr/nn/layers.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::predictors {

struct FedClientState {
  nn::ParameterTree params;
  std::size_t samples = 0;
};

/// Sample-count weighted average of client parameters. Throws ContractError when structures
/// differ or no client holds samples.
nn::ParameterTree fedavg_aggregate(const std::vector<FedClientState>& clients);

struct GruRegressorConfig {
  std::size_t window = 10;   // T_o
  std::size_t hidden = 64;
  double angle_scale = 150.0;  // input normalisation (axis limit)
  double delta_scale = 10.0;   // output normalisation (degrees per slot)
};

/// Single-axis viewpoint regressor. Inputs per step are (angle / angle_scale, delta / delta_scale);
/// the GRU predicts the next delta, so the forecast is last value + delta.
class GruRegressor {
 public:
  GruRegressor(const GruRegressorConfig& cfg, std::uint64_t seed);

  /// Needs window + 1 history values; otherwise the last value (or 0) is carried forward.
  double predict(const std::deque<double>& history) const;
  std::vector<double> predict_batch(const std::vector<const std::deque<double>*>& histories) const;

  bool ready(const std::deque<double>& history) const { return history.size() >= cfg_.window + 1; }

  /// One SGD step on MSE over the given (history, actual) pairs; returns the loss before the step
  /// in normalised units. Histories that are not ready are skipped.
  double sgd_update(const std::vector<const std::deque<double>*>& histories, const std::vector<double>& actual,
                    double lr);

  nn::ParameterTree& params() { return net_.params(); }
  const nn::ParameterTree& params() const { return net_.params(); }
  const GruRegressorConfig& config() const { return cfg_; }

 private:
  nn::RowMatrix encode(const std::deque<double>& history) const;

  GruRegressorConfig cfg_;
  nn::Sequential net_;
};

enum class ViewpointMode { Centralized, FedAvg };

struct ViewpointLearnerConfig {
  GruRegressorConfig model;
  ViewpointMode mode = ViewpointMode::Centralized;
  double lr = 0.05;
  /// Optimizer steps per slot: the centralized model takes them on the pooled batch, each FedAvg
  /// client on its own sample before aggregation.
  std::size_t local_steps = 3;
};

/// Online Y-axis viewpoint prediction for K users.
class ViewpointLearner {
 public:
  ViewpointLearner(const ViewpointLearnerConfig& cfg, std::size_t users, std::uint64_t seed);

  /// Forecast for the current slot from the history up to the previous slot.
  std::vector<double> predict() const;
  /// Reveals this slot's angles: trains on them, then appends them to the history.
  void observe(const std::vector<double>& actual);

  /// Payload of one model exchange in bits (32 bits per parameter).
  double model_payload_bits() const;
  const GruRegressor& global_model() const { return global_; }
  std::size_t users() const { return histories_.size(); }

 private:
  ViewpointLearnerConfig cfg_;
  GruRegressor global_;
  std::vector<std::deque<double>> histories_;
  std::vector<std::size_t> sample_counts_;
};

}  // namespace thzvr::predictors
