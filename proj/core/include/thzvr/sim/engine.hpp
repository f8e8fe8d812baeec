// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thzvr/channel.hpp"
#include "thzvr/geometry.hpp"
#include "thzvr/phy.hpp"
#include "thzvr/predictors/direction.hpp"
#include "thzvr/predictors/los_cnn.hpp"
#include "thzvr/predictors/traces.hpp"
#include "thzvr/predictors/viewpoint.hpp"
#include "thzvr/ris_control.hpp"
#include "thzvr/rng.hpp"
#include "thzvr/sim/config.hpp"

namespace thzvr::sim {

struct UserSlot {
  geometry::Position3 position;
  geometry::Position3 predicted_position;
  geometry::LinkState los_true = geometry::LinkState::LoS;
  geometry::LinkState los_predicted = geometry::LinkState::LoS;
  double viewpoint = 0.0;            // actual Y angle, degrees
  double viewpoint_predicted = 0.0;
  int hit = 0;
  double uplink_rate = 0.0;    // bits/s/Hz
  double downlink_rate = 0.0;
  double t_uplink = 0.0;       // seconds; infinite for a dead link
  double t_render = 0.0;
  double t_downlink = 0.0;
  double t_vr = 0.0;
  double q_now = 0.0;
  double qoe = 0.0;
};

struct SlotMetrics {
  std::size_t episode = 0;
  std::size_t slot = 0;
  std::vector<UserSlot> users;
  std::int64_t action = -1;  // codebook index; -1 when the exhaustive search picked a config outside it
  std::size_t codebook_size = 0;
  double reward = 0.0;
  double cost = 0.0;         // violation form
  double signed_cost = 0.0;  // t_th - mean downlink latency
  double multiplier = 0.0;
  double epsilon = 0.0;
  std::optional<double> agent_loss;
};

/// Learners that persist across episodes: the Q-agent, the direction LSTM and the LoS CNN.
class Learners {
 public:
  /// `cnn` is required in learned-predictor mode; it is copied so each simulation owns its weights.
  Learners(const SimConfig& cfg, const predictors::LosClassifier* cnn);

  /// Agent for `actions` codebook entries (created on first use).
  ris::CdqnAgent& agent(std::size_t actions);
  bool has_agent() const { return agent_ != nullptr; }
  const ris::CdqnAgent* agent_ptr() const { return agent_.get(); }
  predictors::DirectionPredictor& direction() { return direction_; }
  const predictors::LosClassifier* cnn() const { return cnn_ ? &*cnn_ : nullptr; }
  Rng& train_rng() { return train_rng_; }
  Rng& action_rng() { return action_rng_; }

 private:
  ris::AgentConfig agent_cfg_;
  std::size_t state_dim_;
  std::uint64_t agent_seed_;
  std::unique_ptr<ris::CdqnAgent> agent_;
  predictors::DirectionPredictor direction_;
  std::optional<predictors::LosClassifier> cnn_;
  Rng train_rng_;
  Rng action_rng_;
};

/// Per-episode state, rebuilt from the episode seed.
struct World {
  World(const SimConfig& cfg, std::size_t episode);

  std::size_t episode = 0;
  std::size_t slot = 0;
  geometry::MobilityGrid grid;
  channel::ChannelParams params;
  channel::ArrayMount mec;
  channel::ArrayMount ris;
  std::vector<geometry::MobilityState> users;
  std::vector<std::deque<geometry::Position3>> history;  // true positions up to the previous slot
  predictors::ViewpointTraces traces;
  predictors::ViewpointLearner viewpoint;
  ris::CodebookBuilder codebook;
  phy::PhaseConfig previous_theta;        // used by the uplink
  std::vector<double> previous_quality;   // empty before the first slot
  std::vector<double> previous_qoe;
  std::optional<ris::NetworkState> pending_state;  // state and action awaiting their next state
  std::size_t pending_action = 0;
  double pending_reward = 0.0;
  double pending_cost = 0.0;
  Rng mobility_rng;
  Rng channel_rng;
  Rng select_rng;  // random baseline

  double viewpoint_at(std::size_t user, std::size_t slot) const;
};

/// Everything the selection phase sees, exposed for tests and the exhaustive baseline.
struct SlotContext {
  std::vector<geometry::Position3> positions;
  std::vector<geometry::Position3> predicted_positions;
  std::vector<geometry::LinkState> los_true;
  std::vector<geometry::LinkState> los_predicted;
  std::vector<int> hits;
  channel::ChannelSet actual;
  channel::ChannelSet design;
  std::vector<double> previous_quality;
};

/// Downlink rates, per-user QoE and their sum for one phase configuration.
struct SlotOutcome {
  std::vector<double> rates;
  std::vector<double> quality;
  std::vector<double> qoe;
  double reward = 0.0;
};
SlotOutcome evaluate_config(const SimConfig& cfg, const SlotContext& ctx, const phy::PhaseConfig& theta);

/// One slot of the pipeline:
///  1 VRMM step, 2 uplink with the previous configuration, 3 viewpoint prediction and update,
///  4 position prediction and update, 5 LoS prediction, 6 rendering, 7 RIS action,
///  8 downlink, 9 QoE/reward/cost, 10 agent bookkeeping and training.
SlotMetrics run_slot(World& world, Learners& learners, const SimConfig& cfg);

/// Runs one episode of cfg.run.slots slots on a fresh world; learners carry over.
std::vector<SlotMetrics> run_episode(const SimConfig& cfg, Learners& learners, std::size_t episode);

/// CNN for learned mode: loads cfg.cnn.checkpoint when set, otherwise trains on generated scenes
/// with the configured user count. `source` receives "checkpoint:<path>" or "in-process".
std::unique_ptr<predictors::LosClassifier> prepare_cnn(const SimConfig& cfg, std::string* source = nullptr);

}  // namespace thzvr::sim
