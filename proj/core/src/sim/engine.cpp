// SPDX-License-Identifier: Apache-2.0

#include "thzvr/sim/engine.hpp"

#include <algorithm>
#include <stdexcept>

#include "thzvr/errors.hpp"
#include "thzvr/latency_qoe.hpp"

namespace thzvr::sim {

using geometry::LinkState;
using geometry::Position3;

namespace {

// Seed streams. Episode-scoped streams add the episode index to their base.
constexpr std::uint64_t kAgentStream = 1;
constexpr std::uint64_t kDirectionStream = 2;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kActionStream = 4;
constexpr std::uint64_t kCnnStream = 5;
constexpr std::uint64_t kWarmStartStream = 6;
constexpr std::uint64_t kEpisodeStream = 1'000'000;

std::uint64_t episode_seed(const SimConfig& cfg, std::size_t episode, std::uint64_t sub) {
  return derive_seed(derive_seed(cfg.run.seed, kEpisodeStream + episode), sub);
}

std::vector<bool> as_bools(const std::vector<LinkState>& flags) {
  std::vector<bool> out(flags.size());
  for (std::size_t k = 0; k < flags.size(); ++k) out[k] = flags[k] == LinkState::LoS;
  return out;
}

double capped(double t, double cap) { return std::min(t, cap); }

}  // namespace

// --- learners ---------------------------------------------------------------------------------

Learners::Learners(const SimConfig& cfg, const predictors::LosClassifier* cnn)
    : agent_cfg_(cfg.agent.agent),
      state_dim_(5 * cfg.users.count),
      agent_seed_(derive_seed(cfg.run.seed, kAgentStream)),
      direction_(cfg.direction_config(), derive_seed(cfg.run.seed, kDirectionStream)),
      train_rng_(derive_seed(cfg.run.seed, kTrainStream)),
      action_rng_(derive_seed(cfg.run.seed, kActionStream)) {
  if (cfg.run.predictors == PredictorMode::Learned) {
    if (!cnn) throw ContractError("learned predictors need a LoS classifier");
    if (cnn->config().side != cfg.cnn_config().side) {
      throw ConfigError("cnn: checkpoint image side does not match the room lattice");
    }
    cnn_.emplace(*cnn);
    if (cfg.direction.warm_start_epochs > 0) {
      Rng rng(derive_seed(cfg.run.seed, kWarmStartStream));
      const geometry::MobilityGrid grid(cfg.room_geometry(), cfg.placement.obstacles);
      const double h = 0.5 * (cfg.users.min_height + cfg.users.max_height);
      const auto train = predictors::generate_direction_samples(direction_, grid, cfg.direction.warm_start_walkers,
                                                                cfg.run.slots, h, rng);
      predictors::pretrain_direction(direction_, train, {}, cfg.direction.warm_start_epochs, rng);
    }
  }
}

ris::CdqnAgent& Learners::agent(std::size_t actions) {
  if (!agent_) {
    agent_ = std::make_unique<ris::CdqnAgent>(agent_cfg_, state_dim_, actions, agent_seed_);
  } else if (agent_->actions() != actions) {
    throw ContractError("codebook size changed between episodes");
  }
  return *agent_;
}

// --- world ------------------------------------------------------------------------------------

namespace {

predictors::ViewpointTraces episode_traces(const SimConfig& cfg, Rng& rng) {
  if (cfg.viewpoint.trace_file.empty()) return predictors::synthetic_viewpoint_traces(cfg.users.count, cfg.run.slots, rng);
  auto loaded = predictors::load_viewpoint_csv(cfg.viewpoint.trace_file);
  if (loaded.empty()) throw ConfigError("viewpoint.trace_file: no traces in " + cfg.viewpoint.trace_file);
  // Users beyond the file's count reuse its traces in order, starting at a seeded offset.
  const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, loaded.size() - 1)(rng);
  predictors::ViewpointTraces out;
  for (std::size_t k = 0; k < cfg.users.count; ++k) out.push_back(loaded[(offset + k) % loaded.size()]);
  return out;
}

}  // namespace

World::World(const SimConfig& cfg, std::size_t ep)
    : episode(ep),
      grid(cfg.room_geometry(), cfg.placement.obstacles),
      params(cfg.channel_params()),
      mec{cfg.placement.mec, cfg.placement.mec_broadside},
      ris{cfg.placement.ris, cfg.placement.ris_broadside},
      viewpoint(cfg.viewpoint_config(), cfg.users.count, episode_seed(cfg, ep, 1)),
      codebook([&] {
        Rng rng(episode_seed(cfg, ep, 2));
        return ris::CodebookBuilder(static_cast<std::size_t>(cfg.radio.ris_elements), cfg.radio.phase_bits,
                                    cfg.agent.codebook_size, cfg.users.count, rng);
      }()),
      previous_theta(phy::PhaseConfig::zeros(static_cast<std::size_t>(cfg.radio.ris_elements), cfg.radio.phase_bits)),
      previous_qoe(cfg.users.count, 0.0),
      mobility_rng(episode_seed(cfg, ep, 3)),
      channel_rng(episode_seed(cfg, ep, 4)),
      select_rng(episode_seed(cfg, ep, 5)) {
  Rng init(episode_seed(cfg, ep, 6));
  std::uniform_real_distribution<double> height(cfg.users.min_height, cfg.users.max_height);
  for (std::size_t k = 0; k < cfg.users.count; ++k) {
    users.push_back(geometry::random_mobility_state(grid, height(init), cfg.users.speed, init));
    history.push_back({users.back().position});
  }
  traces = episode_traces(cfg, init);
}

double World::viewpoint_at(std::size_t user, std::size_t s) const {
  const auto& tr = traces.at(user);
  if (tr.empty()) throw ContractError("empty viewpoint trace");
  return tr[s % tr.size()].y;
}

// --- slot -------------------------------------------------------------------------------------

SlotOutcome evaluate_config(const SimConfig& cfg, const SlotContext& ctx, const phy::PhaseConfig& theta) {
  const double noise = phy::dbm_to_watts(cfg.radio.noise_dbm);
  const double r_th = cfg.rate_threshold();
  SlotOutcome out;
  out.rates = phy::downlink_rates(ctx.actual, ctx.design, phy::reflection_diagonal(theta), ctx.los_predicted,
                                  cfg.radio.tx_power_w, noise);
  const std::size_t k_users = out.rates.size();
  out.quality.resize(k_users);
  out.qoe.resize(k_users);
  for (std::size_t k = 0; k < k_users; ++k) {
    out.quality[k] = qoe::quality(out.rates[k], r_th, cfg.qoe.q_min);
    // First slot: no previous quality, so no variation term.
    const double prev = ctx.previous_quality.empty() ? out.quality[k] : ctx.previous_quality[k];
    out.qoe[k] = qoe::qoe_from_quality(ctx.hits[k], out.quality[k], prev).qoe;
  }
  out.reward = ris::compute_reward(out.qoe);
  return out;
}

SlotMetrics run_slot(World& w, Learners& learners, const SimConfig& cfg) {
  const std::size_t k_users = cfg.users.count;
  const bool genie = cfg.run.predictors == PredictorMode::Genie;
  const double noise = phy::dbm_to_watts(cfg.radio.noise_dbm);
  const double payload = cfg.payload_bits();

  SlotMetrics m;
  m.episode = w.episode;
  m.slot = w.slot;
  m.users.resize(k_users);
  SlotContext ctx;

  // 1. mobility
  for (auto& u : w.users) u = geometry::vrmm_step(u, w.grid, w.mobility_rng);
  ctx.positions = geometry::positions(w.users);
  ctx.los_true = geometry::los_status(cfg.placement.mec, ctx.positions, cfg.placement.obstacles,
                                      cfg.users.colinear_tol);
  Rng* fading_rng = cfg.radio.fading_std > 0 ? &w.channel_rng : nullptr;
  ctx.actual = channel::synthesize(w.params, w.mec, w.ris, ctx.positions, as_bools(ctx.los_true),
                                   cfg.radio.fading_std, fading_rng);

  // 2. uplink through the configuration chosen last slot
  const auto up_rates = phy::uplink_rates(ctx.actual, phy::reflection_diagonal(w.previous_theta),
                                          cfg.radio.tx_power_w, noise);
  const double up_bits = cfg.viewpoint.mode == predictors::ViewpointMode::FedAvg
                             ? w.viewpoint.model_payload_bits()
                             : cfg.fov.packet_bits;

  // 3. viewpoint
  std::vector<double> actual_vp(k_users);
  for (std::size_t k = 0; k < k_users; ++k) actual_vp[k] = w.viewpoint_at(k, w.slot);
  std::vector<double> predicted_vp = actual_vp;
  ctx.hits.assign(k_users, 1);
  if (!genie) {
    predicted_vp = w.viewpoint.predict();
    for (std::size_t k = 0; k < k_users; ++k) {
      ctx.hits[k] = qoe::viewpoint_hit(predicted_vp[k], actual_vp[k], cfg.fov.hit_tolerance_deg);
    }
    w.viewpoint.observe(actual_vp);
  }

  // 4. positions
  auto& direction = learners.direction();
  ctx.predicted_positions = ctx.positions;
  if (!genie) {
    for (std::size_t k = 0; k < k_users; ++k) {
      ctx.predicted_positions[k] = direction.predict_next(w.history[k]);
      if (auto sample = direction.make_sample(w.history[k], ctx.positions[k])) direction.remember(std::move(*sample));
    }
    if (direction.replay_size() > 0) direction.train_step(learners.train_rng());
  }
  for (std::size_t k = 0; k < k_users; ++k) {
    w.history[k].push_back(ctx.positions[k]);
    while (w.history[k].size() > cfg.direction.window + 1) w.history[k].pop_front();
  }

  // 5. LoS prediction
  ctx.los_predicted = ctx.los_true;
  if (!genie) {
    std::vector<predictors::SceneImage> images;
    images.reserve(k_users);
    for (std::size_t k = 0; k < k_users; ++k) {
      images.push_back(predictors::rasterize_scene(cfg.room_geometry(), cfg.placement.mec, cfg.placement.obstacles,
                                                   ctx.predicted_positions, k));
    }
    std::vector<const predictors::SceneImage*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);
    const nn::RowMatrix p = learners.cnn()->probabilities(ptrs);
    for (std::size_t k = 0; k < k_users; ++k) {
      ctx.los_predicted[k] = p(static_cast<Eigen::Index>(k), 1) >= p(static_cast<Eigen::Index>(k), 0) ? LinkState::LoS
                                                                                                    : LinkState::NLoS;
    }
  }
  ctx.design = genie ? ctx.actual
                     : channel::synthesize(w.params, w.mec, w.ris, ctx.predicted_positions, as_bools(ctx.los_predicted));
  ctx.previous_quality = w.previous_quality;

  // 6. rendering
  const double t_render = qoe::render_latency(payload, cfg.mec.cycles_per_bit, cfg.mec.cycles_per_second);

  // 7. RIS configuration
  const ris::ActionCodebook book = w.codebook.build(ctx.design);
  m.codebook_size = book.size();
  const ris::NetworkState state = ris::encode_state(ctx.predicted_positions, ctx.los_predicted, w.previous_qoe,
                                                    cfg.room_geometry(), cfg.qoe.q_min, cfg.qoe.q_max);
  phy::PhaseConfig theta;
  ris::CdqnAgent* agent = nullptr;
  switch (cfg.run.mode) {
    case ControlMode::Cdrl: {
      agent = &learners.agent(book.size());
      m.epsilon = agent->epsilon();
      const std::size_t a = agent->act(state, learners.action_rng());
      m.action = static_cast<std::int64_t>(a);
      theta = book[a];
      break;
    }
    case ControlMode::Random: {
      const std::size_t a = ris::random_select(book, w.select_rng);
      m.action = static_cast<std::int64_t>(a);
      m.epsilon = 1.0;
      theta = book[a];
      break;
    }
    case ControlMode::Exhaustive: {
      const auto best = ris::exhaustive_select(
          static_cast<std::size_t>(cfg.radio.ris_elements), cfg.radio.phase_bits, book,
          [&](const phy::PhaseConfig& c) { return evaluate_config(cfg, ctx, c).reward; },
          cfg.agent.exhaustive_scope, cfg.agent.exhaustive_guard);
      m.action = best.codebook_index ? static_cast<std::int64_t>(*best.codebook_index) : -1;
      theta = best.config;
      break;
    }
  }

  // 8-9. downlink, QoE, reward, cost
  const SlotOutcome out = evaluate_config(cfg, ctx, theta);
  std::vector<double> down_latency(k_users);
  for (std::size_t k = 0; k < k_users; ++k) {
    UserSlot& u = m.users[k];
    u.position = ctx.positions[k];
    u.predicted_position = ctx.predicted_positions[k];
    u.los_true = ctx.los_true[k];
    u.los_predicted = ctx.los_predicted[k];
    u.viewpoint = actual_vp[k];
    u.viewpoint_predicted = predicted_vp[k];
    u.hit = ctx.hits[k];
    u.uplink_rate = up_rates[k];
    u.downlink_rate = out.rates[k];
    u.t_uplink = qoe::transmit_latency(up_bits, up_rates[k], cfg.radio.bandwidth_hz);
    u.t_render = t_render;
    u.t_downlink = qoe::transmit_latency(payload, out.rates[k], cfg.radio.bandwidth_hz);
    u.t_vr = qoe::make_budget(u.t_uplink, u.t_render, u.t_downlink).t_total;
    u.q_now = out.quality[k];
    u.qoe = out.qoe[k];
    down_latency[k] = capped(u.t_downlink, cfg.latency.cap);
  }
  m.reward = out.reward;
  const ris::Cost cost = ris::compute_cost(down_latency, cfg.latency.t_th_downlink);
  m.cost = cost.violation;
  m.signed_cost = cost.signed_form;

  // 10. transition bookkeeping and learning
  if (agent) {
    if (w.pending_state) {
      agent->store({std::move(*w.pending_state), w.pending_action, w.pending_reward, w.pending_cost, state, false});
    }
    const bool last = w.slot + 1 == cfg.run.slots;
    if (last) {
      agent->store({state, static_cast<std::size_t>(m.action), m.reward, m.cost, state, true});
      w.pending_state.reset();
    } else {
      w.pending_state = state;
      w.pending_action = static_cast<std::size_t>(m.action);
      w.pending_reward = m.reward;
      w.pending_cost = m.cost;
    }
    m.agent_loss = agent->train_step(learners.train_rng());
    agent->update_multiplier();
    m.multiplier = agent->multiplier();
  }

  w.previous_theta = theta;
  w.previous_quality = out.quality;
  w.previous_qoe = out.qoe;
  ++w.slot;
  return m;
}

std::vector<SlotMetrics> run_episode(const SimConfig& cfg, Learners& learners, std::size_t episode) {
  World world(cfg, episode);
  std::vector<SlotMetrics> out;
  out.reserve(cfg.run.slots);
  for (std::size_t t = 0; t < cfg.run.slots; ++t) {
    try {
      out.push_back(run_slot(world, learners, cfg));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("episode " + std::to_string(episode) + " slot " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

// --- CNN --------------------------------------------------------------------------------------

std::unique_ptr<predictors::LosClassifier> prepare_cnn(const SimConfig& cfg, std::string* source) {
  auto model = std::make_unique<predictors::LosClassifier>(cfg.cnn_config(), derive_seed(cfg.run.seed, kCnnStream));
  if (!cfg.cnn.checkpoint.empty()) {
    model->load(cfg.cnn.checkpoint);
    if (source) *source = "checkpoint:" + cfg.cnn.checkpoint;
    return model;
  }
  Rng rng(derive_seed(cfg.run.seed, kCnnStream + 100));
  predictors::SceneSampler sampler{cfg.room_geometry(), cfg.placement.mec, cfg.placement.obstacles,
                                   cfg.users.min_height, cfg.users.max_height, cfg.users.colinear_tol};
  const auto data = predictors::generate_los_dataset(sampler, {cfg.users.count}, cfg.cnn.pretrain_scenes, rng);
  predictors::train_los_classifier(*model, data, cfg.cnn.pretrain_epochs, rng);
  if (source) *source = "in-process";
  return model;
}

}  // namespace thzvr::sim
