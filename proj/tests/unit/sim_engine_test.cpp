// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../support/oracles.hpp"
#include "thzvr/errors.hpp"
#include "thzvr/sim/config.hpp"
#include "thzvr/sim/engine.hpp"
#include "thzvr/sim/experiment.hpp"
#include "thzvr/sim/metrics.hpp"

namespace fs = std::filesystem;
using namespace thzvr;
using namespace thzvr::sim;
using geometry::LinkState;
namespace oracle = thzvr::testing;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thzvr_sim_test_" + name);
  fs::remove_all(p);
  return p;
}

SimConfig quick(ControlMode mode, std::size_t slots = 30) {
  SimConfig c;
  c.run.predictors = PredictorMode::Genie;
  c.run.mode = mode;
  c.run.slots = slots;
  c.agent.agent.warmup = 16;
  c.agent.agent.minibatch = 8;
  c.agent.agent.hidden = 16;
  c.agent.agent.epsilon_horizon = 40;
  return c;
}

std::size_t count_keys(const std::string& dump) {
  const auto doc = nlohmann::json::parse(dump);
  std::size_t n = 0;
  for (const auto& [s, body] : doc.items()) n += body.size();
  return n;
}

}  // namespace

// --- configuration ----------------------------------------------------------------------------

TEST(Config, EmptyDocumentGivesDefaultsAndReportsEveryKey) {
  const auto loaded = parse_config("");
  EXPECT_TRUE(loaded.config == SimConfig{});
  EXPECT_EQ(loaded.defaulted.size(), count_keys(dump_config(SimConfig{})));
  const auto& c = loaded.config;
  EXPECT_EQ(c.users.count, 5u);
  EXPECT_EQ(c.radio.ris_elements, 20);
  EXPECT_EQ(c.radio.mec_antennas, 30);
  EXPECT_DOUBLE_EQ(c.radio.frequency_hz, 300e9);
  EXPECT_DOUBLE_EQ(c.latency.t_th_downlink, 0.012);
  EXPECT_DOUBLE_EQ(c.radio.noise_dbm, -110.0);
  EXPECT_DOUBLE_EQ(c.mec.cycles_per_second, 5e9);
  EXPECT_DOUBLE_EQ(c.mec.cycles_per_bit, 1000.0);
  EXPECT_EQ(c.direction.window, 10u);
  EXPECT_DOUBLE_EQ(c.direction.lr, 0.005);
  EXPECT_DOUBLE_EQ(c.agent.agent.gamma, 0.9);
  EXPECT_DOUBLE_EQ(c.agent.agent.lr, 0.05);
  EXPECT_EQ(c.agent.agent.hidden, 128u);
  EXPECT_EQ(c.agent.agent.hidden_layers, 2u);
  EXPECT_EQ(c.run.slots, 300u);
  EXPECT_EQ(c.placement.obstacles.size(), 2u);
  EXPECT_EQ(c.placement.mec, (geometry::Position3{0, 0, 3}));
  EXPECT_EQ(c.placement.ris, (geometry::Position3{10, 20, 3}));
}

TEST(Config, ZeroUsersIsRejected) {
  try {
    parse_config(R"({"users": {"count": 0}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("users.count"), std::string::npos);
  }
}

TEST(Config, UnknownKeysAndSectionsAreNamed) {
  try {
    parse_config(R"({"users": {"cont": 3}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cont"), std::string::npos);
  }
  EXPECT_THROW(parse_config(R"({"userz": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"users": {"count": "five"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"run": {"mode": "greedy"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"users": {"count": -2}})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, InvariantViolationsAreRejected) {
  EXPECT_THROW(parse_config(R"({"users": {"min_height": 2.0, "max_height": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"radio": {"phase_bits": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"placement": {"mec": [30, 0, 3]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"placement": {"obstacles": [{"x": [8, 4], "y": [8, 12], "height": 3}]}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"agent": {"gamma": 1.0}})"), ConfigError);
}

TEST(Config, CommentsAndPartialSections) {
  const auto loaded = parse_config(R"({
    // fewer users
    "users": {"count": 3},
    /* and a faster walk */
    "run": {"mode": "random", "seed": 9}
  })");
  EXPECT_EQ(loaded.config.users.count, 3u);
  EXPECT_EQ(loaded.config.run.mode, ControlMode::Random);
  EXPECT_EQ(loaded.config.run.seed, 9u);
  EXPECT_EQ(loaded.defaulted.size(), count_keys(dump_config(SimConfig{})) - 3);
}

TEST(Config, RoundTripThroughDump) {
  SimConfig c;
  c.users.count = 7;
  c.radio.noise_dbm = -104.37;
  c.placement.obstacles.push_back({1.5, 2.25, 3.0, 4.0, 1.0});
  c.run.mode = ControlMode::Exhaustive;
  c.viewpoint.mode = predictors::ViewpointMode::FedAvg;
  c.agent.exhaustive_scope = ris::ExhaustiveScope::Codebook;
  c.radio.absorption = {{2.9e11, 0.001}, {3.1e11, 0.005}};
  const auto loaded = parse_config(dump_config(c));
  EXPECT_TRUE(loaded.config == c);
  EXPECT_TRUE(loaded.defaulted.empty());
}

TEST(Config, EnvironmentOverrides) {
  const auto loaded = parse_config(R"({"users": {"count": 3}})",
                                   {{"USERS__COUNT", "8"}, {"RUN__MODE", "exhaustive"}, {"RADIO__TX_POWER_W", "0.5"}});
  EXPECT_EQ(loaded.config.users.count, 8u);
  EXPECT_EQ(loaded.config.run.mode, ControlMode::Exhaustive);
  EXPECT_DOUBLE_EQ(loaded.config.radio.tx_power_w, 0.5);
  EXPECT_EQ(loaded.overridden.size(), 3u);
  EXPECT_THROW(parse_config("", {{"USERS__COLOR", "1"}}), ConfigError);
  EXPECT_THROW(parse_config("", {{"USERS__COUNT", "0"}}), ConfigError);
}

TEST(Config, DerivedThreshold) {
  const SimConfig c;
  // 3*8*3840*2160*2 bits / 6000, delivered in 12 ms over 1 GHz
  EXPECT_NEAR(c.payload_bits(), 66355.2, 1e-9);
  EXPECT_NEAR(c.rate_threshold(), 0.0055296, 1e-15);
}

// --- slot pipeline ----------------------------------------------------------------------------

TEST(RunSlot, GenieExhaustiveMatchesComposedOracle) {
  SimConfig c = quick(ControlMode::Exhaustive, 1);
  c.radio.ris_elements = 4;
  c.radio.phase_bits = 1;
  c.run.seed = 3;
  Learners learners(c, nullptr);
  World world(c, 0);
  const SlotMetrics m = run_slot(world, learners, c);
  ASSERT_EQ(m.users.size(), 5u);

  std::vector<geometry::Position3> pos;
  for (const auto& u : m.users) pos.push_back(u.position);
  const auto los = oracle::sampled_los(c.placement.mec, pos, c.placement.obstacles, c.users.colinear_tol);
  std::vector<bool> los_bool;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    EXPECT_EQ(m.users[k].los_true, los[k]);
    los_bool.push_back(los[k] == LinkState::LoS);
  }
  const auto ch = oracle::to_oracle(channel::synthesize(c.channel_params(), {c.placement.mec, c.placement.mec_broadside},
                                                         {c.placement.ris, c.placement.ris_broadside}, pos, los_bool));
  const double noise = 1e-3 * std::pow(10.0, -110.0 / 10.0);
  const double r_th = 3.0 * 8 * 3840 * 2160 * 2 / 6000.0 / (1e9 * 0.012);
  double best = -1e300;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<double> phases;
    for (int n = 3; n >= 0; --n) phases.push_back((mask >> n) & 1 ? std::numbers::pi : 0.0);
    const auto theta = oracle::oracle_theta(phases);
    double reward = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const double r = los_bool[k] ? oracle::oracle_downlink_los(k, ch, theta, los_bool, 1.0, noise)
                                   : oracle::oracle_downlink_nlos(k, ch, theta, los_bool, 1.0, noise);
      reward += r > 0 ? std::max(std::log(r / r_th), -20.0) : -20.0;  // first slot: no variation, hit = 1
    }
    best = std::max(best, reward);
  }
  EXPECT_NEAR(m.reward, best, 1e-9 * std::abs(best));
}

TEST(RunSlot, AllLosRewardIgnoresTheAction) {
  SimConfig c = quick(ControlMode::Random, 1);
  c.placement.obstacles.clear();
  World world(c, 0);
  SlotContext ctx;
  ctx.positions = {{3, 1, 1.5}, {1, 6, 1.7}, {9, 9, 1.3}, {15, 3, 1.6}, {4, 17, 1.4}};
  ctx.predicted_positions = ctx.positions;
  ctx.los_true = geometry::los_status(c.placement.mec, ctx.positions, {}, c.users.colinear_tol);
  for (const auto s : ctx.los_true) ASSERT_EQ(s, LinkState::LoS);
  ctx.los_predicted = ctx.los_true;
  ctx.hits.assign(5, 1);
  ctx.previous_quality = {3.0, 4.0, 5.0, 6.0, 7.0};
  ctx.actual = channel::synthesize(world.params, world.mec, world.ris, ctx.positions,
                                   std::vector<bool>(5, true));
  ctx.design = ctx.actual;
  const auto book = world.codebook.build(ctx.design);
  const double r0 = evaluate_config(c, ctx, book[0]).reward;
  for (std::size_t i = 1; i < book.size(); ++i) EXPECT_EQ(evaluate_config(c, ctx, book[i]).reward, r0) << i;
}

TEST(RunSlot, LatencyComponentsAddUp) {
  SimConfig c = quick(ControlMode::Cdrl, 40);
  Learners learners(c, nullptr);
  for (const auto& m : run_episode(c, learners, 0)) {
    for (const auto& u : m.users) {
      EXPECT_EQ(u.t_vr, u.t_uplink + u.t_render + u.t_downlink);
      EXPECT_NEAR(u.t_render, 1000.0 * 66355.2 / 5e9, 1e-15);
    }
  }
}

TEST(RunSlot, UplinkUsesPreviousSlotConfiguration) {
  SimConfig c = quick(ControlMode::Random, 6);
  c.radio.ris_elements = 2;
  c.radio.phase_bits = 1;  // the codebook is the whole 4-entry space, index = binary levels
  Learners learners(c, nullptr);
  World world(c, 0);
  std::vector<SlotMetrics> slots;
  for (int t = 0; t < 6; ++t) slots.push_back(run_slot(world, learners, c));
  const double noise = phy::dbm_to_watts(c.radio.noise_dbm);
  for (std::size_t t = 0; t < slots.size(); ++t) {
    std::vector<geometry::Position3> pos;
    std::vector<bool> los;
    for (const auto& u : slots[t].users) {
      pos.push_back(u.position);
      los.push_back(u.los_true == LinkState::LoS);
    }
    const auto ch = channel::synthesize(world.params, world.mec, world.ris, pos, los);
    std::vector<std::uint16_t> levels{0, 0};
    if (t > 0) {
      const auto a = static_cast<std::uint16_t>(slots[t - 1].action);
      levels = {static_cast<std::uint16_t>(a >> 1), static_cast<std::uint16_t>(a & 1)};
    }
    const auto expected = phy::uplink_rates(ch, phy::reflection_diagonal(phy::PhaseConfig(1, levels)), 1.0, noise);
    for (std::size_t k = 0; k < pos.size(); ++k) EXPECT_EQ(slots[t].users[k].uplink_rate, expected[k]) << t << " " << k;
  }
}

TEST(RunSlot, FedAvgUplinkCarriesTheModel) {
  SimConfig c = quick(ControlMode::Random, 2);
  c.viewpoint.mode = predictors::ViewpointMode::FedAvg;
  Learners learners(c, nullptr);
  World world(c, 0);
  const auto m = run_slot(world, learners, c);
  const double bits = world.viewpoint.model_payload_bits();
  EXPECT_GT(bits, 1e4);
  for (const auto& u : m.users) {
    if (u.uplink_rate > 0) EXPECT_DOUBLE_EQ(u.t_uplink, bits / (u.uplink_rate * 1e9));
  }
}

TEST(RunSlot, LearnedModeNeedsClassifier) {
  SimConfig c = quick(ControlMode::Random, 2);
  c.run.predictors = PredictorMode::Learned;
  EXPECT_THROW(Learners(c, nullptr), ContractError);
}

TEST(RunSlot, LearnedModeRunsWithSmallModels) {
  SimConfig c = quick(ControlMode::Cdrl, 14);
  c.run.predictors = PredictorMode::Learned;
  c.cnn.filters = 2;
  c.cnn.dense = 4;
  c.cnn.pretrain_scenes = 4;
  c.cnn.pretrain_epochs = 1;
  c.direction.window = 3;
  c.direction.hidden = 4;
  c.viewpoint.window = 3;
  c.viewpoint.hidden = 4;
  std::string source;
  const auto cnn = prepare_cnn(c, &source);
  EXPECT_EQ(source, "in-process");
  Learners learners(c, cnn.get());
  const auto slots = run_episode(c, learners, 0);
  ASSERT_EQ(slots.size(), 14u);
  // Until the histories fill, forecasts carry the last value forward.
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(slots[1].users[k].predicted_position, slots[0].users[k].position);
  }
  EXPECT_GT(learners.direction().replay_size(), 0u);
}

TEST(RunSlot, TransitionsChainStates) {
  SimConfig c = quick(ControlMode::Cdrl, 10);
  Learners learners(c, nullptr);
  run_episode(c, learners, 0);
  const auto& replay = learners.agent_ptr()->replay();
  ASSERT_EQ(replay.size(), 10u);
  for (std::size_t i = 0; i + 1 < replay.size(); ++i) {
    EXPECT_FALSE(replay.at(i).terminal);
    EXPECT_EQ(replay.at(i).next.features, replay.at(i + 1).state.features);
  }
  EXPECT_TRUE(replay.at(9).terminal);
}

// --- experiments and metrics ------------------------------------------------------------------

TEST(Experiment, SameSeedGivesByteIdenticalFiles) {
  SimConfig c = quick(ControlMode::Cdrl, 25);
  c.run.episodes = 2;
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  run_experiment(c, a);
  run_experiment(c, b);
  for (const char* f : {"slots.csv", "slots.jsonl", "episodes.csv", "summary.json", "config.json"}) {
    const auto x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  c.run.seed = 2;
  const auto d = scratch("det_c");
  run_experiment(c, d);
  EXPECT_NE(slurp(a / "slots.csv"), slurp(d / "slots.csv"));
}

TEST(Experiment, EpisodeMeanQoeIsConserved) {
  SimConfig c = quick(ControlMode::Random, 20);
  c.run.episodes = 3;
  const auto dir = scratch("conserve");
  run_experiment(c, dir);
  std::ifstream slots(dir / "slots.csv");
  std::string line;
  std::getline(slots, line);
  std::map<int, std::pair<double, int>> acc;
  while (std::getline(slots, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    auto& a = acc[std::stoi(cells[0])];
    a.first += std::stod(cells.back());
    a.second += 1;
  }
  std::ifstream eps(dir / "episodes.csv");
  std::getline(eps, line);
  int rows = 0;
  while (std::getline(eps, line)) {
    std::stringstream ss(line);
    std::string ep, n, mean;
    std::getline(ss, ep, ',');
    std::getline(ss, n, ',');
    std::getline(ss, mean, ',');
    const auto& a = acc.at(std::stoi(ep));
    EXPECT_NEAR(a.first / a.second, std::stod(mean), 1e-9);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Experiment, JsonLinesParse) {
  SimConfig c = quick(ControlMode::Cdrl, 5);
  const auto dir = scratch("jsonl");
  run_experiment(c, dir);
  std::ifstream in(dir / "slots.jsonl");
  std::size_t n = 0;
  for (std::string line; std::getline(in, line); ++n) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["slot"].get<std::size_t>(), n);
    EXPECT_EQ(j["users"].size(), 5u);
  }
  EXPECT_EQ(n, 5u);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["mode"], "cdrl");
  EXPECT_EQ(summary["predictors"], "genie");
}

TEST(Experiment, SweepWritesOneRowPerValue) {
  SimConfig c = quick(ControlMode::Random, 4);
  c.run.slot_records = false;
  const auto dir = scratch("sweep");
  const auto points = run_sweep(c, SweepAxis::Users, {5, 10, 15, 20, 25}, dir);
  ASSERT_EQ(points.size(), 5u);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSweepCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_TRUE(fs::exists(dir / "users_25" / "episodes.csv"));
  EXPECT_FALSE(fs::exists(dir / "users_25" / "slots.csv"));
  EXPECT_THROW(run_sweep(c, SweepAxis::RisElements, {0}, {}), ConfigError);
}

TEST(Experiment, ParallelSweepMatchesSequential) {
  SimConfig c = quick(ControlMode::Cdrl, 20);
  const auto seq = run_sweep(c, SweepAxis::RisElements, {8, 16}, {});
  c.run.workers = 2;
  const auto par = run_sweep(c, SweepAxis::RisElements, {8, 16}, {});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(seq[i].result.qoe.mean, par[i].result.qoe.mean);
}

TEST(Metrics, MeanSe) {
  const auto r = mean_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(mean_se({7.0}).se, 0.0);
}
