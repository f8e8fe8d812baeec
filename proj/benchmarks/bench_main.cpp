// SPDX-License-Identifier: Apache-2.0
//
// Hot paths of one simulation slot. Run `thzvr_bench --benchmark_filter=Slot` for the end-to-end
// numbers; the per-slot figure times 300 is the episode cost.

#include <malloc.h>

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "thzvr/channel.hpp"
#include "thzvr/phy.hpp"
#include "thzvr/predictors/los_cnn.hpp"
#include "thzvr/ris_control.hpp"
#include "thzvr/sim/engine.hpp"

namespace {

using namespace thzvr;

struct Scene {
  sim::SimConfig cfg;
  std::vector<geometry::Position3> users;
  std::vector<geometry::LinkState> los;
  std::vector<bool> los_bool;
  channel::ChannelSet channels;

  explicit Scene(std::size_t k, int n = 20) {
    cfg.users.count = k;
    cfg.radio.ris_elements = n;
    const geometry::MobilityGrid grid(cfg.room_geometry(), cfg.placement.obstacles);
    Rng rng(3);
    std::uniform_real_distribution<double> h(cfg.users.min_height, cfg.users.max_height);
    for (std::size_t i = 0; i < k; ++i) users.push_back(grid.cell_center(grid.random_free_cell(rng), h(rng)));
    los = geometry::los_status(cfg.placement.mec, users, cfg.placement.obstacles, cfg.users.colinear_tol);
    for (const auto s : los) los_bool.push_back(s == geometry::LinkState::LoS);
    channels = channel::synthesize(cfg.channel_params(), {cfg.placement.mec, cfg.placement.mec_broadside},
                                   {cfg.placement.ris, cfg.placement.ris_broadside}, users, los_bool);
  }
};

void BM_LosStatus(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        geometry::los_status(s.cfg.placement.mec, s.users, s.cfg.placement.obstacles, s.cfg.users.colinear_tol));
  }
}
BENCHMARK(BM_LosStatus)->Arg(5)->Arg(25);

void BM_Synthesize(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  const auto params = s.cfg.channel_params();
  for (auto _ : state) {
    benchmark::DoNotOptimize(channel::synthesize(params, {s.cfg.placement.mec, s.cfg.placement.mec_broadside},
                                                 {s.cfg.placement.ris, s.cfg.placement.ris_broadside}, s.users,
                                                 s.los_bool));
  }
}
BENCHMARK(BM_Synthesize)->Arg(5)->Arg(25);

void BM_DownlinkRates(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  const auto theta = phy::reflection_diagonal(phy::PhaseConfig::zeros(static_cast<std::size_t>(state.range(1)), 2));
  const double noise = phy::dbm_to_watts(s.cfg.radio.noise_dbm);
  for (auto _ : state) {
    benchmark::DoNotOptimize(phy::downlink_rates(s.channels, s.channels, theta, s.los, 1.0, noise));
  }
}
BENCHMARK(BM_DownlinkRates)->Args({5, 20})->Args({25, 20})->Args({5, 64});

void BM_UplinkRates(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  const auto theta = phy::reflection_diagonal(phy::PhaseConfig::zeros(20, 2));
  const double noise = phy::dbm_to_watts(s.cfg.radio.noise_dbm);
  for (auto _ : state) benchmark::DoNotOptimize(phy::uplink_rates(s.channels, theta, 1.0, noise));
}
BENCHMARK(BM_UplinkRates)->Arg(5)->Arg(25);

void BM_CodebookBuild(benchmark::State& state) {
  const Scene s(5);
  Rng rng(1);
  const ris::CodebookBuilder builder(20, 2, 64, 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(builder.build(s.channels));
}
BENCHMARK(BM_CodebookBuild);

void BM_CnnForward(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  const predictors::LosClassifier cnn(s.cfg.cnn_config(), 1);
  std::vector<predictors::SceneImage> images;
  for (std::size_t k = 0; k < s.users.size(); ++k) {
    images.push_back(predictors::rasterize_scene(s.cfg.room_geometry(), s.cfg.placement.mec, s.cfg.placement.obstacles,
                                                 s.users, k));
  }
  std::vector<const predictors::SceneImage*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  for (auto _ : state) benchmark::DoNotOptimize(cnn.probabilities(ptrs));
}
BENCHMARK(BM_CnnForward)->Arg(5)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_AgentTrainStep(benchmark::State& state) {
  ris::AgentConfig cfg;
  cfg.warmup = 0;
  ris::CdqnAgent agent(cfg, 25, 64, 1);
  Rng rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 512; ++i) {
    ris::Transition t;
    t.state.features.resize(25);
    t.next.features.resize(25);
    for (auto& x : t.state.features) x = g(rng);
    for (auto& x : t.next.features) x = g(rng);
    t.action = static_cast<std::size_t>(i % 64);
    t.reward = g(rng);
    agent.store(std::move(t));
  }
  for (auto _ : state) benchmark::DoNotOptimize(agent.train_step(rng));
}
BENCHMARK(BM_AgentTrainStep)->Unit(benchmark::kMicrosecond);

sim::SimConfig slot_config(sim::PredictorMode predictors) {
  sim::SimConfig c;
  c.run.predictors = predictors;
  c.run.slots = 1000000;
  return c;
}

void BM_SlotGenie(benchmark::State& state) {
  const auto cfg = slot_config(sim::PredictorMode::Genie);
  sim::Learners learners(cfg, nullptr);
  sim::World world(cfg, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_slot(world, learners, cfg));
}
BENCHMARK(BM_SlotGenie)->Unit(benchmark::kMillisecond);

void BM_SlotLearned(benchmark::State& state) {
  const auto cfg = slot_config(sim::PredictorMode::Learned);
  // Untrained weights cost the same per slot as trained ones.
  const predictors::LosClassifier cnn(cfg.cnn_config(), 1);
  sim::Learners learners(cfg, &cnn);
  sim::World world(cfg, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_slot(world, learners, cfg));
}
BENCHMARK(BM_SlotLearned)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
