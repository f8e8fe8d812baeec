// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "thzvr/predictors/los_cnn.hpp"
#include "thzvr/sim/config.hpp"
#include "thzvr/sim/metrics.hpp"

namespace thzvr::sim {

struct ExperimentResult {
  std::vector<EpisodeSummary> episodes;
  std::string cnn_source;  // "none", "in-process" or "checkpoint:<path>"
  MeanSe qoe;              // over episode means
  MeanSe t_vr;
  MeanSe reward;
};

/// Called after each episode with (episode index, its summary).
using EpisodeCallback = std::function<void(std::size_t, const EpisodeSummary&)>;

/// Runs cfg.run.episodes episodes with learners carried across them. Writes the metrics files to
/// `out_dir` unless it is empty. In learned mode `cnn` is used when given, otherwise prepared from
/// the configuration. `records` optionally receives every slot record.
ExperimentResult run_experiment(const SimConfig& cfg, const std::filesystem::path& out_dir,
                                const predictors::LosClassifier* cnn = nullptr,
                                const EpisodeCallback& on_episode = {},
                                std::vector<SlotMetrics>* records = nullptr);

std::string summary_json(const SimConfig& cfg, const ExperimentResult& r);

enum class SweepAxis { Users, RisElements };
SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis a);

struct SweepPoint {
  double value = 0.0;
  ExperimentResult result;
};

/// One experiment per value with only that axis changed. Points run on cfg.run.workers threads;
/// each point writes under `out_dir/<axis>_<value>/` and the merged table goes to
/// `out_dir/sweep.csv`. Results come back in input order.
std::vector<SweepPoint> run_sweep(const SimConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                  const std::filesystem::path& out_dir, const predictors::LosClassifier* cnn = nullptr);

inline const char* kSweepCsvHeader = "axis,value,episodes,mean_qoe,se_qoe,mean_t_vr,se_t_vr,mean_reward,se_reward";

}  // namespace thzvr::sim
