// SPDX-License-Identifier: Apache-2.0

#include "thzvr/sim/experiment.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <memory>
#include <thread>

#include <json.hpp>

#include "thzvr/errors.hpp"
#include "thzvr/util/format.hpp"

namespace thzvr::sim {

ExperimentResult run_experiment(const SimConfig& cfg, const std::filesystem::path& out_dir,
                                const predictors::LosClassifier* cnn, const EpisodeCallback& on_episode,
                                std::vector<SlotMetrics>* records) {
  cfg.validate();
  ExperimentResult result;
  result.cnn_source = "none";
  std::unique_ptr<predictors::LosClassifier> owned;
  if (cfg.run.predictors == PredictorMode::Learned) {
    if (cnn) {
      result.cnn_source = cfg.cnn.checkpoint.empty() ? "provided" : "checkpoint:" + cfg.cnn.checkpoint;
    } else {
      owned = prepare_cnn(cfg, &result.cnn_source);
      cnn = owned.get();
    }
  }
  Learners learners(cfg, cnn);

  std::unique_ptr<MetricsWriter> writer;
  if (!out_dir.empty()) writer = std::make_unique<MetricsWriter>(out_dir, cfg);

  std::vector<double> qoe, t_vr, reward;
  for (std::size_t e = 0; e < cfg.run.episodes; ++e) {
    auto slots = run_episode(cfg, learners, e);
    const EpisodeSummary s = summarize_episode(slots, cfg);
    if (writer) writer->write_episode(slots, s);
    if (on_episode) on_episode(e, s);
    result.episodes.push_back(s);
    qoe.push_back(s.mean_qoe);
    t_vr.push_back(s.mean_t_vr);
    reward.push_back(s.mean_reward);
    if (records) records->insert(records->end(), std::make_move_iterator(slots.begin()), std::make_move_iterator(slots.end()));
  }
  result.qoe = mean_se(qoe);
  result.t_vr = mean_se(t_vr);
  result.reward = mean_se(reward);
  if (writer) writer->finish(summary_json(cfg, result));
  return result;
}

std::string summary_json(const SimConfig& cfg, const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(cfg.run.mode);
  j["predictors"] = to_string(cfg.run.predictors);
  j["viewpoint"] = to_string(cfg.viewpoint.mode);
  j["cnn"] = r.cnn_source;
  j["direction_warm_start_epochs"] = cfg.direction.warm_start_epochs;
  j["users"] = cfg.users.count;
  j["ris_elements"] = cfg.radio.ris_elements;
  j["seed"] = cfg.run.seed;
  j["episodes"] = r.episodes.size();
  j["slots"] = cfg.run.slots;
  j["rate_threshold"] = cfg.rate_threshold();
  j["mean_qoe"] = r.qoe.mean;
  j["se_qoe"] = r.qoe.se;
  j["mean_t_vr"] = r.t_vr.mean;
  j["se_t_vr"] = r.t_vr.se;
  j["mean_reward"] = r.reward.mean;
  j["se_reward"] = r.reward.se;
  auto& per = j["episode_mean_qoe"] = nlohmann::ordered_json::array();
  for (const auto& e : r.episodes) per.push_back(e.mean_qoe);
  return j.dump(2) + "\n";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "users") return SweepAxis::Users;
  if (s == "ris-elements") return SweepAxis::RisElements;
  throw ConfigError("sweep axis: expected users|ris-elements, got '" + s + "'");
}

const char* to_string(SweepAxis a) { return a == SweepAxis::Users ? "users" : "ris-elements"; }

namespace {

SimConfig point_config(const SimConfig& base, SweepAxis axis, double value) {
  SimConfig c = base;
  if (value < 1 || value != static_cast<double>(static_cast<long long>(value))) {
    throw ConfigError(std::string("sweep ") + to_string(axis) + ": values must be positive integers");
  }
  if (axis == SweepAxis::Users) {
    c.users.count = static_cast<std::size_t>(value);
  } else {
    c.radio.ris_elements = static_cast<int>(value);
  }
  c.validate();
  return c;
}

std::string point_dir(SweepAxis axis, double value) {
  return std::string(axis == SweepAxis::Users ? "users_" : "ris-elements_") + std::to_string(static_cast<long long>(value));
}

}  // namespace

std::vector<SweepPoint> run_sweep(const SimConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                  const std::filesystem::path& out_dir, const predictors::LosClassifier* cnn) {
  std::vector<SimConfig> configs;
  for (const double v : values) configs.push_back(point_config(cfg, axis, v));

  std::vector<SweepPoint> points(values.size());
  std::vector<std::exception_ptr> errors(values.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        const auto dir = out_dir.empty() ? std::filesystem::path{} : out_dir / point_dir(axis, values[i]);
        points[i] = {values[i], run_experiment(configs[i], dir, cnn)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(cfg.run.workers, values.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / "sweep.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / "sweep.csv").string());
    f << kSweepCsvHeader << '\n';
    for (const auto& p : points) {
      const auto& r = p.result;
      f << to_string(axis) << ',' << util::fmt(p.value) << ',' << r.episodes.size() << ',' << util::fmt(r.qoe.mean)
        << ',' << util::fmt(r.qoe.se) << ',' << util::fmt(r.t_vr.mean) << ',' << util::fmt(r.t_vr.se) << ','
        << util::fmt(r.reward.mean) << ',' << util::fmt(r.reward.se) << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + (out_dir / "sweep.csv").string());
  }
  return points;
}

}  // namespace thzvr::sim
