// SPDX-License-Identifier: Apache-2.0
//
// thzvr command-line front end.

#include <malloc.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thzvr/errors.hpp"
#include "thzvr/nn/grad_check.hpp"
#include "thzvr/predictors/los_cnn.hpp"
#include "thzvr/sim/config.hpp"
#include "thzvr/sim/experiment.hpp"
#include "thzvr/util/format.hpp"

namespace fs = std::filesystem;
using namespace thzvr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

sim::SimConfig load(const std::string& path) {
  const auto loaded = path.empty() ? sim::parse_config("", sim::environment_overrides()) : sim::load_config(path);
  for (const auto& key : loaded.overridden) std::cerr << "override from environment: " << key << "\n";
  if (!loaded.defaulted.empty()) std::cerr << loaded.defaulted.size() << " keys use defaults\n";
  return loaded.config;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

// --- emit-plots -------------------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

std::ofstream create(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Mean of `value` grouped by the integer key column, keys ascending.
std::map<long, std::pair<double, double>> group_mean(const Table& t, const std::string& key, const std::string& value,
                                                     bool absolute_difference_with = false,
                                                     const std::string& other = "") {
  std::map<long, std::pair<double, double>> acc;  // key -> (sum, count)
  const std::size_t k = t.column(key);
  const std::size_t v = t.column(value);
  const std::size_t o = absolute_difference_with ? t.column(other) : 0;
  for (const auto& row : t.rows) {
    double x = std::stod(row[v]);
    if (absolute_difference_with) x = std::abs(x - std::stod(row[o]));
    auto& a = acc[std::stol(row[k])];
    a.first += x;
    a.second += 1;
  }
  return acc;
}

void emit_plots(const fs::path& in, const fs::path& out) {
  fs::create_directories(out);
  int written = 0;
  if (fs::exists(in / "slots.csv")) {
    const Table slots = read_csv(in / "slots.csv");
    auto f8 = create(out / "fig8_viewpoint_abs_error_vs_slot.csv");
    f8 << "slot,mean_abs_error_deg\n";
    for (const auto& [slot, a] : group_mean(slots, "slot", "viewpoint_pred", true, "viewpoint")) {
      f8 << slot << ',' << util::fmt(a.first / a.second) << '\n';
    }
    auto f12 = create(out / "fig12_qoe_vs_slot.csv");
    f12 << "slot,mean_qoe\n";
    for (const auto& [slot, a] : group_mean(slots, "slot", "qoe")) f12 << slot << ',' << util::fmt(a.first / a.second) << '\n';
    written += 2;
  }
  if (fs::exists(in / "episodes.csv")) {
    const Table eps = read_csv(in / "episodes.csv");
    const std::size_t ep = eps.column("episode");
    const std::size_t rw = eps.column("mean_reward");
    const std::size_t acc = eps.column("los_accuracy");
    auto f11 = create(out / "fig11_reward_vs_episode.csv");
    f11 << "episode,mean_reward,rolling50_mean_reward\n";
    std::vector<double> rewards;
    for (const auto& row : eps.rows) {
      rewards.push_back(std::stod(row[rw]));
      const std::size_t from = rewards.size() > 50 ? rewards.size() - 50 : 0;
      double s = 0;
      for (std::size_t i = from; i < rewards.size(); ++i) s += rewards[i];
      f11 << row[ep] << ',' << row[rw] << ',' << util::fmt(s / static_cast<double>(rewards.size() - from)) << '\n';
    }
    auto f10 = create(out / "fig10_los_accuracy_vs_episode.csv");
    f10 << "episode,los_accuracy\n";
    for (const auto& row : eps.rows) f10 << row[ep] << ',' << row[acc] << '\n';
    written += 2;
  }
  if (fs::exists(in / "sweep.csv")) {
    const Table sw = read_csv(in / "sweep.csv");
    const std::size_t axis = sw.column("axis");
    for (const std::string name : {"users", "ris-elements"}) {
      std::vector<const std::vector<std::string>*> rows;
      for (const auto& r : sw.rows) {
        if (r[axis] == name) rows.push_back(&r);
      }
      if (rows.empty()) continue;
      auto f = create(out / (name == "users" ? "fig13_qoe_latency_vs_users.csv" : "fig14_qoe_latency_vs_ris_elements.csv"));
      f << "value,mean_qoe,se_qoe,mean_t_vr,se_t_vr\n";
      for (const auto* r : rows) {
        f << (*r)[sw.column("value")] << ',' << (*r)[sw.column("mean_qoe")] << ',' << (*r)[sw.column("se_qoe")] << ','
          << (*r)[sw.column("mean_t_vr")] << ',' << (*r)[sw.column("se_t_vr")] << '\n';
      }
      ++written;
    }
  }
  if (written == 0) throw std::runtime_error("no slots.csv, episodes.csv or sweep.csv under " + in.string());
  std::cout << "wrote " << written << " files to " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large Eigen temporaries on the heap instead of mmap/munmap round trips.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"THz VR network simulator with RIS control and learned predictors"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";

  auto* simulate = app.add_subcommand("simulate", "Run episodes and write metrics");
  std::optional<std::uint64_t> seed;
  std::string mode, predictors_mode, viewpoint_mode;
  std::optional<std::size_t> episodes, slots;
  std::string checkpoint;
  simulate->add_option("--config", config_path, "JSON config (defaults when omitted)");
  simulate->add_option("--seed", seed);
  simulate->add_option("--mode", mode)->check(CLI::IsMember({"cdrl", "exhaustive", "random"}));
  simulate->add_option("--predictors", predictors_mode)->check(CLI::IsMember({"genie", "learned"}));
  simulate->add_option("--viewpoint", viewpoint_mode)->check(CLI::IsMember({"centralized", "fedavg"}));
  simulate->add_option("--episodes", episodes);
  simulate->add_option("--slots", slots);
  simulate->add_option("--cnn", checkpoint, "LoS CNN checkpoint (overrides cnn.checkpoint)");
  simulate->add_option("--out", out_dir);

  auto* sweep = app.add_subcommand("sweep", "Vary one axis and write sweep.csv");
  std::string axis, values;
  sweep->add_option("--config", config_path);
  sweep->add_option("--axis", axis)->required()->check(CLI::IsMember({"users", "ris-elements"}));
  sweep->add_option("--values", values, "comma-separated list")->required();
  sweep->add_option("--cnn", checkpoint);
  sweep->add_option("--out", out_dir);

  auto* pretrain = app.add_subcommand("pretrain-cnn", "Train the LoS classifier on generated scenes");
  std::size_t scenes = 300;
  std::size_t epochs = 30;
  std::string user_counts = "5,10,15,20,25";
  std::string ckpt_out;
  pretrain->add_option("--config", config_path);
  pretrain->add_option("--scenes", scenes, "scenes per user count");
  pretrain->add_option("--epochs", epochs);
  pretrain->add_option("--users", user_counts, "user counts to mix");
  pretrain->add_option("--out", ckpt_out)->required();

  auto* gradcheck = app.add_subcommand("grad-check", "Finite-difference checks of every layer and cell");
  double tol = 1e-4;
  gradcheck->add_option("--tol", tol);

  auto* plots = app.add_subcommand("emit-plots", "Per-figure CSVs from a simulate or sweep output directory");
  std::string in_dir, plots_out;
  plots->add_option("--in", in_dir)->required();
  plots->add_option("--out", plots_out, "defaults to <in>/plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      sim::SimConfig cfg = load(config_path);
      if (seed) cfg.run.seed = *seed;
      if (!mode.empty()) cfg.run.mode = sim::parse_control_mode(mode);
      if (!predictors_mode.empty()) cfg.run.predictors = sim::parse_predictor_mode(predictors_mode);
      if (!viewpoint_mode.empty()) cfg.viewpoint.mode = sim::parse_viewpoint_mode(viewpoint_mode);
      if (episodes) cfg.run.episodes = *episodes;
      if (slots) cfg.run.slots = *slots;
      if (!checkpoint.empty()) cfg.cnn.checkpoint = checkpoint;
      cfg.validate();
      const auto r = sim::run_experiment(cfg, out_dir, nullptr, [](std::size_t e, const sim::EpisodeSummary& s) {
        std::cerr << "episode " << e << " mean_qoe " << util::fmt(s.mean_qoe) << " mean_t_vr " << util::fmt(s.mean_t_vr)
                  << "\n";
      });
      std::cout << "mean_qoe " << util::fmt(r.qoe.mean) << " +- " << util::fmt(r.qoe.se) << ", metrics in " << out_dir
                << "\n";
    } else if (sweep->parsed()) {
      sim::SimConfig cfg = load(config_path);
      if (!checkpoint.empty()) cfg.cnn.checkpoint = checkpoint;
      std::unique_ptr<predictors::LosClassifier> cnn;
      if (cfg.run.predictors == sim::PredictorMode::Learned && !cfg.cnn.checkpoint.empty()) cnn = sim::prepare_cnn(cfg);
      const auto points = sim::run_sweep(cfg, sim::parse_sweep_axis(axis), parse_list(values), out_dir, cnn.get());
      for (const auto& p : points) {
        std::cout << axis << '=' << util::fmt(p.value) << " mean_qoe " << util::fmt(p.result.qoe.mean) << " mean_t_vr "
                  << util::fmt(p.result.t_vr.mean) << "\n";
      }
    } else if (pretrain->parsed()) {
      const sim::SimConfig cfg = load(config_path);
      std::vector<std::size_t> counts;
      for (const double v : parse_list(user_counts)) counts.push_back(static_cast<std::size_t>(v));
      predictors::SceneSampler sampler{cfg.room_geometry(), cfg.placement.mec, cfg.placement.obstacles,
                                       cfg.users.min_height, cfg.users.max_height, cfg.users.colinear_tol};
      Rng rng(derive_seed(cfg.run.seed, 77));
      const auto train = predictors::generate_los_dataset(sampler, counts, scenes, rng);
      predictors::LosClassifier model(cfg.cnn_config(), derive_seed(cfg.run.seed, 5));
      const auto losses = predictors::train_los_classifier(model, train, epochs, rng);
      model.save(ckpt_out);
      std::cout << "trained on " << train.size() << " images, final loss " << util::fmt(losses.back()) << "\n";
      for (const std::size_t k : counts) {
        const auto held = predictors::generate_los_dataset(sampler, {k}, std::max<std::size_t>(20, scenes / 5), rng);
        std::cout << "K=" << k << " held-out accuracy " << util::fmt(predictors::los_accuracy(model, held)) << "\n";
      }
    } else if (gradcheck->parsed()) {
      bool ok = true;
      for (const auto& c : nn::grad_check_suite(tol)) {
        std::cout << c.name << ": max rel error " << util::fmt(c.report.max_rel_error) << " over " << c.report.checked
                  << " entries " << (c.report.passed ? "ok" : "FAIL") << "\n";
        ok = ok && c.report.passed;
      }
      return ok ? 0 : kExitRuntime;
    } else if (plots->parsed()) {
      emit_plots(in_dir, plots_out.empty() ? fs::path(in_dir) / "plots" : fs::path(plots_out));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
