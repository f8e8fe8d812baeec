// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "thzvr/channel.hpp"
#include "thzvr/geometry.hpp"
#include "thzvr/predictors/direction.hpp"
#include "thzvr/predictors/los_cnn.hpp"
#include "thzvr/predictors/viewpoint.hpp"
#include "thzvr/ris_control.hpp"

namespace thzvr::sim {

enum class ControlMode { Cdrl, Exhaustive, Random };
enum class PredictorMode { Genie, Learned };

const char* to_string(ControlMode m);
const char* to_string(PredictorMode m);
const char* to_string(predictors::ViewpointMode m);
const char* to_string(ris::ExhaustiveScope s);
ControlMode parse_control_mode(const std::string& s);
PredictorMode parse_predictor_mode(const std::string& s);
predictors::ViewpointMode parse_viewpoint_mode(const std::string& s);

struct RoomSection {
  double width = 20.0;
  double height = 3.0;
  double grid = 1.0;
};

struct PlacementSection {
  geometry::Position3 mec{0.0, 0.0, 3.0};
  double mec_broadside = 0.7853981633974483;  // facing the room diagonal
  geometry::Position3 ris{10.0, 20.0, 3.0};
  double ris_broadside = -1.5707963267948966;  // facing into the room from the far wall
  std::vector<geometry::Obstacle> obstacles{{4.0, 8.0, 8.0, 12.0, 3.0}, {12.0, 16.0, 8.0, 12.0, 3.0}};
};

struct UsersSection {
  std::size_t count = 5;
  double min_height = 1.2;
  double max_height = 1.8;
  double speed = 1.0;
  double colinear_tol = 0.3;
};

struct RadioSection {
  double frequency_hz = 3e11;
  std::vector<std::pair<double, double>> absorption{{3e11, 0.0033}};
  std::string absorption_file;  // overrides `absorption` when set
  int mec_antennas = 30;
  int ris_elements = 20;
  int phase_bits = 2;
  double ris_gain = 1.0;
  double tx_power_w = 1.0;
  double bandwidth_hz = 1e9;
  double noise_dbm = -110.0;
  double fading_std = 0.0;
};

struct FovSection {
  std::int64_t n_p = 3840;
  std::int64_t n_v = 2160;
  double compression_ratio = 6000.0;
  double hit_tolerance_deg = 15.0;
  double packet_bits = 192.0;  // viewpoint + position upload
};

struct MecSection {
  double cycles_per_bit = 1000.0;
  double cycles_per_second = 5e9;
};

struct LatencySection {
  double t_th_downlink = 0.012;
  double t_th_vr = 0.020;
  double cap = 1.0;  // dead links count as this many seconds in aggregates and costs
};

struct QoeSection {
  double q_min = -20.0;
  double q_max = 20.0;
};

struct ViewpointSection {
  predictors::ViewpointMode mode = predictors::ViewpointMode::Centralized;
  std::size_t window = 10;
  std::size_t hidden = 64;
  double lr = 0.05;
  std::size_t local_steps = 3;
  std::string trace_file;  // CSV traces; synthetic when empty
};

struct DirectionSection {
  std::size_t window = 10;
  std::size_t hidden = 64;
  double lr = 0.005;
  double pretrain_lr = 0.05;
  std::size_t minibatch = 64;
  std::size_t replay_capacity = 4096;
  std::size_t warm_start_epochs = 0;  // offline epochs on generated walks before the first episode
  std::size_t warm_start_walkers = 20;
};

struct CnnSection {
  std::size_t filters = 64;
  std::size_t dense = 128;
  double lr = 1e-3;
  std::size_t minibatch = 64;
  std::string checkpoint;  // loaded when set, otherwise trained in-process
  std::size_t pretrain_scenes = 200;
  std::size_t pretrain_epochs = 20;
};

struct AgentSection {
  ris::AgentConfig agent;
  std::size_t codebook_size = 64;
  ris::ExhaustiveScope exhaustive_scope = ris::ExhaustiveScope::Auto;
  std::uint64_t exhaustive_guard = ris::kExhaustiveGuard;
};

struct RunSection {
  ControlMode mode = ControlMode::Cdrl;
  PredictorMode predictors = PredictorMode::Learned;
  std::size_t slots = 300;
  std::size_t episodes = 1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // sweep points run in parallel
  bool slot_records = true;  // write slots.csv / slots.jsonl
};

struct SimConfig {
  RoomSection room;
  PlacementSection placement;
  UsersSection users;
  RadioSection radio;
  FovSection fov;
  MecSection mec;
  LatencySection latency;
  QoeSection qoe;
  ViewpointSection viewpoint;
  DirectionSection direction;
  CnnSection cnn;
  AgentSection agent;
  RunSection run;

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  geometry::Room room_geometry() const { return {room.width, room.height, room.grid}; }
  channel::ChannelParams channel_params() const;
  predictors::ViewpointLearnerConfig viewpoint_config() const;
  predictors::DirectionConfig direction_config() const;
  predictors::LosCnnConfig cnn_config() const;
  /// Compressed FoV payload in bits.
  double payload_bits() const;
  /// Rate at which the payload just meets the downlink threshold.
  double rate_threshold() const;
};

struct LoadedConfig {
  SimConfig config;
  std::vector<std::string> defaulted;   // "section.key" paths filled from defaults
  std::vector<std::string> overridden;  // paths set from the environment
};

/// Parses JSON (comments allowed). Unknown sections or keys, wrong types and invariant violations
/// raise ConfigError. An empty document yields the defaults.
LoadedConfig parse_config(const std::string& text, const std::map<std::string, std::string>& env = {});
/// parse_config on the file contents, with overrides from THZVR_<SECTION>__<KEY> variables.
LoadedConfig load_config(const std::filesystem::path& path);
/// Override map from the process environment.
std::map<std::string, std::string> environment_overrides();

/// Every key with its effective value.
std::string dump_config(const SimConfig& cfg);
void save_config(const SimConfig& cfg, const std::filesystem::path& path);

bool operator==(const SimConfig& a, const SimConfig& b);

}  // namespace thzvr::sim
