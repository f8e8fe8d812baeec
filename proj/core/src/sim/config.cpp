// SPDX-License-Identifier: Apache-2.0

#include "thzvr/sim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "thzvr/errors.hpp"
#include "thzvr/latency_qoe.hpp"

extern char** environ;

namespace thzvr::sim {

using nlohmann::json;

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::Cdrl: return "cdrl";
    case ControlMode::Exhaustive: return "exhaustive";
    case ControlMode::Random: return "random";
  }
  return "?";
}

const char* to_string(PredictorMode m) { return m == PredictorMode::Genie ? "genie" : "learned"; }

const char* to_string(predictors::ViewpointMode m) {
  return m == predictors::ViewpointMode::Centralized ? "centralized" : "fedavg";
}

const char* to_string(ris::ExhaustiveScope s) {
  switch (s) {
    case ris::ExhaustiveScope::Auto: return "auto";
    case ris::ExhaustiveScope::Full: return "full";
    case ris::ExhaustiveScope::Codebook: return "codebook";
  }
  return "?";
}

ControlMode parse_control_mode(const std::string& s) {
  if (s == "cdrl") return ControlMode::Cdrl;
  if (s == "exhaustive") return ControlMode::Exhaustive;
  if (s == "random") return ControlMode::Random;
  throw ConfigError("run.mode: expected cdrl|exhaustive|random, got '" + s + "'");
}

PredictorMode parse_predictor_mode(const std::string& s) {
  if (s == "genie") return PredictorMode::Genie;
  if (s == "learned" || s == "predicted") return PredictorMode::Learned;
  throw ConfigError("run.predictors: expected genie|learned, got '" + s + "'");
}

predictors::ViewpointMode parse_viewpoint_mode(const std::string& s) {
  if (s == "centralized") return predictors::ViewpointMode::Centralized;
  if (s == "fedavg") return predictors::ViewpointMode::FedAvg;
  throw ConfigError("viewpoint.mode: expected centralized|fedavg, got '" + s + "'");
}

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed and guard fields reuse the size_t reader");

ris::ExhaustiveScope parse_scope(const std::string& s) {
  if (s == "auto") return ris::ExhaustiveScope::Auto;
  if (s == "full") return ris::ExhaustiveScope::Full;
  if (s == "codebook") return ris::ExhaustiveScope::Codebook;
  throw ConfigError("agent.exhaustive_scope: expected auto|full|codebook, got '" + s + "'");
}

// --- typed conversions ------------------------------------------------------------------------

[[noreturn]] void type_error(const std::string& path, const char* what) {
  throw ConfigError(path + ": expected " + what);
}

void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) type_error(path, "a number");
  out = j.get<double>();
}

void read(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) type_error(path, "an integer");
  out = j.get<int>();
}

void read(const json& j, const std::string& path, std::int64_t& out) {
  if (!j.is_number_integer()) type_error(path, "an integer");
  out = j.get<std::int64_t>();
}

void read(const json& j, const std::string& path, std::size_t& out) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) type_error(path, "a non-negative integer");
  out = j.get<std::size_t>();
}

void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) type_error(path, "true or false");
  out = j.get<bool>();
}

void read(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) type_error(path, "a string");
  out = j.get<std::string>();
}

void read(const json& j, const std::string& path, geometry::Position3& out) {
  if (!j.is_array() || j.size() != 3) type_error(path, "[x, y, z]");
  for (const auto& v : j) {
    if (!v.is_number()) type_error(path, "[x, y, z]");
  }
  out = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read(const json& j, const std::string& path, std::vector<geometry::Obstacle>& out) {
  if (!j.is_array()) type_error(path, "a list of {x: [min, max], y: [min, max], height}");
  out.clear();
  for (const auto& o : j) {
    if (!o.is_object()) type_error(path, "obstacle objects");
    for (const auto& [k, v] : o.items()) {
      if (k != "x" && k != "y" && k != "height") throw ConfigError(path + ": unknown obstacle key '" + k + "'");
    }
    if (!o.contains("x") || !o.contains("y") || !o.contains("height")) {
      throw ConfigError(path + ": obstacle needs x, y and height");
    }
    const auto range = [&](const json& r) {
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
        type_error(path, "[min, max] ranges");
      }
      return std::pair{r[0].get<double>(), r[1].get<double>()};
    };
    geometry::Obstacle ob;
    std::tie(ob.x_min, ob.x_max) = range(o["x"]);
    std::tie(ob.y_min, ob.y_max) = range(o["y"]);
    read(o["height"], path + ".height", ob.height);
    out.push_back(ob);
  }
}

void read(const json& j, const std::string& path, std::vector<std::pair<double, double>>& out) {
  if (!j.is_array()) type_error(path, "a list of [hz, per_m] rows");
  out.clear();
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      type_error(path, "[hz, per_m] rows");
    }
    out.emplace_back(row[0].get<double>(), row[1].get<double>());
  }
}

json write(bool v) { return v; }
json write(double v) { return v; }
json write(int v) { return v; }
json write(std::int64_t v) { return v; }
json write(std::size_t v) { return v; }
json write(const std::string& v) { return v; }
json write(const geometry::Position3& p) { return json::array({p.x, p.y, p.z}); }
json write(const std::vector<geometry::Obstacle>& obs) {
  json out = json::array();
  for (const auto& o : obs) {
    out.push_back({{"x", {o.x_min, o.x_max}}, {"y", {o.y_min, o.y_max}}, {"height", o.height}});
  }
  return out;
}
json write(const std::vector<std::pair<double, double>>& rows) {
  json out = json::array();
  for (const auto& [f, t] : rows) out.push_back({f, t});
  return out;
}

// --- field registry ---------------------------------------------------------------------------

struct Field {
  std::string section;
  std::string key;
  std::function<void(const json&, const std::string&, SimConfig&)> read;
  std::function<json(const SimConfig&)> write;
};

template <typename Get>
Field plain(std::string section, std::string key, Get get) {
  return {std::move(section), std::move(key),
          [get](const json& j, const std::string& path, SimConfig& c) { read(j, path, get(c)); },
          [get](const SimConfig& c) { return write(get(const_cast<SimConfig&>(c))); }};
}

template <typename Get, typename Parse, typename Name>
Field enumerated(std::string section, std::string key, Get get, Parse parse, Name name) {
  return {std::move(section), std::move(key),
          [get, parse](const json& j, const std::string& path, SimConfig& c) {
            std::string s;
            read(j, path, s);
            get(c) = parse(s);
          },
          [get, name](const SimConfig& c) { return json(name(get(const_cast<SimConfig&>(c)))); }};
}

#define THZVR_FIELD(sec, member, key) plain(sec, key, [](SimConfig& c) -> auto& { return c.member; })

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(THZVR_FIELD("room", room.width, "width"));
    f.push_back(THZVR_FIELD("room", room.height, "height"));
    f.push_back(THZVR_FIELD("room", room.grid, "grid"));

    f.push_back(THZVR_FIELD("placement", placement.mec, "mec"));
    f.push_back(THZVR_FIELD("placement", placement.mec_broadside, "mec_broadside"));
    f.push_back(THZVR_FIELD("placement", placement.ris, "ris"));
    f.push_back(THZVR_FIELD("placement", placement.ris_broadside, "ris_broadside"));
    f.push_back(THZVR_FIELD("placement", placement.obstacles, "obstacles"));

    f.push_back(THZVR_FIELD("users", users.count, "count"));
    f.push_back(THZVR_FIELD("users", users.min_height, "min_height"));
    f.push_back(THZVR_FIELD("users", users.max_height, "max_height"));
    f.push_back(THZVR_FIELD("users", users.speed, "speed"));
    f.push_back(THZVR_FIELD("users", users.colinear_tol, "colinear_tol"));

    f.push_back(THZVR_FIELD("radio", radio.frequency_hz, "frequency_hz"));
    f.push_back(THZVR_FIELD("radio", radio.absorption, "absorption"));
    f.push_back(THZVR_FIELD("radio", radio.absorption_file, "absorption_file"));
    f.push_back(THZVR_FIELD("radio", radio.mec_antennas, "mec_antennas"));
    f.push_back(THZVR_FIELD("radio", radio.ris_elements, "ris_elements"));
    f.push_back(THZVR_FIELD("radio", radio.phase_bits, "phase_bits"));
    f.push_back(THZVR_FIELD("radio", radio.ris_gain, "ris_gain"));
    f.push_back(THZVR_FIELD("radio", radio.tx_power_w, "tx_power_w"));
    f.push_back(THZVR_FIELD("radio", radio.bandwidth_hz, "bandwidth_hz"));
    f.push_back(THZVR_FIELD("radio", radio.noise_dbm, "noise_dbm"));
    f.push_back(THZVR_FIELD("radio", radio.fading_std, "fading_std"));

    f.push_back(THZVR_FIELD("fov", fov.n_p, "n_p"));
    f.push_back(THZVR_FIELD("fov", fov.n_v, "n_v"));
    f.push_back(THZVR_FIELD("fov", fov.compression_ratio, "compression_ratio"));
    f.push_back(THZVR_FIELD("fov", fov.hit_tolerance_deg, "hit_tolerance_deg"));
    f.push_back(THZVR_FIELD("fov", fov.packet_bits, "packet_bits"));

    f.push_back(THZVR_FIELD("mec", mec.cycles_per_bit, "cycles_per_bit"));
    f.push_back(THZVR_FIELD("mec", mec.cycles_per_second, "cycles_per_second"));

    f.push_back(THZVR_FIELD("latency", latency.t_th_downlink, "t_th_downlink"));
    f.push_back(THZVR_FIELD("latency", latency.t_th_vr, "t_th_vr"));
    f.push_back(THZVR_FIELD("latency", latency.cap, "cap"));

    f.push_back(THZVR_FIELD("qoe", qoe.q_min, "q_min"));
    f.push_back(THZVR_FIELD("qoe", qoe.q_max, "q_max"));

    f.push_back(enumerated(
        "viewpoint", "mode", [](SimConfig& c) -> auto& { return c.viewpoint.mode; }, parse_viewpoint_mode,
        [](predictors::ViewpointMode m) { return to_string(m); }));
    f.push_back(THZVR_FIELD("viewpoint", viewpoint.window, "window"));
    f.push_back(THZVR_FIELD("viewpoint", viewpoint.hidden, "hidden"));
    f.push_back(THZVR_FIELD("viewpoint", viewpoint.lr, "lr"));
    f.push_back(THZVR_FIELD("viewpoint", viewpoint.local_steps, "local_steps"));
    f.push_back(THZVR_FIELD("viewpoint", viewpoint.trace_file, "trace_file"));

    f.push_back(THZVR_FIELD("direction", direction.window, "window"));
    f.push_back(THZVR_FIELD("direction", direction.hidden, "hidden"));
    f.push_back(THZVR_FIELD("direction", direction.lr, "lr"));
    f.push_back(THZVR_FIELD("direction", direction.pretrain_lr, "pretrain_lr"));
    f.push_back(THZVR_FIELD("direction", direction.minibatch, "minibatch"));
    f.push_back(THZVR_FIELD("direction", direction.replay_capacity, "replay_capacity"));
    f.push_back(THZVR_FIELD("direction", direction.warm_start_epochs, "warm_start_epochs"));
    f.push_back(THZVR_FIELD("direction", direction.warm_start_walkers, "warm_start_walkers"));

    f.push_back(THZVR_FIELD("cnn", cnn.filters, "filters"));
    f.push_back(THZVR_FIELD("cnn", cnn.dense, "dense"));
    f.push_back(THZVR_FIELD("cnn", cnn.lr, "lr"));
    f.push_back(THZVR_FIELD("cnn", cnn.minibatch, "minibatch"));
    f.push_back(THZVR_FIELD("cnn", cnn.checkpoint, "checkpoint"));
    f.push_back(THZVR_FIELD("cnn", cnn.pretrain_scenes, "pretrain_scenes"));
    f.push_back(THZVR_FIELD("cnn", cnn.pretrain_epochs, "pretrain_epochs"));

    f.push_back(THZVR_FIELD("agent", agent.agent.hidden, "hidden"));
    f.push_back(THZVR_FIELD("agent", agent.agent.hidden_layers, "hidden_layers"));
    f.push_back(THZVR_FIELD("agent", agent.agent.gamma, "gamma"));
    f.push_back(THZVR_FIELD("agent", agent.agent.lr, "lr"));
    f.push_back(THZVR_FIELD("agent", agent.agent.multiplier_lr, "multiplier_lr"));
    f.push_back(THZVR_FIELD("agent", agent.agent.replay_capacity, "replay_capacity"));
    f.push_back(THZVR_FIELD("agent", agent.agent.minibatch, "minibatch"));
    f.push_back(THZVR_FIELD("agent", agent.agent.warmup, "warmup"));
    f.push_back(THZVR_FIELD("agent", agent.agent.target_period, "target_period"));
    f.push_back(THZVR_FIELD("agent", agent.agent.epsilon_start, "epsilon_start"));
    f.push_back(THZVR_FIELD("agent", agent.agent.epsilon_end, "epsilon_end"));
    f.push_back(THZVR_FIELD("agent", agent.agent.epsilon_horizon, "epsilon_horizon"));
    f.push_back(THZVR_FIELD("agent", agent.agent.qoe_scale, "qoe_scale"));
    f.push_back(THZVR_FIELD("agent", agent.agent.reward_scale, "reward_scale"));
    f.push_back(THZVR_FIELD("agent", agent.agent.grad_clip, "grad_clip"));
    f.push_back(THZVR_FIELD("agent", agent.codebook_size, "codebook_size"));
    f.push_back(enumerated(
        "agent", "exhaustive_scope", [](SimConfig& c) -> auto& { return c.agent.exhaustive_scope; }, parse_scope,
        [](ris::ExhaustiveScope s) { return to_string(s); }));
    f.push_back(THZVR_FIELD("agent", agent.exhaustive_guard, "exhaustive_guard"));

    f.push_back(enumerated(
        "run", "mode", [](SimConfig& c) -> auto& { return c.run.mode; }, parse_control_mode,
        [](ControlMode m) { return to_string(m); }));
    f.push_back(enumerated(
        "run", "predictors", [](SimConfig& c) -> auto& { return c.run.predictors; }, parse_predictor_mode,
        [](PredictorMode m) { return to_string(m); }));
    f.push_back(THZVR_FIELD("run", run.slots, "slots"));
    f.push_back(THZVR_FIELD("run", run.episodes, "episodes"));
    f.push_back(THZVR_FIELD("run", run.seed, "seed"));
    f.push_back(THZVR_FIELD("run", run.workers, "workers"));
    f.push_back(THZVR_FIELD("run", run.slot_records, "slot_records"));
    return f;
  }();
  return fields;
}

#undef THZVR_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : registry()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  return std::any_of(registry().begin(), registry().end(), [&](const Field& f) { return f.section == section; });
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

// --- validation -------------------------------------------------------------------------------

void SimConfig::validate() const {
  require(room.width > 0, "room.width", "must be positive");
  require(room.height > 0, "room.height", "must be positive");
  require(room.grid > 0 && room.grid <= room.width, "room.grid", "must be in (0, width]");
  const auto inside = [&](const geometry::Position3& p) {
    return p.x >= 0 && p.x <= room.width && p.y >= 0 && p.y <= room.width && p.z >= 0 && p.z <= room.height;
  };
  require(inside(placement.mec), "placement.mec", "must lie inside the room");
  require(inside(placement.ris), "placement.ris", "must lie inside the room");
  for (const auto& o : placement.obstacles) {
    require(o.x_min >= 0 && o.x_min < o.x_max && o.x_max <= room.width, "placement.obstacles",
            "x range must be increasing and inside the room");
    require(o.y_min >= 0 && o.y_min < o.y_max && o.y_max <= room.width, "placement.obstacles",
            "y range must be increasing and inside the room");
    require(o.height > 0 && o.height <= room.height, "placement.obstacles", "height must be in (0, room.height]");
  }
  require(users.count > 0, "users.count", "must be at least 1");
  require(users.min_height > 0 && users.min_height <= users.max_height, "users.min_height",
          "must be positive and at most max_height");
  require(users.max_height < placement.mec.z, "users.max_height", "must be below the MEC height");
  require(users.speed > 0, "users.speed", "must be positive");
  require(users.colinear_tol >= 0, "users.colinear_tol", "must be non-negative");

  require(radio.frequency_hz > 0, "radio.frequency_hz", "must be positive");
  require(!radio.absorption.empty() || !radio.absorption_file.empty(), "radio.absorption", "needs at least one row");
  for (const auto& [f, t] : radio.absorption) {
    require(f > 0 && t >= 0, "radio.absorption", "rows need positive frequency and non-negative coefficient");
  }
  require(radio.mec_antennas > 0, "radio.mec_antennas", "must be positive");
  require(radio.ris_elements > 0, "radio.ris_elements", "must be positive");
  require(radio.phase_bits >= 1 && radio.phase_bits <= 8, "radio.phase_bits", "must be in [1, 8]");
  require(radio.ris_gain > 0, "radio.ris_gain", "must be positive");
  require(radio.tx_power_w > 0, "radio.tx_power_w", "must be positive");
  require(radio.bandwidth_hz > 0, "radio.bandwidth_hz", "must be positive");
  require(std::isfinite(radio.noise_dbm), "radio.noise_dbm", "must be finite");
  require(radio.fading_std >= 0, "radio.fading_std", "must be non-negative");

  require(fov.n_p > 0, "fov.n_p", "must be positive");
  require(fov.n_v > 0, "fov.n_v", "must be positive");
  require(fov.compression_ratio >= 1, "fov.compression_ratio", "must be at least 1");
  require(fov.hit_tolerance_deg >= 0, "fov.hit_tolerance_deg", "must be non-negative");
  require(fov.packet_bits > 0, "fov.packet_bits", "must be positive");
  require(mec.cycles_per_bit > 0, "mec.cycles_per_bit", "must be positive");
  require(mec.cycles_per_second > 0, "mec.cycles_per_second", "must be positive");
  require(latency.t_th_downlink > 0, "latency.t_th_downlink", "must be positive");
  require(latency.t_th_vr > 0, "latency.t_th_vr", "must be positive");
  require(latency.cap > 0, "latency.cap", "must be positive");
  require(qoe.q_min < qoe.q_max, "qoe.q_min", "must be below q_max");

  require(viewpoint.window > 0, "viewpoint.window", "must be positive");
  require(viewpoint.hidden > 0, "viewpoint.hidden", "must be positive");
  require(viewpoint.lr >= 0, "viewpoint.lr", "must be non-negative");
  require(viewpoint.local_steps > 0, "viewpoint.local_steps", "must be positive");
  require(direction.window > 0, "direction.window", "must be positive");
  require(direction.hidden > 0, "direction.hidden", "must be positive");
  require(direction.lr >= 0, "direction.lr", "must be non-negative");
  require(direction.pretrain_lr >= 0, "direction.pretrain_lr", "must be non-negative");
  require(direction.minibatch > 0, "direction.minibatch", "must be positive");
  require(direction.replay_capacity > 0, "direction.replay_capacity", "must be positive");
  require(cnn.filters > 0, "cnn.filters", "must be positive");
  require(cnn.dense > 0, "cnn.dense", "must be positive");
  require(cnn.lr > 0, "cnn.lr", "must be positive");
  require(cnn.minibatch > 0, "cnn.minibatch", "must be positive");

  const auto& a = agent.agent;
  require(a.hidden > 0, "agent.hidden", "must be positive");
  require(a.gamma >= 0 && a.gamma < 1, "agent.gamma", "must be in [0, 1)");
  require(a.lr > 0, "agent.lr", "must be positive");
  require(a.multiplier_lr >= 0, "agent.multiplier_lr", "must be non-negative");
  require(a.replay_capacity > 0, "agent.replay_capacity", "must be positive");
  require(a.minibatch > 0 && a.minibatch <= a.replay_capacity, "agent.minibatch",
          "must be positive and at most replay_capacity");
  require(a.target_period > 0, "agent.target_period", "must be positive");
  require(a.epsilon_start >= 0 && a.epsilon_start <= 1, "agent.epsilon_start", "must be in [0, 1]");
  require(a.epsilon_end >= 0 && a.epsilon_end <= 1, "agent.epsilon_end", "must be in [0, 1]");
  require(a.qoe_scale > 0, "agent.qoe_scale", "must be positive");
  require(a.reward_scale > 0, "agent.reward_scale", "must be positive");
  require(a.grad_clip >= 0, "agent.grad_clip", "must be non-negative");
  require(agent.codebook_size >= 2, "agent.codebook_size", "must be at least 2");
  require(agent.exhaustive_guard >= 1, "agent.exhaustive_guard", "must be at least 1");

  require(run.slots > 0, "run.slots", "must be positive");
  require(run.episodes > 0, "run.episodes", "must be positive");
  require(run.workers > 0, "run.workers", "must be positive");
}

channel::ChannelParams SimConfig::channel_params() const {
  channel::ChannelParams p;
  p.frequency_hz = radio.frequency_hz;
  const auto table = radio.absorption_file.empty() ? channel::AbsorptionTable(radio.absorption)
                                                   : channel::AbsorptionTable::load(radio.absorption_file);
  p.absorption_per_m = table.coefficient(radio.frequency_hz);
  p.mec_antennas = radio.mec_antennas;
  p.ris_elements = radio.ris_elements;
  p.ris_gain = radio.ris_gain;
  return p;
}

predictors::ViewpointLearnerConfig SimConfig::viewpoint_config() const {
  predictors::ViewpointLearnerConfig c;
  c.model.window = viewpoint.window;
  c.model.hidden = viewpoint.hidden;
  c.mode = viewpoint.mode;
  c.lr = viewpoint.lr;
  c.local_steps = viewpoint.local_steps;
  return c;
}

predictors::DirectionConfig SimConfig::direction_config() const {
  predictors::DirectionConfig c;
  c.window = direction.window;
  c.hidden = direction.hidden;
  c.lr = direction.lr;
  c.pretrain_lr = direction.pretrain_lr;
  c.minibatch = direction.minibatch;
  c.replay_capacity = direction.replay_capacity;
  c.room_width = room.width;
  c.speed = users.speed;
  return c;
}

predictors::LosCnnConfig SimConfig::cnn_config() const {
  predictors::LosCnnConfig c;
  c.side = static_cast<std::size_t>(room_geometry().cells_per_side());
  c.filters = cnn.filters;
  c.dense = cnn.dense;
  c.lr = cnn.lr;
  c.minibatch = cnn.minibatch;
  return c;
}

double SimConfig::payload_bits() const { return qoe::fov_size_bits(fov.n_p, fov.n_v) / fov.compression_ratio; }

double SimConfig::rate_threshold() const {
  return payload_bits() / (radio.bandwidth_hz * latency.t_th_downlink);
}

// --- parsing ----------------------------------------------------------------------------------

LoadedConfig parse_config(const std::string& text, const std::map<std::string, std::string>& env) {
  json doc;
  const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
  if (!blank) {
    try {
      doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  } else {
    doc = json::object();
  }

  for (const auto& [section, body] : doc.items()) {
    if (!known_section(section)) throw ConfigError("config: unknown section '" + section + "'");
    if (!body.is_object()) throw ConfigError(section + ": expected an object");
    for (const auto& [key, value] : body.items()) {
      if (!find_field(section, key)) throw ConfigError(section + ": unknown key '" + key + "'");
    }
  }

  LoadedConfig out;
  for (const auto& [name, raw] : env) {
    const auto split = name.find("__");
    if (split == std::string::npos) throw ConfigError("environment: malformed override name '" + name + "'");
    const std::string section = lower(name.substr(0, split));
    const std::string key = lower(name.substr(split + 2));
    if (!find_field(section, key)) {
      throw ConfigError("environment: override '" + name + "' matches no key " + section + "." + key);
    }
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    doc[section][key] = value;
    out.overridden.push_back(section + "." + key);
  }

  for (const auto& f : registry()) {
    const std::string path = f.section + "." + f.key;
    if (doc.contains(f.section) && doc[f.section].contains(f.key)) {
      f.read(doc[f.section][f.key], path, out.config);
    } else {
      out.defaulted.push_back(path);
    }
  }
  out.config.validate();
  return out;
}

std::map<std::string, std::string> environment_overrides() {
  static const std::string prefix = "THZVR_";
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(prefix.size(), eq - prefix.size());
    // Only SECTION__KEY names are overrides; other THZVR_ variables are left alone.
    if (name.find("__") == std::string::npos) continue;
    out[name] = entry.substr(eq + 1);
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), environment_overrides());
}

std::string dump_config(const SimConfig& cfg) {
  json doc = json::object();
  for (const auto& f : registry()) doc[f.section][f.key] = f.write(cfg);
  return doc.dump(2) + "\n";
}

void save_config(const SimConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dump_config(cfg);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

bool operator==(const SimConfig& a, const SimConfig& b) { return dump_config(a) == dump_config(b); }

}  // namespace thzvr::sim
