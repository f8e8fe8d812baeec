// SPDX-License-Identifier: Apache-2.0

#include "thzvr/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "thzvr/util/format.hpp"

namespace thzvr::sim {

using util::fmt;

namespace {

const char* flag(geometry::LinkState s) { return s == geometry::LinkState::LoS ? "los" : "nlos"; }

// JSON has no infinity; dead-link latencies are written as null.
std::string json_num(double v) { return std::isfinite(v) ? fmt(v) : "null"; }

}  // namespace

EpisodeSummary summarize_episode(const std::vector<SlotMetrics>& records, const SimConfig& cfg) {
  EpisodeSummary s;
  if (records.empty()) return s;
  s.episode = records.front().episode;
  s.slots = records.size();
  const double cap = cfg.latency.cap;
  double n = 0, late_n = 0;
  for (const auto& m : records) {
    const bool late = 2 * m.slot >= cfg.run.slots;
    s.mean_reward += m.reward;
    for (const auto& u : m.users) {
      s.mean_qoe += u.qoe;
      if (late) {
        s.late_mean_qoe += u.qoe;
        late_n += 1;
      }
      s.mean_t_vr += std::min(u.t_vr, cap);
      s.mean_t_downlink += std::min(u.t_downlink, cap);
      s.downlink_violation_rate += u.t_downlink > cfg.latency.t_th_downlink ? 1.0 : 0.0;
      s.vr_violation_rate += u.t_vr > cfg.latency.t_th_vr ? 1.0 : 0.0;
      s.hit_rate += u.hit;
      s.los_accuracy += u.los_true == u.los_predicted ? 1.0 : 0.0;
      n += 1;
    }
  }
  s.mean_reward /= static_cast<double>(records.size());
  for (double* v : {&s.mean_qoe, &s.mean_t_vr, &s.mean_t_downlink, &s.downlink_violation_rate,
                    &s.vr_violation_rate, &s.hit_rate, &s.los_accuracy}) {
    *v /= n;
  }
  if (late_n > 0) s.late_mean_qoe /= late_n;
  s.final_multiplier = records.back().multiplier;
  s.final_epsilon = records.back().epsilon;
  return s;
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe r;
  if (values.empty()) return r;
  for (const double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (const double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  return r;
}

std::string slot_csv_rows(const SlotMetrics& m) {
  std::string out;
  for (std::size_t k = 0; k < m.users.size(); ++k) {
    const UserSlot& u = m.users[k];
    out += std::to_string(m.episode) + ',' + std::to_string(m.slot) + ',' + std::to_string(k) + ',';
    out += fmt(u.position.x) + ',' + fmt(u.position.y) + ',' + fmt(u.position.z) + ',';
    out += fmt(u.predicted_position.x) + ',' + fmt(u.predicted_position.y) + ',';
    out += std::string(flag(u.los_true)) + ',' + flag(u.los_predicted) + ',';
    out += fmt(u.viewpoint) + ',' + fmt(u.viewpoint_predicted) + ',' + std::to_string(u.hit) + ',';
    out += fmt(u.uplink_rate) + ',' + fmt(u.downlink_rate) + ',';
    out += fmt(u.t_uplink) + ',' + fmt(u.t_render) + ',' + fmt(u.t_downlink) + ',' + fmt(u.t_vr) + ',';
    out += fmt(u.q_now) + ',' + fmt(u.qoe) + '\n';
  }
  return out;
}

std::string slot_json_line(const SlotMetrics& m) {
  std::string out = "{\"episode\":" + std::to_string(m.episode) + ",\"slot\":" + std::to_string(m.slot);
  out += ",\"action\":" + std::to_string(m.action) + ",\"codebook_size\":" + std::to_string(m.codebook_size);
  out += ",\"reward\":" + json_num(m.reward) + ",\"cost\":" + json_num(m.cost);
  out += ",\"signed_cost\":" + json_num(m.signed_cost) + ",\"multiplier\":" + json_num(m.multiplier);
  out += ",\"epsilon\":" + json_num(m.epsilon);
  out += ",\"agent_loss\":" + (m.agent_loss ? json_num(*m.agent_loss) : std::string("null"));
  out += ",\"users\":[";
  for (std::size_t k = 0; k < m.users.size(); ++k) {
    const UserSlot& u = m.users[k];
    if (k) out += ',';
    out += "{\"pos\":[" + fmt(u.position.x) + ',' + fmt(u.position.y) + ',' + fmt(u.position.z) + "]";
    out += ",\"pred_pos\":[" + fmt(u.predicted_position.x) + ',' + fmt(u.predicted_position.y) + "]";
    out += std::string(",\"los_true\":\"") + flag(u.los_true) + "\",\"los_pred\":\"" + flag(u.los_predicted) + "\"";
    out += ",\"hit\":" + std::to_string(u.hit);
    out += ",\"uplink_rate\":" + json_num(u.uplink_rate) + ",\"downlink_rate\":" + json_num(u.downlink_rate);
    out += ",\"t_uplink\":" + json_num(u.t_uplink) + ",\"t_render\":" + json_num(u.t_render);
    out += ",\"t_downlink\":" + json_num(u.t_downlink) + ",\"t_vr\":" + json_num(u.t_vr);
    out += ",\"qoe\":" + json_num(u.qoe) + "}";
  }
  out += "]}\n";
  return out;
}

std::string episode_csv_row(const EpisodeSummary& s) {
  return std::to_string(s.episode) + ',' + std::to_string(s.slots) + ',' + fmt(s.mean_qoe) + ',' +
         fmt(s.late_mean_qoe) + ',' + fmt(s.mean_reward) + ',' + fmt(s.mean_t_vr) + ',' + fmt(s.mean_t_downlink) +
         ',' + fmt(s.downlink_violation_rate) + ',' + fmt(s.vr_violation_rate) + ',' + fmt(s.hit_rate) + ',' +
         fmt(s.los_accuracy) + ',' + fmt(s.final_multiplier) + ',' + fmt(s.final_epsilon) + '\n';
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, const SimConfig& cfg)
    : dir_(dir), slot_records_(cfg.run.slot_records) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create " + dir_.string() + ": " + ec.message());
  save_config(cfg, dir_ / "config.json");
  if (slot_records_) {
    slots_csv_ = open("slots.csv");
    slots_csv_ << kSlotsCsvHeader << '\n';
    slots_jsonl_ = open("slots.jsonl");
  }
  episodes_csv_ = open("episodes.csv");
  episodes_csv_ << kEpisodesCsvHeader << '\n';
}

std::ofstream MetricsWriter::open(const std::string& name) {
  std::ofstream f(dir_ / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
  return f;
}

void MetricsWriter::write_episode(const std::vector<SlotMetrics>& records, const EpisodeSummary& summary) {
  if (slot_records_) {
    for (const auto& m : records) {
      slots_csv_ << slot_csv_rows(m);
      slots_jsonl_ << slot_json_line(m);
    }
    if (!slots_csv_ || !slots_jsonl_) throw std::runtime_error("write failed under " + dir_.string());
  }
  episodes_csv_ << episode_csv_row(summary);
  if (!episodes_csv_) throw std::runtime_error("write failed: " + (dir_ / "episodes.csv").string());
}

void MetricsWriter::finish(const std::string& summary_json) {
  slots_csv_.close();
  slots_jsonl_.close();
  episodes_csv_.close();
  std::ofstream f = open("summary.json");
  f << summary_json;
  if (!f) throw std::runtime_error("write failed: " + (dir_ / "summary.json").string());
}

void write_metrics(const std::vector<SlotMetrics>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "slots.csv", std::ios::binary);
  std::ofstream jsonl(dir / "slots.jsonl", std::ios::binary);
  if (!csv || !jsonl) throw std::runtime_error("cannot write metrics under " + dir.string());
  csv << kSlotsCsvHeader << '\n';
  for (const auto& m : records) {
    csv << slot_csv_rows(m);
    jsonl << slot_json_line(m);
  }
  if (!csv || !jsonl) throw std::runtime_error("write failed under " + dir.string());
}

}  // namespace thzvr::sim
