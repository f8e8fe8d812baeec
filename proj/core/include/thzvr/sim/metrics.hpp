// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "thzvr/sim/config.hpp"
#include "thzvr/sim/engine.hpp"

namespace thzvr::sim {

/// Per-episode aggregates. Latencies are capped at latency.cap before averaging.
struct EpisodeSummary {
  std::size_t episode = 0;
  std::size_t slots = 0;
  double mean_qoe = 0.0;        // over every (slot, user) record
  double late_mean_qoe = 0.0;   // over slots in the second half of the episode
  double mean_reward = 0.0;
  double mean_t_vr = 0.0;
  double mean_t_downlink = 0.0;
  double downlink_violation_rate = 0.0;  // share of records above t_th_downlink
  double vr_violation_rate = 0.0;        // share of records above t_th_vr
  double hit_rate = 0.0;
  double los_accuracy = 0.0;
  double final_multiplier = 0.0;
  double final_epsilon = 0.0;
};

EpisodeSummary summarize_episode(const std::vector<SlotMetrics>& records, const SimConfig& cfg);

/// Mean and standard error of a sample (SE is 0 for fewer than two values).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

inline const char* kSlotsCsvHeader =
    "episode,slot,user,x,y,z,pred_x,pred_y,los_true,los_pred,viewpoint,viewpoint_pred,hit,uplink_rate,"
    "downlink_rate,t_uplink,t_render,t_downlink,t_vr,q_now,qoe";
inline const char* kEpisodesCsvHeader =
    "episode,slots,mean_qoe,late_mean_qoe,mean_reward,mean_t_vr,mean_t_downlink,downlink_violation_rate,"
    "vr_violation_rate,hit_rate,los_accuracy,final_multiplier,final_epsilon";

/// One newline-terminated CSV row per user.
std::string slot_csv_rows(const SlotMetrics& m);
/// One JSON object per slot.
std::string slot_json_line(const SlotMetrics& m);
std::string episode_csv_row(const EpisodeSummary& s);

/// Streams an experiment's files into a directory:
///   config.json    effective configuration
///   slots.csv      one row per slot per user    (when run.slot_records)
///   slots.jsonl    one object per slot          (when run.slot_records)
///   episodes.csv   one row per episode
///   summary.json   totals, written by finish()
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& dir, const SimConfig& cfg);

  void write_episode(const std::vector<SlotMetrics>& records, const EpisodeSummary& summary);
  void finish(const std::string& summary_json);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::ofstream open(const std::string& name);

  std::filesystem::path dir_;
  bool slot_records_;
  std::ofstream slots_csv_;
  std::ofstream slots_jsonl_;
  std::ofstream episodes_csv_;
};

/// Writes records without a writer object: slots.csv and slots.jsonl under `dir`.
void write_metrics(const std::vector<SlotMetrics>& records, const std::filesystem::path& dir);

}  // namespace thzvr::sim
