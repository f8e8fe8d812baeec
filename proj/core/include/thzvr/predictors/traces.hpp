// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "thzvr/rng.hpp"

namespace thzvr::predictors {

/// Head orientation in degrees.
struct ViewpointSample {
  int slot = 0;
  double x = 0.0;  // (-50, 50)
  double y = 0.0;  // (-150, 150)
  double z = 0.0;  // (-50, 50)
};

/// traces[user][slot]
using ViewpointTraces = std::vector<std::vector<ViewpointSample>>;

/// Synthetic head motion per axis: slow sinusoid + random-walk drift + fixation noise, clipped to
/// the axis range. Each user draws its own period, amplitude and phase.
struct TraceParams {
  double y_limit = 150.0;
  double xz_limit = 50.0;
  double period_min_slots = 40.0;
  double period_max_slots = 160.0;
  double amplitude_fraction = 0.5;  // of the axis limit
  double drift_std_deg = 1.5;       // per slot
  double noise_std_deg = 1.0;
};

ViewpointTraces synthetic_viewpoint_traces(std::size_t users, std::size_t slots, Rng& rng,
                                           const TraceParams& params = {});

/// Reads `slot,user,x_deg,y_deg,z_deg` rows (header required). Users are numbered from 0 and
/// each user's rows must cover consecutive slots.
ViewpointTraces load_viewpoint_csv(const std::filesystem::path& path);
void save_viewpoint_csv(const ViewpointTraces& traces, const std::filesystem::path& path);

}  // namespace thzvr::predictors
