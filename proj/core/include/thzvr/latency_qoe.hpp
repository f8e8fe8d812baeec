// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>

namespace thzvr::qoe {

inline constexpr double kInfiniteLatency = std::numeric_limits<double>::infinity();

struct LatencyBudget {
  double t_uplink = 0.0;
  double t_render = 0.0;
  double t_downlink = 0.0;
  double t_total = 0.0;
};

/// Sums the three components into t_total.
LatencyBudget make_budget(double t_uplink, double t_render, double t_downlink);

struct QoERecord {
  int hit = 0;
  double q_now = 0.0;
  double q_prev = 0.0;
  double qoe = 0.0;
};

/// Raw RGB FoV payload for both eyes: 3 * 8 * n_p * n_v * 2 bits.
double fov_size_bits(std::int64_t n_p, std::int64_t n_v);

/// f_mec * C / F_mec seconds; identical for every user.
double render_latency(double bits, double cycles_per_bit, double cycles_per_second);

/// bits / (rate * bandwidth); kInfiniteLatency when the link carries nothing.
double transmit_latency(double bits, double rate_bps_hz, double bandwidth_hz);

/// 1 when the prediction is within `tol_deg` of the truth (inclusive).
int viewpoint_hit(double predicted_deg, double actual_deg, double tol_deg);

/// ln(R / r_th), floored at q_min (dead links map to q_min).
double quality(double rate, double r_th, double q_min);

/// hit * (q_now - |q_now - q_prev|).
QoERecord qoe(int hit, double rate_now, double rate_prev, double r_th, double q_min);
QoERecord qoe_from_quality(int hit, double q_now, double q_prev);

}  // namespace thzvr::qoe
