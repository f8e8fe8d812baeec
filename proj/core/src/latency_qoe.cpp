// SPDX-License-Identifier: Apache-2.0

#include "thzvr/latency_qoe.hpp"

#include <algorithm>
#include <cmath>

#include "thzvr/errors.hpp"

namespace thzvr::qoe {

LatencyBudget make_budget(double t_uplink, double t_render, double t_downlink) {
  return {t_uplink, t_render, t_downlink, t_uplink + t_render + t_downlink};
}

double fov_size_bits(std::int64_t n_p, std::int64_t n_v) {
  if (n_p <= 0 || n_v <= 0) throw DomainError("FoV resolution must be positive");
  constexpr double kColors = 3.0;
  constexpr double kBitsPerColor = 8.0;
  constexpr double kEyes = 2.0;
  return kColors * kBitsPerColor * static_cast<double>(n_p) * static_cast<double>(n_v) * kEyes;
}

double render_latency(double bits, double cycles_per_bit, double cycles_per_second) {
  if (!(cycles_per_second > 0)) throw DomainError("MEC compute rate must be positive");
  return cycles_per_bit * bits / cycles_per_second;
}

double transmit_latency(double bits, double rate_bps_hz, double bandwidth_hz) {
  const double throughput = rate_bps_hz * bandwidth_hz;
  if (!(throughput > 0)) return kInfiniteLatency;
  return bits / throughput;
}

int viewpoint_hit(double predicted_deg, double actual_deg, double tol_deg) {
  if (tol_deg < 0) throw DomainError("hit tolerance must be non-negative");
  return std::abs(predicted_deg - actual_deg) <= tol_deg ? 1 : 0;
}

double quality(double rate, double r_th, double q_min) {
  if (!(r_th > 0)) throw DomainError("rate threshold must be positive");
  if (!(rate > 0)) return q_min;
  return std::max(std::log(rate / r_th), q_min);
}

QoERecord qoe_from_quality(int hit, double q_now, double q_prev) {
  QoERecord r;
  r.hit = hit;
  r.q_now = q_now;
  r.q_prev = q_prev;
  r.qoe = hit * (q_now - std::abs(q_now - q_prev));
  return r;
}

QoERecord qoe(int hit, double rate_now, double rate_prev, double r_th, double q_min) {
  return qoe_from_quality(hit, quality(rate_now, r_th, q_min), quality(rate_prev, r_th, q_min));
}

}  // namespace thzvr::qoe
