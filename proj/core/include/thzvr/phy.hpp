// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "thzvr/channel.hpp"
#include "thzvr/errors.hpp"
#include "thzvr/geometry.hpp"

namespace thzvr::phy {

using channel::CMatrix;
using channel::CVector;
using channel::ChannelSet;
using geometry::LinkState;

/// The 2^b uniformly spaced phases {0, 2pi/2^b, ...}. Throws ConfigError unless 1 <= b <= 8.
std::vector<double> discrete_phase_set(int bits);

/// One discrete phase level per RIS element.
class PhaseConfig {
 public:
  PhaseConfig() = default;
  PhaseConfig(int bits, std::vector<std::uint16_t> levels);

  static PhaseConfig zeros(std::size_t elements, int bits);

  int bits() const { return bits_; }
  int level_count() const { return 1 << bits_; }
  std::size_t size() const { return levels_.size(); }
  const std::vector<std::uint16_t>& levels() const { return levels_; }
  double phase(std::size_t n) const;
  std::vector<double> phases() const;

  friend bool operator==(const PhaseConfig&, const PhaseConfig&) = default;
  friend auto operator<=>(const PhaseConfig&, const PhaseConfig&) = default;

 private:
  int bits_ = 1;
  std::vector<std::uint16_t> levels_;
};

/// Nearest discrete level (circular distance) for each continuous phase.
PhaseConfig quantize(const std::vector<double>& phases, int bits);

/// Diagonal of Theta: e^{j theta_n}.
CVector reflection_diagonal(const PhaseConfig& cfg);
CMatrix reflection_matrix(const PhaseConfig& cfg);

/// Calls `visit(cfg)` for every configuration in lexicographic level order. Throws ContractError
/// when 2^(b N) exceeds `max_configs`.
template <typename Visit>
void enumerate_configs(std::size_t elements, int bits, std::uint64_t max_configs, Visit&& visit);

inline constexpr double kCancellationFloor = 1e-10;

double dbm_to_watts(double dbm);

/// Uplink SINR rate of user k with MRC combiner u_k along its effective channel h_k + G_up Theta g_k.
/// Interference sums the other users' effective channels projected on u_k. Zero channel gives 0.
double uplink_rate(std::size_t k, const ChannelSet& ch, const CVector& theta, double tx_power_w,
                   double noise_w);
std::vector<double> uplink_rates(const ChannelSet& ch, const CVector& theta, double tx_power_w,
                                 double noise_w);

/// Matched-filter downlink precoders for the serving split: h_k/|h_k| for LoS users,
/// G_down^H Theta g_b / |.| for NLoS users. A zero channel yields a zero precoder, and so does an
/// NLoS cascade whose norm is at most kCancellationFloor * |G_down|_F * |g_b| (a phase null).
std::vector<CVector> downlink_precoders(const ChannelSet& ch, const CVector& theta,
                                        const std::vector<LinkState>& serving);

/// Rate of a LoS-served user. Throws ContractError if `serving[k]` is not LoS.
double downlink_rate_los(std::size_t k, const ChannelSet& ch, const CVector& theta,
                         const std::vector<LinkState>& serving, double tx_power_w, double noise_w);
double downlink_rate_los(std::size_t k, const ChannelSet& ch, const std::vector<CVector>& precoders,
                         const std::vector<LinkState>& serving, double tx_power_w, double noise_w);

/// Rate of an RIS-served user. Throws ContractError if `serving[b]` is not NLoS.
double downlink_rate_nlos(std::size_t b, const ChannelSet& ch, const CVector& theta,
                          const std::vector<LinkState>& serving, double tx_power_w, double noise_w);
double downlink_rate_nlos(std::size_t b, const ChannelSet& ch, const CVector& theta,
                          const std::vector<CVector>& precoders, const std::vector<LinkState>& serving,
                          double tx_power_w, double noise_w);

/// Downlink rates of every user. Precoders are designed on `design` (the MEC's view of the
/// channels) and the signal propagates through `actual` (blocked users have zero h).
std::vector<double> downlink_rates(const ChannelSet& actual, const ChannelSet& design,
                                   const CVector& theta, const std::vector<LinkState>& serving,
                                   double tx_power_w, double noise_w);

// ---------------------------------------------------------------------------------------------

template <typename Visit>
void enumerate_configs(std::size_t elements, int bits, std::uint64_t max_configs, Visit&& visit) {
  const std::uint64_t levels = 1ULL << bits;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < elements; ++i) {
    if (total > max_configs / levels) throw ContractError("enumerate_configs: space too large");
    total *= levels;
  }
  if (total > max_configs) throw ContractError("enumerate_configs: space too large");
  std::vector<std::uint16_t> digits(elements, 0);
  for (std::uint64_t i = 0; i < total; ++i) {
    visit(PhaseConfig(bits, digits));
    for (std::size_t pos = elements; pos-- > 0;) {
      if (++digits[pos] < levels) break;
      digits[pos] = 0;
    }
  }
}

}  // namespace thzvr::phy
