// SPDX-License-Identifier: Apache-2.0

#include "thzvr/phy.hpp"

#include <cmath>
#include <numbers>

#include "thzvr/errors.hpp"

namespace thzvr::phy {
namespace {

void check_bits(int bits) {
  if (bits < 1 || bits > 8) throw ConfigError("phase resolution must be 1..8 bits");
}

double sinr_rate(double signal, double interference, double noise_w) {
  const double denom = interference + noise_w;
  if (signal <= 0.0) return 0.0;
  return std::log2(1.0 + signal / denom);
}

CVector normalized(const CVector& v) {
  const double n = v.norm();
  if (n == 0.0) return CVector::Zero(v.size());
  return v / n;
}

/// Row vector g_b^H Theta G_down.
Eigen::RowVectorXcd cascade_row(const ChannelSet& ch, std::size_t b, const CVector& theta) {
  return ch.g[b].conjugate().cwiseProduct(theta).transpose() * ch.g_down;
}

}  // namespace

std::vector<double> discrete_phase_set(int bits) {
  check_bits(bits);
  const int count = 1 << bits;
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = 2.0 * std::numbers::pi * i / count;
  return out;
}

PhaseConfig::PhaseConfig(int bits, std::vector<std::uint16_t> levels) : bits_(bits), levels_(std::move(levels)) {
  check_bits(bits);
  for (auto l : levels_) {
    if (l >= level_count()) throw ConfigError("phase level outside the discrete set");
  }
}

PhaseConfig PhaseConfig::zeros(std::size_t elements, int bits) {
  return PhaseConfig(bits, std::vector<std::uint16_t>(elements, 0));
}

double PhaseConfig::phase(std::size_t n) const {
  return 2.0 * std::numbers::pi * levels_.at(n) / level_count();
}

std::vector<double> PhaseConfig::phases() const {
  std::vector<double> out(levels_.size());
  for (std::size_t n = 0; n < levels_.size(); ++n) out[n] = phase(n);
  return out;
}

PhaseConfig quantize(const std::vector<double>& phases, int bits) {
  check_bits(bits);
  const int count = 1 << bits;
  const double step = 2.0 * std::numbers::pi / count;
  std::vector<std::uint16_t> levels(phases.size());
  for (std::size_t n = 0; n < phases.size(); ++n) {
    double wrapped = std::fmod(phases[n], 2.0 * std::numbers::pi);
    if (wrapped < 0) wrapped += 2.0 * std::numbers::pi;
    levels[n] = static_cast<std::uint16_t>(static_cast<int>(std::lround(wrapped / step)) % count);
  }
  return PhaseConfig(bits, std::move(levels));
}

CVector reflection_diagonal(const PhaseConfig& cfg) {
  CVector d(static_cast<Eigen::Index>(cfg.size()));
  for (std::size_t n = 0; n < cfg.size(); ++n) d[static_cast<Eigen::Index>(n)] = std::polar(1.0, cfg.phase(n));
  return d;
}

CMatrix reflection_matrix(const PhaseConfig& cfg) { return reflection_diagonal(cfg).asDiagonal(); }

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double uplink_rate(std::size_t k, const ChannelSet& ch, const CVector& theta, double tx_power_w,
                   double noise_w) {
  if (k >= ch.users()) throw ContractError("uplink_rate: user index out of range");
  std::vector<CVector> effective;
  effective.reserve(ch.users());
  for (std::size_t i = 0; i < ch.users(); ++i) {
    effective.push_back(ch.h[i] + ch.g_up * theta.cwiseProduct(ch.g[i]));
  }
  const CVector u = normalized(effective[k]);
  const double signal = tx_power_w * std::norm(u.dot(effective[k]));
  double interference = 0.0;
  for (std::size_t i = 0; i < ch.users(); ++i) {
    if (i != k) interference += tx_power_w * std::norm(u.dot(effective[i]));
  }
  return sinr_rate(signal, interference, noise_w);
}

std::vector<double> uplink_rates(const ChannelSet& ch, const CVector& theta, double tx_power_w,
                                 double noise_w) {
  std::vector<double> out(ch.users());
  for (std::size_t k = 0; k < ch.users(); ++k) out[k] = uplink_rate(k, ch, theta, tx_power_w, noise_w);
  return out;
}

std::vector<CVector> downlink_precoders(const ChannelSet& ch, const CVector& theta,
                                        const std::vector<LinkState>& serving) {
  if (serving.size() != ch.users()) throw ContractError("downlink_precoders: serving set size mismatch");
  std::vector<CVector> v;
  v.reserve(ch.users());
  for (std::size_t k = 0; k < ch.users(); ++k) {
    if (serving[k] == LinkState::LoS) {
      v.push_back(normalized(ch.h[k]));
    } else {
      // A cascade that cancels to rounding noise has no meaningful direction; treat it as zero.
      const CVector c = ch.g_down.adjoint() * theta.cwiseProduct(ch.g[k]);
      const bool null = c.norm() <= kCancellationFloor * ch.g_down.norm() * ch.g[k].norm();
      v.push_back(null ? CVector::Zero(c.size()) : normalized(c));
    }
  }
  return v;
}

double downlink_rate_los(std::size_t k, const ChannelSet& ch, const CVector& theta,
                         const std::vector<LinkState>& serving, double tx_power_w, double noise_w) {
  return downlink_rate_los(k, ch, downlink_precoders(ch, theta, serving), serving, tx_power_w, noise_w);
}

double downlink_rate_los(std::size_t k, const ChannelSet& ch, const std::vector<CVector>& precoders,
                         const std::vector<LinkState>& serving, double tx_power_w, double noise_w) {
  if (k >= ch.users() || serving.at(k) != LinkState::LoS) {
    throw ContractError("downlink_rate_los: user is not in the LoS serving set");
  }
  const CVector& h = ch.h[k];
  const double signal = tx_power_w * std::norm(h.dot(precoders[k]));
  double interference = 0.0;
  for (std::size_t i = 0; i < ch.users(); ++i) {
    if (i != k) interference += tx_power_w * std::norm(h.dot(precoders[i]));
  }
  return sinr_rate(signal, interference, noise_w);
}

double downlink_rate_nlos(std::size_t b, const ChannelSet& ch, const CVector& theta,
                          const std::vector<LinkState>& serving, double tx_power_w, double noise_w) {
  return downlink_rate_nlos(b, ch, theta, downlink_precoders(ch, theta, serving), serving, tx_power_w,
                            noise_w);
}

double downlink_rate_nlos(std::size_t b, const ChannelSet& ch, const CVector& theta,
                          const std::vector<CVector>& precoders, const std::vector<LinkState>& serving,
                          double tx_power_w, double noise_w) {
  if (b >= ch.users() || serving.at(b) != LinkState::NLoS) {
    throw ContractError("downlink_rate_nlos: user is not in the NLoS serving set");
  }
  const Eigen::RowVectorXcd row = cascade_row(ch, b, theta);
  const double signal = tx_power_w * std::norm((row * precoders[b])(0));
  double interference = 0.0;
  for (std::size_t j = 0; j < ch.users(); ++j) {
    if (j != b && serving[j] == LinkState::NLoS) {
      interference += tx_power_w * std::norm((row * precoders[j])(0));
    }
  }
  return sinr_rate(signal, interference, noise_w);
}

std::vector<double> downlink_rates(const ChannelSet& actual, const ChannelSet& design,
                                   const CVector& theta, const std::vector<LinkState>& serving,
                                   double tx_power_w, double noise_w) {
  const auto precoders = downlink_precoders(design, theta, serving);
  std::vector<double> out(actual.users());
  for (std::size_t k = 0; k < actual.users(); ++k) {
    out[k] = serving[k] == LinkState::LoS
                 ? downlink_rate_los(k, actual, precoders, serving, tx_power_w, noise_w)
                 : downlink_rate_nlos(k, actual, theta, precoders, serving, tx_power_w, noise_w);
  }
  return out;
}

}  // namespace thzvr::phy
