// SPDX-License-Identifier: Apache-2.0

#include "thzvr/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "thzvr/errors.hpp"

namespace thzvr::channel {

void ChannelParams::validate() const {
  if (!(frequency_hz > 0)) throw ConfigError("carrier frequency must be positive");
  if (!(absorption_per_m >= 0)) throw ConfigError("absorption coefficient must be non-negative");
  if (mec_antennas < 1) throw ConfigError("MEC antenna count must be >= 1");
  if (ris_elements < 1) throw ConfigError("RIS element count must be >= 1");
  if (!(ris_gain > 0)) throw ConfigError("RIS element gain must be positive");
  if (!(speed_of_light > 0)) throw ConfigError("speed of light must be positive");
}

CVector array_response(int n_elems, double phi, double lambda) {
  CVector a(n_elems);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_elems));
  const double step = 2.0 * std::numbers::pi / lambda * std::sin(phi);
  for (int m = 0; m < n_elems; ++m) a[m] = std::polar(scale, -step * m);
  return a;
}

cdouble path_gain(double frequency_hz, double distance_m, double absorption_per_m, double speed_of_light) {
  if (!(distance_m > 0)) throw DomainError("path_gain: distance must be positive");
  const double spreading = speed_of_light / (4.0 * std::numbers::pi * frequency_hz * distance_m);
  const double absorption = std::exp(-absorption_per_m * distance_m / 2.0);
  const double delay = distance_m / speed_of_light;
  return std::polar(spreading * absorption, -2.0 * std::numbers::pi * frequency_hz * delay);
}

CVector los_channel(const ChannelParams& p, double distance_m, double phi, bool line_of_sight) {
  if (!line_of_sight) return CVector::Zero(p.mec_antennas);
  return path_gain(p.frequency_hz, distance_m, p.absorption_per_m, p.speed_of_light) *
         array_response(p.mec_antennas, phi, p.wavelength());
}

double compensation_factor(const ChannelParams& p) {
  return 2.0 * std::sqrt(std::numbers::pi) * p.frequency_hz * p.ris_gain * p.ris_elements /
         p.speed_of_light;
}

std::pair<CMatrix, CMatrix> ris_mec_channels(const ChannelParams& p, double distance_m, double phi_mec,
                                             double phi_ris) {
  const cdouble scalar = compensation_factor(p) *
                         path_gain(p.frequency_hz, distance_m, p.absorption_per_m, p.speed_of_light);
  const CVector a_mec = array_response(p.mec_antennas, phi_mec, p.wavelength());
  const CVector a_ris = array_response(p.ris_elements, phi_ris, p.wavelength());
  CMatrix up = scalar * a_mec * a_ris.adjoint();
  CMatrix down = scalar * a_ris * a_mec.adjoint();
  return {std::move(up), std::move(down)};
}

CVector ris_user_channel(const ChannelParams& p, double distance_m, double phi) {
  return path_gain(p.frequency_hz, distance_m, p.absorption_per_m, p.speed_of_light) *
         array_response(p.ris_elements, phi, p.wavelength());
}

AbsorptionTable::AbsorptionTable(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("absorption table is empty");
  std::sort(points_.begin(), points_.end());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].first > 0) || !(points_[i].second >= 0)) {
      throw ConfigError("absorption table rows need f > 0 and tau >= 0");
    }
    if (i > 0 && points_[i].first == points_[i - 1].first) {
      throw ConfigError("absorption table has duplicate frequencies");
    }
  }
}

AbsorptionTable AbsorptionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open absorption table: " + path.string());
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double f = 0;
    double tau = 0;
    if (!(fields >> f)) continue;
    if (!(fields >> tau)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    }
    rows.emplace_back(f, tau);
  }
  return AbsorptionTable(std::move(rows));
}

double AbsorptionTable::coefficient(double frequency_hz) const {
  if (points_.empty()) throw ConfigError("absorption table is empty");
  if (frequency_hz < points_.front().first || frequency_hz > points_.back().first) {
    throw ConfigError("frequency outside the absorption table range");
  }
  auto hi = std::lower_bound(points_.begin(), points_.end(), frequency_hz,
                             [](const auto& row, double f) { return row.first < f; });
  if (hi->first == frequency_hz) return hi->second;
  auto lo = std::prev(hi);
  const double w = (frequency_hz - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double departure_angle(const ArrayMount& from, const geometry::Position3& to) {
  const double azimuth = std::atan2(to.y - from.position.y, to.x - from.position.x);
  return std::remainder(azimuth - from.broadside, 2.0 * std::numbers::pi);
}

ChannelSet synthesize(const ChannelParams& p, const ArrayMount& mec, const ArrayMount& ris,
                      const std::vector<geometry::Position3>& users,
                      const std::vector<bool>& line_of_sight, double fading_std, Rng* rng) {
  if (line_of_sight.size() != users.size()) throw ContractError("synthesize: flag count != user count");
  ChannelSet out;
  const double d_mi = geometry::distance_3d(mec.position, ris.position);
  std::tie(out.g_up, out.g_down) =
      ris_mec_channels(p, d_mi, departure_angle(mec, ris.position), departure_angle(ris, mec.position));
  out.h.reserve(users.size());
  out.g.reserve(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) {
    out.h.push_back(los_channel(p, geometry::distance_3d(mec.position, users[k]),
                                departure_angle(mec, users[k]), line_of_sight[k]));
    out.g.push_back(ris_user_channel(p, geometry::distance_3d(ris.position, users[k]),
                                     departure_angle(ris, users[k])));
  }

  if (fading_std > 0) {
    if (rng == nullptr) throw ContractError("synthesize: fading requires a random source");
    std::normal_distribution<double> normal(0.0, fading_std / std::numbers::sqrt2);
    const auto perturb = [&](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] *= cdouble(1.0 + normal(*rng), normal(*rng));
    };
    for (auto& v : out.h) perturb(v);
    for (auto& v : out.g) perturb(v);
  }
  return out;
}

}  // namespace thzvr::channel
