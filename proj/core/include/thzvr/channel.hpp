// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thzvr/geometry.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::channel {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kSpeedOfLight = 3e8;

struct ChannelParams {
  double frequency_hz = 3e11;
  double absorption_per_m = 0.0033;
  int mec_antennas = 30;  // M
  int ris_elements = 20;  // N
  double ris_gain = 1.0;  // G_RIS
  double speed_of_light = kSpeedOfLight;

  double wavelength() const { return speed_of_light / frequency_hz; }
  void validate() const;
};

/// Channels of one slot. `h[k]` is the MEC<->user channel as received (zero when blocked);
/// `g[k]` is the RIS<->user channel. G_down equals G_up^H.
struct ChannelSet {
  std::vector<CVector> h;  // M each
  CMatrix g_up;            // M x N
  CMatrix g_down;          // N x M
  std::vector<CVector> g;  // N each

  std::size_t users() const { return h.size(); }
};

/// Normalised uniform-linear-array response; element m is exp(-j 2pi/lambda m sin(phi)) / sqrt(n).
CVector array_response(int n_elems, double phi, double lambda);

/// Spreading and molecular-absorption gain with the propagation phase: c/(4 pi f d) e^{-tau d/2} e^{-j 2pi f d/c}.
/// Throws DomainError when d <= 0.
cdouble path_gain(double frequency_hz, double distance_m, double absorption_per_m,
                  double speed_of_light = kSpeedOfLight);

/// MEC->user LoS channel; the zero vector for a blocked user.
CVector los_channel(const ChannelParams& p, double distance_m, double phi, bool line_of_sight = true);

/// Path-loss compensation factor 2 sqrt(pi) f G_RIS N / c.
double compensation_factor(const ChannelParams& p);

/// Rank-one MEC<->RIS matrices (G_up: M x N, G_down: N x M).
std::pair<CMatrix, CMatrix> ris_mec_channels(const ChannelParams& p, double distance_m, double phi_mec,
                                             double phi_ris);

/// RIS->user channel of length N.
CVector ris_user_channel(const ChannelParams& p, double distance_m, double phi);

/// Piecewise-linear frequency -> absorption coefficient table.
class AbsorptionTable {
 public:
  AbsorptionTable() = default;
  explicit AbsorptionTable(std::vector<std::pair<double, double>> points);

  /// Reads whitespace- or comma-separated "Hz 1/m" rows; '#' starts a comment.
  static AbsorptionTable load(const std::filesystem::path& path);

  /// Throws ConfigError outside the tabulated range.
  double coefficient(double frequency_hz) const;
  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

inline double absorption_coefficient(const AbsorptionTable& table, double frequency_hz) {
  return table.coefficient(frequency_hz);
}

/// Array placement: position plus broadside azimuth (radians, room frame).
struct ArrayMount {
  geometry::Position3 position;
  double broadside = 0.0;
};

/// Azimuth of `to - from` in the xy plane measured from the mount's broadside, wrapped to (-pi, pi].
double departure_angle(const ArrayMount& from, const geometry::Position3& to);

/// Builds the full channel set for the users' positions. `line_of_sight[k]` false zeroes h[k].
/// When `fading_std > 0`, every entry gets an independent multiplicative CN(1, fading_std^2) factor.
ChannelSet synthesize(const ChannelParams& p, const ArrayMount& mec, const ArrayMount& ris,
                      const std::vector<geometry::Position3>& users,
                      const std::vector<bool>& line_of_sight, double fading_std = 0.0,
                      Rng* rng = nullptr);

}  // namespace thzvr::channel
