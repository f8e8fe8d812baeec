// SPDX-License-Identifier: Apache-2.0

#include "thzvr/predictors/traces.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "thzvr/errors.hpp"
#include "thzvr/util/format.hpp"

namespace thzvr::predictors {
namespace {

struct AxisProcess {
  double limit;
  double amplitude;
  double omega;
  double phase;
  double drift = 0.0;
};

double clip(double v, double limit) {
  const double edge = limit * (1.0 - 1e-9);
  return std::clamp(v, -edge, edge);
}

}  // namespace

ViewpointTraces synthetic_viewpoint_traces(std::size_t users, std::size_t slots, Rng& rng,
                                           const TraceParams& p) {
  std::uniform_real_distribution<double> period(p.period_min_slots, p.period_max_slots);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> drift(0.0, p.drift_std_deg);
  std::normal_distribution<double> noise(0.0, p.noise_std_deg);
  ViewpointTraces out(users);
  for (std::size_t k = 0; k < users; ++k) {
    std::array<AxisProcess, 3> axes{};
    const std::array<double, 3> limits{p.xz_limit, p.y_limit, p.xz_limit};
    for (std::size_t a = 0; a < 3; ++a) {
      axes[a].limit = limits[a];
      axes[a].amplitude = limits[a] * p.amplitude_fraction * (0.5 + 0.5 * unit(rng));
      axes[a].omega = 2.0 * std::numbers::pi / period(rng);
      axes[a].phase = 2.0 * std::numbers::pi * unit(rng);
    }
    out[k].reserve(slots);
    for (std::size_t t = 0; t < slots; ++t) {
      std::array<double, 3> v{};
      for (std::size_t a = 0; a < 3; ++a) {
        auto& ax = axes[a];
        // Drift is mean-reverting so the walk stays inside the range.
        ax.drift = 0.98 * ax.drift + drift(rng);
        v[a] = clip(ax.amplitude * std::sin(ax.omega * static_cast<double>(t) + ax.phase) + ax.drift + noise(rng),
                    ax.limit);
      }
      out[k].push_back({static_cast<int>(t), v[0], v[1], v[2]});
    }
  }
  return out;
}

ViewpointTraces load_viewpoint_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty trace file");
  line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\r'; }), line.end());
  if (line != "slot,user,x_deg,y_deg,z_deg") {
    throw ConfigError(path.string() + ": expected header slot,user,x_deg,y_deg,z_deg");
  }
  std::map<int, std::vector<ViewpointSample>> by_user;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    ViewpointSample s;
    int user = -1;
    if (!(fields >> s.slot >> user >> s.x >> s.y >> s.z) || user < 0) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed trace row");
    }
    by_user[user].push_back(s);
  }
  ViewpointTraces out;
  for (auto& [user, rows] : by_user) {
    if (user != static_cast<int>(out.size())) throw ConfigError(path.string() + ": users must be numbered 0..K-1");
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].slot != rows[i - 1].slot + 1) throw ConfigError(path.string() + ": slots must be consecutive");
    }
    out.push_back(std::move(rows));
  }
  return out;
}

void save_viewpoint_csv(const ViewpointTraces& traces, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "slot,user,x_deg,y_deg,z_deg\n";
  for (std::size_t k = 0; k < traces.size(); ++k) {
    for (const auto& s : traces[k]) {
      out << s.slot << ',' << k << ',' << util::fmt(s.x) << ',' << util::fmt(s.y) << ',' << util::fmt(s.z) << '\n';
    }
  }
}

}  // namespace thzvr::predictors
