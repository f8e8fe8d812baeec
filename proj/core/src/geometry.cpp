// SPDX-License-Identifier: Apache-2.0

#include "thzvr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "thzvr/errors.hpp"

namespace thzvr::geometry {
namespace {

constexpr double kEps = 1e-9;

bool on_cell(const Position3& p, GridCell c, double grid) {
  return std::abs(p.x - c.ix * grid) < kEps && std::abs(p.y - c.iy * grid) < kEps;
}

Position3 step_along(Position3 p, Direction d, double amount) {
  switch (d) {
    case Direction::Up: p.y += amount; break;
    case Direction::Down: p.y -= amount; break;
    case Direction::Left: p.x -= amount; break;
    case Direction::Right: p.x += amount; break;
  }
  return p;
}

/// Remaining signed distance toward the destination along the axis of `d` (positive = progress).
double progress_left(const Position3& p, GridCell dest, double grid, Direction d) {
  switch (d) {
    case Direction::Up: return dest.iy * grid - p.y;
    case Direction::Down: return p.y - dest.iy * grid;
    case Direction::Left: return p.x - dest.ix * grid;
    case Direction::Right: return dest.ix * grid - p.x;
  }
  return 0.0;
}

Direction draw_direction_toward(const Position3& from, GridCell to, double grid, Rng& rng) {
  const double dx = to.ix * grid - from.x;
  const double dy = to.iy * grid - from.y;
  const bool move_x = std::abs(dx) > kEps;
  const bool move_y = std::abs(dy) > kEps;
  if (move_x && move_y) {
    std::bernoulli_distribution pick_x(0.5);
    if (pick_x(rng)) return dx > 0 ? Direction::Right : Direction::Left;
    return dy > 0 ? Direction::Up : Direction::Down;
  }
  if (move_x) return dx > 0 ? Direction::Right : Direction::Left;
  if (move_y) return dy > 0 ? Direction::Up : Direction::Down;
  std::uniform_int_distribution<int> any(0, 3);
  return kAllDirections[static_cast<std::size_t>(any(rng))];
}

MobilityState replan(const MobilityState& state, const MobilityGrid& grid, Rng& rng) {
  MobilityState next = state;
  const GridCell here = grid.nearest_cell(state.position);
  if (grid.free_cells().size() > 1) {
    do {
      next.destination = grid.random_free_cell(rng);
    } while (next.destination == here);
  } else {
    next.destination = grid.random_free_cell(rng);
  }
  next.direction = draw_direction_toward(state.position, next.destination, grid.room().grid, rng);
  return next;
}

}  // namespace

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "?";
}

int Room::cells_per_side() const { return static_cast<int>(std::lround(width / grid)) + 1; }

bool Room::contains(const Position3& p) const {
  return p.x >= -kEps && p.x <= width + kEps && p.y >= -kEps && p.y <= width + kEps &&
         p.z >= -kEps && p.z <= height + kEps;
}

MobilityGrid::MobilityGrid(Room room, std::vector<Obstacle> obstacles)
    : room_(room), obstacles_(std::move(obstacles)) {
  if (room_.width <= 0 || room_.height <= 0 || room_.grid <= 0) {
    throw ConfigError("room dimensions and grid pitch must be positive");
  }
  const int n = room_.cells_per_side();
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      if (is_free(ix * room_.grid, iy * room_.grid)) free_cells_.push_back({ix, iy});
    }
  }
  if (free_cells_.empty()) throw ConfigError("obstacles cover every grid cell");
}

bool MobilityGrid::is_free(double x, double y) const {
  return std::none_of(obstacles_.begin(), obstacles_.end(),
                      [&](const Obstacle& o) { return o.contains_2d(x, y); });
}

Position3 MobilityGrid::cell_center(GridCell c, double z) const {
  return {c.ix * room_.grid, c.iy * room_.grid, z};
}

GridCell MobilityGrid::nearest_cell(const Position3& p) const {
  const int n = room_.cells_per_side();
  const auto snap = [&](double v) {
    return std::clamp(static_cast<int>(std::lround(v / room_.grid)), 0, n - 1);
  };
  return {snap(p.x), snap(p.y)};
}

GridCell MobilityGrid::random_free_cell(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, free_cells_.size() - 1);
  return free_cells_[pick(rng)];
}

MobilityState vrmm_step(const MobilityState& state, const MobilityGrid& grid, Rng& rng) {
  if (!(state.speed > 0.0)) throw ConfigError("VRMM speed must be positive");
  const double pitch = grid.room().grid;

  if (on_cell(state.position, state.destination, pitch)) return replan(state, grid, rng);

  // Keep the current heading while it still makes progress; otherwise turn toward the goal.
  Direction dir = state.direction;
  if (progress_left(state.position, state.destination, pitch, dir) <= kEps) {
    dir = direction_toward(state.position, state.destination, pitch);
  }

  const auto try_move = [&](Direction d) -> std::optional<Position3> {
    const double left = progress_left(state.position, state.destination, pitch, d);
    if (left <= kEps) return std::nullopt;
    Position3 p = step_along(state.position, d, std::min(state.speed, left));
    p.x = std::clamp(p.x, 0.0, grid.room().width);
    p.y = std::clamp(p.y, 0.0, grid.room().width);
    if (!grid.is_free(p.x, p.y)) return std::nullopt;
    return p;
  };

  std::optional<Position3> moved = try_move(dir);
  if (!moved) {
    for (Direction alt : kAllDirections) {
      if (alt == dir) continue;
      if ((moved = try_move(alt))) {
        dir = alt;
        break;
      }
    }
  }
  if (!moved) return replan(state, grid, rng);

  MobilityState next = state;
  next.position = *moved;
  next.direction = dir;
  return next;
}

MobilityState random_mobility_state(const MobilityGrid& grid, double height, double speed, Rng& rng) {
  MobilityState s;
  s.position = grid.cell_center(grid.random_free_cell(rng), height);
  s.speed = speed;
  s = replan(s, grid, rng);
  return s;
}

Direction direction_toward(const Position3& from, GridCell to, double grid) {
  const double dx = to.ix * grid - from.x;
  const double dy = to.iy * grid - from.y;
  if (std::abs(dx) > kEps) return dx > 0 ? Direction::Right : Direction::Left;
  return dy >= 0 ? Direction::Up : Direction::Down;
}

double distance_2d(const Position3& a, const Position3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double distance_3d(const Position3& a, const Position3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool blocked_by_user(const Position3& mec, const Position3& blocker, const Position3& user,
                     double colinear_tol) {
  const double h_a = mec.z;
  const double h_b = blocker.z;
  const double h_u = user.z;
  if (h_b >= h_a) return false;

  const double rx = blocker.x - mec.x;
  const double ry = blocker.y - mec.y;
  const double l = std::hypot(rx, ry);
  if (l <= kEps) return false;

  const double ux = user.x - mec.x;
  const double uy = user.y - mec.y;
  const double along = (ux * rx + uy * ry) / l;
  const double across = std::abs(ux * ry - uy * rx) / l;
  if (along <= l + kEps || across >= colinear_tol) return false;

  const double threshold = (h_a - h_u) * l / (h_a - h_b);
  return std::hypot(ux, uy) < threshold;
}

bool blocked_by_obstacle(const Position3& mec, const Position3& user, const Obstacle& obstacle) {
  // Liang-Barsky clip of the 2D segment mec->user against the footprint.
  const double dx = user.x - mec.x;
  const double dy = user.y - mec.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const auto clip = [&](double p, double q) {
    if (std::abs(p) < 1e-15) return q >= 0.0;
    const double r = q / p;
    if (p < 0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
    return true;
  };
  if (!clip(-dx, mec.x - obstacle.x_min) || !clip(dx, obstacle.x_max - mec.x) ||
      !clip(-dy, mec.y - obstacle.y_min) || !clip(dy, obstacle.y_max - mec.y)) {
    return false;
  }
  // A segment that only grazes an edge or corner does not cross the footprint.
  if ((t1 - t0) * std::hypot(dx, dy) <= kEps) return false;
  const auto sight_height = [&](double t) { return mec.z + (user.z - mec.z) * t; };
  const double lowest = std::min(sight_height(t0), sight_height(t1));
  return obstacle.height >= lowest;
}

std::vector<LinkState> los_status(const Position3& mec, const std::vector<Position3>& users,
                                  const std::vector<Obstacle>& obstacles, double colinear_tol) {
  std::vector<LinkState> flags(users.size(), LinkState::LoS);
  for (std::size_t k = 0; k < users.size(); ++k) {
    bool blocked = std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) {
      return blocked_by_obstacle(mec, users[k], o);
    });
    for (std::size_t j = 0; j < users.size() && !blocked; ++j) {
      if (j != k) blocked = blocked_by_user(mec, users[j], users[k], colinear_tol);
    }
    flags[k] = blocked ? LinkState::NLoS : LinkState::LoS;
  }
  return flags;
}

std::vector<LinkState> los_status(const SceneState& scene, double colinear_tol) {
  return los_status(scene.mec, positions(scene.users), scene.obstacles, colinear_tol);
}

std::vector<Position3> positions(const std::vector<MobilityState>& users) {
  std::vector<Position3> out;
  out.reserve(users.size());
  for (const auto& u : users) out.push_back(u.position);
  return out;
}

}  // namespace thzvr::geometry
