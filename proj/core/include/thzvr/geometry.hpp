// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "thzvr/rng.hpp"

namespace thzvr::geometry {

/// Point in the room frame, meters. z is height above the floor.
struct Position3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Position3&, const Position3&) = default;
};

/// Lattice cell of the mobility grid (integer multiples of the grid resolution).
struct GridCell {
  int ix = 0;
  int iy = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// VRMM moving directions. Up is +y, Right is +x.
enum class Direction { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::array<Direction, 4> kAllDirections = {Direction::Up, Direction::Down,
                                                            Direction::Left, Direction::Right};
const char* to_string(Direction d);

enum class LinkState { LoS, NLoS };

struct MobilityState {
  Position3 position;
  GridCell destination;
  Direction direction = Direction::Right;
  double speed = 1.0;  // meters per slot

  friend bool operator==(const MobilityState&, const MobilityState&) = default;
};

/// Axis-aligned box standing on the floor.
struct Obstacle {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double height = 0.0;

  bool contains_2d(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

/// Square room of side `width` and ceiling `height`, discretised on a lattice of pitch `grid`.
struct Room {
  double width = 20.0;
  double height = 3.0;
  double grid = 1.0;

  int cells_per_side() const;  // lattice lines per axis (21 for a 20 m room at 1 m)
  bool contains(const Position3& p) const;
};

struct SceneState {
  Position3 mec;
  Position3 ris;
  std::vector<MobilityState> users;
  std::vector<Obstacle> obstacles;
  std::vector<LinkState> los_flags;
};

/// Free lattice cells of a room (those not covered by any obstacle footprint).
class MobilityGrid {
 public:
  MobilityGrid(Room room, std::vector<Obstacle> obstacles);

  const Room& room() const { return room_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const std::vector<GridCell>& free_cells() const { return free_cells_; }
  bool is_free(double x, double y) const;
  Position3 cell_center(GridCell c, double z) const;
  GridCell nearest_cell(const Position3& p) const;
  GridCell random_free_cell(Rng& rng) const;

 private:
  Room room_;
  std::vector<Obstacle> obstacles_;
  std::vector<GridCell> free_cells_;
};

/// One VRMM slot. The output depends only on the input state and the random source.
///
/// A user standing on its destination draws a new destination (uniform over free cells other
/// than the current one) and stays put this call. Otherwise it moves `speed` meters along its
/// direction, never overshooting the destination coordinate on that axis and never entering an
/// obstacle: a blocked step switches to the other axis when that makes progress, else the user
/// re-plans (new destination, no motion).
MobilityState vrmm_step(const MobilityState& state, const MobilityGrid& grid, Rng& rng);

/// Draws an initial mobility state on a random free cell with a random destination.
MobilityState random_mobility_state(const MobilityGrid& grid, double height, double speed, Rng& rng);

/// Direction that moves `from` toward `to` along one axis (x first when both differ).
Direction direction_toward(const Position3& from, GridCell to, double grid);

double distance_2d(const Position3& a, const Position3& b);
double distance_3d(const Position3& a, const Position3& b);

/// User-blocker test for a MEC at `mec`, a taller user at `blocker` and the user of interest.
///
/// The user counts as colinear when its perpendicular distance to the MEC->blocker ray is below
/// `colinear_tol` and it lies beyond the blocker; it is then blocked when its 2D distance from the
/// MEC is below (h_A - h_U) * l / (h_A - h_B).
bool blocked_by_user(const Position3& mec, const Position3& blocker, const Position3& user,
                     double colinear_tol);

/// True when the MEC->user line of sight passes through the obstacle box.
///
/// The 2D segment is clipped against the footprint; the box blocks when its height reaches the
/// sight line at the far crossing point. Full-height boxes therefore block any crossing segment.
bool blocked_by_obstacle(const Position3& mec, const Position3& user, const Obstacle& obstacle);

/// LoS/NLoS flag per user from obstacle and user blockage.
std::vector<LinkState> los_status(const Position3& mec, const std::vector<Position3>& users,
                                  const std::vector<Obstacle>& obstacles, double colinear_tol);
std::vector<LinkState> los_status(const SceneState& scene, double colinear_tol);

std::vector<Position3> positions(const std::vector<MobilityState>& users);

}  // namespace thzvr::geometry
