// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "../support/oracles.hpp"
#include "thzvr/errors.hpp"
#include "thzvr/geometry.hpp"

namespace thzvr::geometry {
namespace {

const Position3 kMec{0.0, 0.0, 3.0};

TEST(BlockedByUser, ThresholdDistanceSeparatesBlockedAndClear) {
  // h_A = 3, h_B = 1.8, h_U = 1.2, l = 5 -> threshold 7.5 m.
  const Position3 blocker{5.0, 0.0, 1.8};
  EXPECT_TRUE(blocked_by_user(kMec, blocker, {6.0, 0.0, 1.2}, 0.5));
  EXPECT_TRUE(blocked_by_user(kMec, blocker, {7.49, 0.0, 1.2}, 0.5));
  EXPECT_FALSE(blocked_by_user(kMec, blocker, {7.51, 0.0, 1.2}, 0.5));
  EXPECT_FALSE(blocked_by_user(kMec, blocker, {8.0, 0.0, 1.2}, 0.5));
}

TEST(BlockedByUser, ShorterOrEqualBlockerNeverBlocksATallerUser) {
  EXPECT_FALSE(blocked_by_user(kMec, {5.0, 0.0, 1.2}, {6.0, 0.0, 1.8}, 0.5));
  EXPECT_FALSE(blocked_by_user(kMec, {5.0, 0.0, 3.0}, {6.0, 0.0, 1.2}, 0.5));
}

TEST(BlockedByUser, UserInFrontOrOffAxisIsClear) {
  const Position3 blocker{5.0, 0.0, 1.8};
  EXPECT_FALSE(blocked_by_user(kMec, blocker, {4.0, 0.0, 1.2}, 0.5));
  EXPECT_FALSE(blocked_by_user(kMec, blocker, {6.0, 1.0, 1.2}, 0.5));
  EXPECT_TRUE(blocked_by_user(kMec, blocker, {6.0, 0.3, 1.2}, 0.5));
}

TEST(BlockedByUser, UsersOnTheSameCellDoNotBlockEachOther) {
  // Rounding in the along-ray projection must not put a co-located user "beyond" the blocker.
  for (const Position3 cell : {Position3{9, 7, 0}, Position3{18, 9, 0}, Position3{13, 17, 0}}) {
    const Position3 tall{cell.x, cell.y, 1.78};
    const Position3 short_user{cell.x, cell.y, 1.46};
    EXPECT_FALSE(blocked_by_user({0, 0, 3}, tall, short_user, 0.3));
  }
}

TEST(BlockedByObstacle, PartialHeightBoxUsesSightLineHeight) {
  const Position3 mec{0.0, 10.0, 3.0};
  const Obstacle box{4.0, 8.0, 8.0, 12.0, 2.0};
  // Far edge x=8: sight line at 3 - 1.8 * 0.8 = 1.56 m, below the box top.
  EXPECT_TRUE(blocked_by_obstacle(mec, {10.0, 10.0, 1.2}, box));
  // Far edge at t = 0.5: 2.1 m clears a 2 m box.
  EXPECT_FALSE(blocked_by_obstacle(mec, {16.0, 10.0, 1.2}, box));
  // Segment misses the footprint.
  EXPECT_FALSE(blocked_by_obstacle(mec, {10.0, 16.0, 1.2}, box));
  // Full height blocks any crossing.
  EXPECT_TRUE(blocked_by_obstacle(mec, {16.0, 10.0, 1.2}, {4.0, 8.0, 8.0, 12.0, 3.0}));
}

TEST(BlockedByObstacle, FullHeightBoxFromRoomCorner) {
  const Obstacle box{4.0, 8.0, 8.0, 12.0, 3.0};
  // y = x only touches the corner (8, 8).
  EXPECT_FALSE(blocked_by_obstacle(kMec, {10.0, 10.0, 1.5}, box));
  // Passes through (6, 10).
  EXPECT_TRUE(blocked_by_obstacle(kMec, {12.0, 20.0, 1.5}, box));
  EXPECT_TRUE(blocked_by_obstacle(kMec, {5.0, 9.0, 1.5}, box));
  EXPECT_EQ(los_status(kMec, {{12.0, 20.0, 1.5}}, {box}, 0.3)[0], LinkState::NLoS);
}

TEST(BlockedByUser, MonotoneAlongTheRay) {
  const Position3 blocker{3.0, 4.0, 1.7};
  bool seen_clear = false;
  for (double d = 5.01; d < 15.0; d += 0.05) {
    const bool blocked = blocked_by_user(kMec, blocker, {0.6 * d, 0.8 * d, 1.3}, 0.3);
    if (!blocked) seen_clear = true;
    EXPECT_FALSE(blocked && seen_clear) << d;
  }
  EXPECT_TRUE(seen_clear);
  // Equal heights: threshold equals l, so nobody beyond the blocker is hidden.
  EXPECT_FALSE(blocked_by_user(kMec, {5, 0, 1.5}, {5.5, 0, 1.5}, 0.3));
}

TEST(LosStatus, AgreesWithRaySamplingOnRandomScenes) {
  Rng rng(7);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  std::uniform_real_distribution<double> height(1.0, 2.0);
  std::uniform_real_distribution<double> box_h(0.5, 3.0);
  int agree = 0;
  int total = 0;
  int nlos = 0;
  for (int scene = 0; scene < 300; ++scene) {
    std::vector<Obstacle> obstacles;
    for (int o = 0; o < 2; ++o) {
      const double x = coord(rng);
      const double y = coord(rng);
      obstacles.push_back({x, x + 2.0, y, y + 2.0, box_h(rng)});
    }
    std::vector<Position3> users;
    for (int k = 0; k < 8; ++k) users.push_back({coord(rng), coord(rng), height(rng)});
    const auto got = los_status(kMec, users, obstacles, 0.5);
    const auto want = testing::sampled_los(kMec, users, obstacles, 0.5);
    for (std::size_t k = 0; k < users.size(); ++k) {
      ++total;
      agree += got[k] == want[k];
      nlos += want[k] == LinkState::NLoS;
    }
  }
  // Sampling resolution may disagree only for users that sit on a boundary.
  EXPECT_GE(static_cast<double>(agree) / total, 0.995);
  EXPECT_GT(nlos, 50);
}

TEST(LosStatus, UnobstructedSceneIsAllLos) {
  const std::vector<Position3> users{{3, 4, 1.5}, {10, 2, 1.5}, {2, 17, 1.5}};
  for (auto s : los_status(kMec, users, {}, 0.5)) EXPECT_EQ(s, LinkState::LoS);
}

class VrmmTest : public ::testing::Test {
 protected:
  Room room{};
  std::vector<Obstacle> obstacles{{6.5, 9.5, 6.5, 9.5, 1.0}};
  MobilityGrid grid{room, obstacles};
};

TEST_F(VrmmTest, GridExcludesObstacleFootprint) {
  EXPECT_EQ(room.cells_per_side(), 21);
  EXPECT_EQ(grid.free_cells().size(), 21u * 21u - 9u);
  EXPECT_FALSE(grid.is_free(8.0, 8.0));
  EXPECT_TRUE(grid.is_free(5.0, 8.0));
}

TEST_F(VrmmTest, StaysInRoomAndOutOfObstaclesAndMovesAlongOneAxis) {
  Rng rng(11);
  auto s = random_mobility_state(grid, 1.6, 1.0, rng);
  for (int t = 0; t < 5000; ++t) {
    const auto next = vrmm_step(s, grid, rng);
    EXPECT_TRUE(room.contains(next.position));
    EXPECT_TRUE(grid.is_free(next.position.x, next.position.y));
    const double dx = std::abs(next.position.x - s.position.x);
    const double dy = std::abs(next.position.y - s.position.y);
    EXPECT_TRUE(dx < 1e-12 || dy < 1e-12);
    EXPECT_LE(dx + dy, s.speed + 1e-12);
    EXPECT_DOUBLE_EQ(next.position.z, 1.6);
    s = next;
  }
}

TEST_F(VrmmTest, ReachesDestinationsAndReplans) {
  Rng rng(3);
  auto s = random_mobility_state(grid, 1.6, 1.0, rng);
  std::set<std::pair<int, int>> destinations;
  for (int t = 0; t < 2000; ++t) {
    s = vrmm_step(s, grid, rng);
    destinations.insert({s.destination.ix, s.destination.iy});
  }
  EXPECT_GT(destinations.size(), 20u);
}

TEST_F(VrmmTest, OnDestinationDrawsANewOneWithoutMoving) {
  Rng rng(5);
  MobilityState s;
  s.position = {2.0, 3.0, 1.5};
  s.destination = {2, 3};
  const auto next = vrmm_step(s, grid, rng);
  EXPECT_EQ(next.position, s.position);
  EXPECT_FALSE(next.destination == s.destination);
}

TEST_F(VrmmTest, AxisStepTowardDestination) {
  Rng rng(8);
  MobilityState s;
  s.position = {5.0, 5.0, 1.5};
  s.destination = {9, 5};
  s.direction = Direction::Right;
  const auto next = vrmm_step(s, grid, rng);
  EXPECT_EQ(next.position, (Position3{6.0, 5.0, 1.5}));
  EXPECT_EQ(next.direction, Direction::Right);
}

TEST_F(VrmmTest, DeterministicForASeed) {
  Rng a(42);
  Rng b(42);
  auto sa = random_mobility_state(grid, 1.5, 1.0, a);
  auto sb = random_mobility_state(grid, 1.5, 1.0, b);
  for (int t = 0; t < 200; ++t) {
    sa = vrmm_step(sa, grid, a);
    sb = vrmm_step(sb, grid, b);
    ASSERT_EQ(sa, sb);
  }
}

TEST_F(VrmmTest, RejectsNonPositiveSpeed) {
  Rng rng(1);
  MobilityState s;
  s.position = {1, 1, 1.5};
  s.destination = {4, 1};
  s.speed = 0.0;
  EXPECT_THROW(vrmm_step(s, grid, rng), ConfigError);
}

}  // namespace
}  // namespace thzvr::geometry
