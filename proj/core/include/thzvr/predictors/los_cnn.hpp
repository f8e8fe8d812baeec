// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "thzvr/geometry.hpp"
#include "thzvr/nn/layers.hpp"
#include "thzvr/nn/optim.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::predictors {

using Rgb = std::array<double, 3>;

/// Cell colors. User colors are relative to the queried user.
inline constexpr Rgb kBackground = {0.0, 0.0, 0.0};
inline constexpr Rgb kMecColor = {1.0, 0.0, 0.0};
inline constexpr Rgb kObstacleColor = {0.0, 0.0, 1.0};
inline constexpr Rgb kTallerUserColor = {0.0, 1.0, 0.0};
inline constexpr Rgb kShorterUserColor = {0.0, 1.0, 1.0};
inline constexpr Rgb kTargetColor = {1.0, 1.0, 0.0};

/// side x side x 3 image stored row-major as (row = y cell, col = x cell, channel).
struct SceneImage {
  std::size_t side = 0;
  std::vector<double> pixels;

  Rgb at(std::size_t ix, std::size_t iy) const;
  void paint(std::size_t ix, std::size_t iy, const Rgb& c);
  std::size_t count(const Rgb& c) const;
};

/// Paints the room for the query on `target`. Cells are the lattice points of `room`; positions
/// outside the room are clamped to the boundary cell. Later layers overwrite earlier ones:
/// obstacle, shorter user, taller user, target, MEC. With no users nothing is highlighted.
SceneImage rasterize_scene(const geometry::Room& room, const std::optional<geometry::Position3>& mec,
                           const std::vector<geometry::Obstacle>& obstacles,
                           const std::vector<geometry::Position3>& users, std::size_t target);

/// Cell of the first pixel painted with `color`, if any.
std::optional<geometry::GridCell> find_color(const SceneImage& image, const Rgb& color);

struct LosCnnConfig {
  std::size_t side = 21;
  std::size_t filters = 64;
  std::size_t dense = 128;
  double lr = 1e-3;
  std::size_t minibatch = 64;
};

/// conv - relu - conv - relu - maxpool - dense - relu - dense(2). Class 1 is LoS.
class LosClassifier {
 public:
  LosClassifier(const LosCnnConfig& cfg, std::uint64_t seed);

  nn::RowMatrix probabilities(const std::vector<const SceneImage*>& images) const;
  geometry::LinkState classify(const SceneImage& image) const;
  /// One Adam step on averaged cross-entropy; returns the minibatch loss.
  double train_batch(const std::vector<const SceneImage*>& images, const std::vector<int>& labels);

  nn::Sequential& model() { return net_; }
  const nn::Sequential& model() const { return net_; }
  const LosCnnConfig& config() const { return cfg_; }

  void save(const std::filesystem::path& path) const { net_.params().save(path); }
  /// Loads weights saved by save(); throws ConfigError when the shapes do not match.
  void load(const std::filesystem::path& path);

 private:
  LosCnnConfig cfg_;
  nn::Sequential net_;
  nn::Adam adam_;
};

struct LosDataset {
  std::vector<SceneImage> images;
  std::vector<int> labels;  // 1 = LoS

  std::size_t size() const { return labels.size(); }
  /// Two ParameterTree files: `<stem>.images` ([N, side, side, 3]) and `<stem>.labels` ([N]).
  void save(const std::filesystem::path& stem) const;
  static LosDataset load(const std::filesystem::path& stem);
};

struct SceneSampler {
  geometry::Room room;
  geometry::Position3 mec;
  std::vector<geometry::Obstacle> obstacles;
  double min_height = 1.2;
  double max_height = 1.8;
  double colinear_tol = 0.3;
};

/// `scenes` random scenes per user count in `user_counts`; users sit on free lattice cells with
/// uniform heights. Every user of every scene contributes one image labelled by los_status.
LosDataset generate_los_dataset(const SceneSampler& sampler, const std::vector<std::size_t>& user_counts,
                                std::size_t scenes, Rng& rng);

/// Shuffled minibatch training; returns the mean training loss per epoch.
std::vector<double> train_los_classifier(LosClassifier& model, const LosDataset& data, std::size_t epochs, Rng& rng);

/// Fraction of samples classified correctly.
double los_accuracy(const LosClassifier& model, const LosDataset& data);

}  // namespace thzvr::predictors
