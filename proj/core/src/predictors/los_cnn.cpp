// SPDX-License-Identifier: Apache-2.0

#include "thzvr/predictors/los_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thzvr/errors.hpp"
#include "thzvr/nn/loss.hpp"

namespace thzvr::predictors {

using geometry::LinkState;
using geometry::Position3;

Rgb SceneImage::at(std::size_t ix, std::size_t iy) const {
  const std::size_t o = (iy * side + ix) * 3;
  return {pixels.at(o), pixels.at(o + 1), pixels.at(o + 2)};
}

void SceneImage::paint(std::size_t ix, std::size_t iy, const Rgb& c) {
  const std::size_t o = (iy * side + ix) * 3;
  std::copy(c.begin(), c.end(), pixels.begin() + static_cast<std::ptrdiff_t>(o));
}

std::size_t SceneImage::count(const Rgb& c) const {
  std::size_t n = 0;
  for (std::size_t iy = 0; iy < side; ++iy) {
    for (std::size_t ix = 0; ix < side; ++ix) n += at(ix, iy) == c;
  }
  return n;
}

namespace {

std::size_t snap(double v, const geometry::Room& room) {
  const int n = room.cells_per_side();
  return static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(v / room.grid)), 0, n - 1));
}

void paint_users(SceneImage& img, const geometry::Room& room, const std::vector<Position3>& users,
                 std::size_t target) {
  const double h = users[target].z;
  for (std::size_t k = 0; k < users.size(); ++k) {
    if (k == target || users[k].z > h) continue;
    img.paint(snap(users[k].x, room), snap(users[k].y, room), kShorterUserColor);
  }
  for (std::size_t k = 0; k < users.size(); ++k) {
    if (k == target || users[k].z <= h) continue;
    img.paint(snap(users[k].x, room), snap(users[k].y, room), kTallerUserColor);
  }
  img.paint(snap(users[target].x, room), snap(users[target].y, room), kTargetColor);
}

}  // namespace

SceneImage rasterize_scene(const geometry::Room& room, const std::optional<Position3>& mec,
                           const std::vector<geometry::Obstacle>& obstacles, const std::vector<Position3>& users,
                           std::size_t target) {
  if (!users.empty() && target >= users.size()) throw ContractError("rasterize_scene: target user out of range");
  SceneImage img;
  img.side = static_cast<std::size_t>(room.cells_per_side());
  img.pixels.assign(img.side * img.side * 3, 0.0);

  for (std::size_t iy = 0; iy < img.side; ++iy) {
    for (std::size_t ix = 0; ix < img.side; ++ix) {
      const double x = static_cast<double>(ix) * room.grid;
      const double y = static_cast<double>(iy) * room.grid;
      for (const auto& o : obstacles) {
        if (o.contains_2d(x, y)) {
          img.paint(ix, iy, kObstacleColor);
          break;
        }
      }
    }
  }
  if (!users.empty()) paint_users(img, room, users, target);
  if (mec) img.paint(snap(mec->x, room), snap(mec->y, room), kMecColor);
  return img;
}

std::optional<geometry::GridCell> find_color(const SceneImage& image, const Rgb& color) {
  for (std::size_t iy = 0; iy < image.side; ++iy) {
    for (std::size_t ix = 0; ix < image.side; ++ix) {
      if (image.at(ix, iy) == color) return geometry::GridCell{static_cast<int>(ix), static_cast<int>(iy)};
    }
  }
  return std::nullopt;
}

LosClassifier::LosClassifier(const LosCnnConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), net_(seed), adam_(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}) {
  if (cfg.side == 0 || cfg.filters == 0 || cfg.dense == 0 || cfg.minibatch == 0) {
    throw ConfigError("CNN side, filters, dense width and minibatch must be positive");
  }
  net_.input_image(cfg.side, cfg.side, 3)
      .conv2d(cfg.filters)
      .relu()
      .conv2d(cfg.filters)
      .relu()
      .maxpool2x2()
      .dense(cfg.dense)
      .relu()
      .dense(2);
}

namespace {

nn::RowMatrix stack(const std::vector<const SceneImage*>& images, std::size_t cols) {
  nn::RowMatrix x(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->pixels.size() != cols) throw ContractError("CNN input image has the wrong size");
    x.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const nn::Vector>(images[i]->pixels.data(), static_cast<Eigen::Index>(cols)).transpose();
  }
  return x;
}

}  // namespace

nn::RowMatrix LosClassifier::probabilities(const std::vector<const SceneImage*>& images) const {
  if (images.empty()) return nn::RowMatrix(0, 2);
  return nn::softmax(net_.forward(stack(images, net_.input_size())));
}

LinkState LosClassifier::classify(const SceneImage& image) const {
  const nn::RowMatrix p = probabilities({&image});
  return p(0, 1) > p(0, 0) ? LinkState::LoS : LinkState::NLoS;
}

double LosClassifier::train_batch(const std::vector<const SceneImage*>& images, const std::vector<int>& labels) {
  if (images.empty()) return 0.0;
  net_.params().zero_grad();
  const auto lg = nn::softmax_cross_entropy(net_.forward_train(stack(images, net_.input_size())), labels);
  net_.backward(lg.grad);
  adam_.step(net_.params());
  return lg.loss;
}

void LosClassifier::load(const std::filesystem::path& path) {
  const auto loaded = nn::ParameterTree::load(path);
  if (!loaded.same_structure(net_.params())) throw ConfigError("CNN checkpoint does not match the model shape");
  net_.params().copy_values_from(loaded);
  adam_.reset();
}

void LosDataset::save(const std::filesystem::path& stem) const {
  const std::size_t side = images.empty() ? 0 : images.front().side;
  nn::ParameterTree imgs;
  nn::Tensor t({images.size(), side, side, 3});
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::copy(images[i].pixels.begin(), images[i].pixels.end(),
              t.data.begin() + static_cast<std::ptrdiff_t>(i * side * side * 3));
  }
  imgs.set("images", std::move(t));
  imgs.save(std::filesystem::path(stem.string() + ".images"));

  nn::ParameterTree lbl;
  nn::Tensor l({labels.size()});
  std::transform(labels.begin(), labels.end(), l.data.begin(), [](int v) { return static_cast<double>(v); });
  lbl.set("labels", std::move(l));
  lbl.save(std::filesystem::path(stem.string() + ".labels"));
}

LosDataset LosDataset::load(const std::filesystem::path& stem) {
  const auto imgs = nn::ParameterTree::load(std::filesystem::path(stem.string() + ".images"));
  const auto lbl = nn::ParameterTree::load(std::filesystem::path(stem.string() + ".labels"));
  if (!imgs.contains("images") || !lbl.contains("labels")) throw ConfigError("LoS dataset files are incomplete");
  const auto& t = imgs.value("images");
  const auto& l = lbl.value("labels");
  if (t.rank() != 4 || t.dim(1) != t.dim(2) || t.dim(3) != 3 || l.rank() != 1 || l.dim(0) != t.dim(0)) {
    throw ConfigError("LoS dataset has inconsistent shapes");
  }
  LosDataset out;
  const std::size_t side = t.dim(1);
  const std::size_t per = side * side * 3;
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    SceneImage img{side, std::vector<double>(t.data.begin() + static_cast<std::ptrdiff_t>(i * per),
                                             t.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * per))};
    out.images.push_back(std::move(img));
    out.labels.push_back(static_cast<int>(std::lround(l.data[i])));
  }
  return out;
}

LosDataset generate_los_dataset(const SceneSampler& sampler, const std::vector<std::size_t>& user_counts,
                                std::size_t scenes, Rng& rng) {
  const geometry::MobilityGrid grid(sampler.room, sampler.obstacles);
  std::uniform_real_distribution<double> height(sampler.min_height, sampler.max_height);
  LosDataset out;
  for (const std::size_t k : user_counts) {
    for (std::size_t s = 0; s < scenes; ++s) {
      std::vector<Position3> users;
      for (std::size_t u = 0; u < k; ++u) {
        const double z = height(rng);
        users.push_back(grid.cell_center(grid.random_free_cell(rng), z));
      }
      const auto flags = geometry::los_status(sampler.mec, users, sampler.obstacles, sampler.colinear_tol);
      for (std::size_t u = 0; u < k; ++u) {
        out.images.push_back(rasterize_scene(sampler.room, sampler.mec, sampler.obstacles, users, u));
        out.labels.push_back(flags[u] == LinkState::LoS ? 1 : 0);
      }
    }
  }
  return out;
}

std::vector<double> train_los_classifier(LosClassifier& model, const LosDataset& data, std::size_t epochs, Rng& rng) {
  std::vector<double> curve;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = model.config().minibatch;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<const SceneImage*> imgs;
      std::vector<int> labels;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        imgs.push_back(&data.images[order[i]]);
        labels.push_back(data.labels[order[i]]);
      }
      sum += model.train_batch(imgs, labels);
      ++batches;
    }
    curve.push_back(batches ? sum / static_cast<double>(batches) : 0.0);
  }
  return curve;
}

double los_accuracy(const LosClassifier& model, const LosDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<const SceneImage*> imgs;
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) imgs.push_back(&data.images[i]);
    const nn::RowMatrix p = model.probabilities(imgs);
    for (std::size_t r = 0; r < imgs.size(); ++r) {
      const int pred = p(static_cast<Eigen::Index>(r), 1) > p(static_cast<Eigen::Index>(r), 0) ? 1 : 0;
      correct += pred == data.labels[start + r];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace thzvr::predictors
