// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "thzvr/errors.hpp"
#include "thzvr/nn/grad_check.hpp"
#include "thzvr/nn/layers.hpp"
#include "thzvr/nn/loss.hpp"
#include "thzvr/nn/optim.hpp"

namespace thzvr::nn {
namespace {

RowMatrix random_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TEST(Dense, IdentityAndBias) {
  Sequential net(1);
  net.input_features(3).dense(3);
  auto& w = net.params().value("00.dense.w");
  w.matrix().setIdentity();
  const RowMatrix x = random_rows(4, 3, 2);
  EXPECT_TRUE(net.forward(x).isApprox(x));
  net.params().value("00.dense.b").data = {0.5, -1.0, 2.0};
  const RowMatrix y = net.forward(RowMatrix::Zero(2, 3));
  EXPECT_DOUBLE_EQ(y(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(1, 1), -1.0);
  EXPECT_DOUBLE_EQ(y(1, 2), 2.0);
  EXPECT_THROW(net.forward(RowMatrix::Zero(2, 4)), ContractError);
}

TEST(Conv2d, SameSizeOutputAndConstantInterior) {
  Sequential net(3);
  net.input_image(21, 21, 3).conv2d(64);
  const RowMatrix x = RowMatrix::Constant(1, 21 * 21 * 3, 0.5);
  EXPECT_EQ(net.forward(x).cols(), 21 * 21 * 64);

  Sequential ones(4);
  ones.input_image(6, 5, 2).conv2d(3);
  std::fill(ones.params().value("00.conv.w").data.begin(), ones.params().value("00.conv.w").data.end(), 1.0);
  const RowMatrix y = ones.forward(RowMatrix::Constant(1, 6 * 5 * 2, 1.5));
  // Interior (not last row/column) sees the full 2x2 window: 1.5 * 4 * C.
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int f = 0; f < 3; ++f) EXPECT_DOUBLE_EQ(y(0, (i * 5 + j) * 3 + f), 1.5 * 4 * 2);
    }
  }
  // Bottom-right corner only sees itself (zero padding).
  EXPECT_DOUBLE_EQ(y(0, (5 * 5 + 4) * 3), 1.5 * 2);
}

TEST(MaxPool, CeilHalvesAndPicksMaximum) {
  Sequential net(5);
  net.input_image(3, 3, 1).maxpool2x2();
  EXPECT_EQ(net.output_size(), 4u);
  RowMatrix x(1, 9);
  x << 1, 2, 3, 4, 9, 6, 7, 8, 5;
  const RowMatrix y = net.forward(x);
  EXPECT_EQ(y(0, 0), 9);
  EXPECT_EQ(y(0, 1), 6);
  EXPECT_EQ(y(0, 2), 8);
  EXPECT_EQ(y(0, 3), 5);
  Sequential big(6);
  big.input_image(21, 21, 64).maxpool2x2();
  EXPECT_EQ(big.output_size(), 11u * 11u * 64u);
}

TEST(GruCell, ZeroWeightsHalveTheState) {
  Tensor wx({2, 9});
  Tensor wh({3, 9});
  Tensor b({9});
  RowMatrix x(1, 2);
  x << 0.7, -1.2;
  RowMatrix h(1, 3);
  h << 0.4, -0.8, 1.0;
  const auto s = gru_cell(x, h, wx, wh, b);
  // z = r = sigmoid(0) = 0.5, n = tanh(0) = 0, so h' = 0.5 h.
  EXPECT_TRUE(s.h.isApprox(0.5 * h));
  EXPECT_DOUBLE_EQ(s.z(0, 1), 0.5);
}

TEST(LstmCell, ZeroWeightsHandValues) {
  Tensor wx({1, 8});
  Tensor wh({2, 8});
  Tensor b({8});
  RowMatrix x = RowMatrix::Constant(1, 1, 3.0);
  RowMatrix h = RowMatrix::Zero(1, 2);
  RowMatrix c(1, 2);
  c << 1.0, -2.0;
  const auto s = lstm_cell(x, h, c, wx, wh, b);
  EXPECT_NEAR(s.c(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(s.c(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(s.h(0, 0), 0.5 * std::tanh(0.5), 1e-15);
}

TEST(Gru, SingleStepSequenceEqualsCell) {
  Sequential net(7);
  net.input_sequence(1, 3).gru(4);
  const RowMatrix x = random_rows(2, 3, 8);
  const auto& p = net.params();
  const auto s = gru_cell(x, RowMatrix::Zero(2, 4), p.value("00.gru.wx"), p.value("00.gru.wh"), p.value("00.gru.b"));
  EXPECT_TRUE(net.forward(x).isApprox(s.h, 1e-14));
}

TEST(GradCheck, DenseOnly) {
  Sequential net(11);
  net.input_features(5).dense(7).relu().dense(3);
  const auto r = grad_check_mse(net, random_rows(4, 5, 12), random_rows(4, 3, 13), 1e-4);
  EXPECT_TRUE(r.passed) << r.worst << " " << r.max_rel_error;
  EXPECT_GT(r.checked, 30u);
}

TEST(GradCheck, ConvPoolDense) {
  Sequential net(21);
  net.input_image(5, 5, 2).conv2d(3).relu().conv2d(2).maxpool2x2().dense(4).relu().dense(2);
  const auto r = grad_check_ce(net, random_rows(3, 50, 22), {0, 1, 1}, 1e-4);
  EXPECT_TRUE(r.passed) << r.worst << " " << r.max_rel_error;
}

TEST(GradCheck, GruBpttOverFiveSteps) {
  Sequential net(31);
  net.input_sequence(5, 3).gru(6).dense(2);
  const auto r = grad_check_mse(net, random_rows(3, 15, 32), random_rows(3, 2, 33), 1e-4);
  EXPECT_TRUE(r.passed) << r.worst << " " << r.max_rel_error;
}

TEST(GradCheck, LstmBpttOverFiveSteps) {
  Sequential net(41);
  net.input_sequence(5, 4).lstm(5).dense(4);
  const auto r = grad_check_ce(net, random_rows(3, 20, 42), {3, 0, 2}, 1e-4);
  EXPECT_TRUE(r.passed) << r.worst << " " << r.max_rel_error;
}

TEST(GradCheck, InputGradientOfConvMatchesDifferences) {
  Sequential net(51);
  net.input_image(4, 3, 2).conv2d(2).maxpool2x2().dense(1);
  RowMatrix x = random_rows(1, 24, 52);
  net.params().zero_grad();
  net.forward_train(x);
  const RowMatrix dx = net.backward(RowMatrix::Ones(1, 1));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    RowMatrix up = x;
    RowMatrix down = x;
    up(0, i) += 1e-6;
    down(0, i) -= 1e-6;
    const double numeric = (net.forward(up)(0, 0) - net.forward(down)(0, 0)) / 2e-6;
    EXPECT_NEAR(dx(0, i), numeric, 1e-6);
  }
}

TEST(Losses, MseComponentSumConvention) {
  RowMatrix pred(2, 3);
  pred << 3, 4, 0, 1, 1, 1;
  RowMatrix target(2, 3);
  target << 0, 0, 0, 1, 1, 1;
  EXPECT_DOUBLE_EQ(mse(pred, target), 12.5);
  EXPECT_DOUBLE_EQ(mse(target, target), 0.0);
}

TEST(Losses, CrossEntropyUniformAndClamp) {
  const RowMatrix uniform = RowMatrix::Constant(2, 4, 0.25);
  EXPECT_NEAR(cross_entropy(uniform, {0, 3}), std::log(4.0), 1e-12);
  RowMatrix hard(1, 2);
  hard << 1.0, 0.0;
  EXPECT_NEAR(cross_entropy(hard, {1}), -std::log(1e-12), 1e-9);
  EXPECT_DOUBLE_EQ(cross_entropy(hard, {0}), 0.0);
  EXPECT_THROW(cross_entropy(hard, {2}), ContractError);
}

TEST(Softmax, SimplexRows) {
  RowMatrix logits = random_rows(5, 4, 61) * 30.0;
  logits(0, 0) = 800.0;
  const RowMatrix p = softmax(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
    EXPECT_GE(p.row(r).minCoeff(), 0.0);
  }
  const RowMatrix q = softmax(random_rows(3, 4, 62));
  EXPECT_GT(q.minCoeff(), 0.0);
}

TEST(Optimizers, SgdScalarAndZeroGradient) {
  ParameterTree t;
  t.add("x", {1}).data[0] = 2.0;
  sgd_step(t, 0.1);
  EXPECT_DOUBLE_EQ(t.value("x").data[0], 2.0);
  t.grad("x").data[0] = 1.0;
  sgd_step(t, 0.1);
  EXPECT_DOUBLE_EQ(t.value("x").data[0], 1.9);
  t.grad("x").data[0] = 0.0;
  Adam adam;
  adam.step(t);
  EXPECT_DOUBLE_EQ(t.value("x").data[0], 1.9);
}

TEST(Optimizers, AdamFirstStepIsLrForAnyScale) {
  for (double g : {1e-4, 1.0, 1e4, -3.0}) {
    ParameterTree t;
    t.add("x", {1});
    t.grad("x").data[0] = g;
    Adam adam(AdamConfig{0.05});
    adam.step(t);
    EXPECT_NEAR(std::abs(t.value("x").data[0]), 0.05, 1e-5) << g;
    EXPECT_EQ(std::signbit(t.value("x").data[0]), !std::signbit(g));
  }
}

TEST(Xor, TwoLayerNetLearnsWithinBudget) {
  Sequential net(2024);
  net.input_features(2).dense(8).relu().dense(1);
  RowMatrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  RowMatrix y(4, 1);
  y << 0, 1, 1, 0;
  double loss = 1.0;
  for (int step = 0; step < 5000 && loss >= 0.05; ++step) {
    net.params().zero_grad();
    const auto lg = mse_grad(net.forward_train(x), y);
    loss = lg.loss;
    net.backward(lg.grad);
    sgd_step(net.params(), 0.05);
  }
  EXPECT_LT(mse(net.forward(x), y), 0.05);
}

TEST(Sequential, CopiesAreDeepAndForwardIsDeterministic) {
  Sequential a(71);
  a.input_features(3).dense(4).relu().dense(2);
  Sequential b = a;
  const RowMatrix x = random_rows(2, 3, 72);
  EXPECT_EQ(a.forward(x), b.forward(x));
  EXPECT_EQ(a.forward(x), a.forward(x));
  b.params().value("02.dense.b").data[0] += 1.0;
  EXPECT_NE(a.forward(x)(0, 0), b.forward(x)(0, 0));
}

TEST(ParameterTree, BinaryRoundTripAndManifest) {
  Sequential net(81);
  net.input_sequence(4, 2).gru(3).dense(1);
  const auto dir = std::filesystem::temp_directory_path();
  const auto bin = dir / "thzvr_nn_test.bin";
  const auto man = dir / "thzvr_nn_test.manifest";
  net.params().save(bin);
  net.params().save_manifest(man);
  EXPECT_EQ(std::filesystem::file_size(bin), net.params().serialized_bytes());
  const auto back = ParameterTree::load(bin);
  EXPECT_EQ(back, net.params());
  std::ifstream in(man);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "00.gru.b [9] 9");
  std::filesystem::remove(bin);
  std::filesystem::remove(man);
  {
    std::ofstream junk(bin);
    junk << "nope";
  }
  EXPECT_THROW(ParameterTree::load(bin), ConfigError);
  std::filesystem::remove(bin);
}

TEST(ParameterTree, StructureChecks) {
  ParameterTree a;
  a.add("w", {2, 2});
  EXPECT_THROW(a.add("w", {1}), ContractError);
  ParameterTree b;
  b.add("w", {4});
  EXPECT_FALSE(a.same_structure(b));
  EXPECT_THROW(a.copy_values_from(b), ContractError);
  a.grad("w").data = {3, 0, 0, 4};
  EXPECT_DOUBLE_EQ(a.grad_norm(), 5.0);
  a.clip_grad_norm(1.0);
  EXPECT_NEAR(a.grad_norm(), 1.0, 1e-12);
}

}  // namespace
}  // namespace thzvr::nn
