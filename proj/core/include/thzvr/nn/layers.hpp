// SPDX-License-Identifier: Apache-2.0
//
// Batch-major layers. Every activation is a RowMatrix with one sample per row; images are laid
// out H x W x C and sequences T x I inside the row.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "thzvr/nn/tensor.hpp"
#include "thzvr/rng.hpp"

namespace thzvr::nn {

class Layer {
 public:
  virtual ~Layer() = default;

  /// Inference pass; no state is touched.
  virtual RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const = 0;
  /// Training pass; caches what backward needs.
  virtual RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) = 0;
  /// Accumulates parameter gradients and returns d loss / d input.
  virtual RowMatrix backward(ParameterTree& params, const RowMatrix& dy) = 0;

  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
 public:
  /// Registers `prefix`w [in, out] and `prefix`b [out].
  Dense(ParameterTree& params, std::string prefix, std::size_t in, std::size_t out, Rng& rng);

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return in_; }
  std::size_t output_size() const override { return out_; }
  std::string kind() const override { return "dense"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  std::string w_;
  std::string b_;
  std::size_t in_;
  std::size_t out_;
  RowMatrix x_;
};

/// Stride-1 convolution with k x k kernels and "same" zero padding (extra row/column at the
/// bottom/right for even k). Kernel tensor shape [k, k, C, F].
class Conv2d final : public Layer {
 public:
  Conv2d(ParameterTree& params, std::string prefix, std::size_t height, std::size_t width,
         std::size_t channels, std::size_t filters, std::size_t kernel, Rng& rng);

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return h_ * w_ * c_; }
  std::size_t output_size() const override { return h_ * w_ * f_; }
  std::string kind() const override { return "conv2d"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  RowMatrix im2col(const RowMatrix& x) const;
  RowMatrix apply(const ParameterTree& params, const RowMatrix& cols, Eigen::Index batch) const;

  std::string kw_;
  std::string kb_;
  std::size_t h_, w_, c_, f_, k_;
  RowMatrix cols_;
};

/// 2 x 2 max pooling, stride 2; odd extents round up (the last window is partial).
class MaxPool2x2 final : public Layer {
 public:
  MaxPool2x2(std::size_t height, std::size_t width, std::size_t channels);

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return h_ * w_ * c_; }
  std::size_t output_size() const override { return out_h() * out_w() * c_; }
  std::string kind() const override { return "maxpool2x2"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2x2>(*this); }

  std::size_t out_h() const { return (h_ + 1) / 2; }
  std::size_t out_w() const { return (w_ + 1) / 2; }

 private:
  RowMatrix pool(const RowMatrix& x, std::vector<Eigen::Index>* argmax) const;

  std::size_t h_, w_, c_;
  std::vector<Eigen::Index> argmax_;
  Eigen::Index batch_ = 0;
};

class ReLU final : public Layer {
 public:
  explicit ReLU(std::size_t size) : size_(size) {}

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return size_; }
  std::size_t output_size() const override { return size_; }
  std::string kind() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  std::size_t size_;
  RowMatrix x_;
};

// ---------------------------------------------------------------------------------------------
// Recurrent cells. Gate blocks are concatenated along the columns of Wx [I, G*H], Wh [H, G*H]
// and b [G*H].

struct GruStep {
  RowMatrix h;
  RowMatrix z, r, n, hn;  // gate activations and h Wh_n, kept for backprop
};

/// z = s(x Wx_z + h Wh_z + b_z), r = s(x Wx_r + h Wh_r + b_r),
/// n = tanh(x Wx_n + b_n + r * (h Wh_n)), h' = (1 - z) * n + z * h.
GruStep gru_cell(const RowMatrix& x, const RowMatrix& h, const Tensor& wx, const Tensor& wh, const Tensor& b);

struct LstmStep {
  RowMatrix h, c;
  RowMatrix i, f, g, o;
};

/// Gates i, f, g, o; c' = f * c + i * g, h' = o * tanh(c').
LstmStep lstm_cell(const RowMatrix& x, const RowMatrix& h, const RowMatrix& c, const Tensor& wx,
                   const Tensor& wh, const Tensor& b);

/// Many-to-one GRU: consumes a T x I sequence per row, emits the final hidden state.
class Gru final : public Layer {
 public:
  Gru(ParameterTree& params, std::string prefix, std::size_t steps, std::size_t input, std::size_t hidden, Rng& rng);

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return t_ * i_; }
  std::size_t output_size() const override { return h_; }
  std::string kind() const override { return "gru"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Gru>(*this); }

 private:
  std::string wx_, wh_, b_;
  std::size_t t_, i_, h_;
  RowMatrix x_;
  std::vector<RowMatrix> hs_;  // h_0 .. h_T
  std::vector<GruStep> steps_;
};

/// Many-to-one LSTM over a T x I sequence per row.
class Lstm final : public Layer {
 public:
  Lstm(ParameterTree& params, std::string prefix, std::size_t steps, std::size_t input, std::size_t hidden, Rng& rng);

  RowMatrix forward(const ParameterTree& params, const RowMatrix& x) const override;
  RowMatrix forward_train(const ParameterTree& params, const RowMatrix& x) override;
  RowMatrix backward(ParameterTree& params, const RowMatrix& dy) override;
  std::size_t input_size() const override { return t_ * i_; }
  std::size_t output_size() const override { return h_; }
  std::string kind() const override { return "lstm"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Lstm>(*this); }

 private:
  std::string wx_, wh_, b_;
  std::size_t t_, i_, h_;
  RowMatrix x_;
  std::vector<RowMatrix> hs_, cs_;
  std::vector<LstmStep> steps_;
};

// ---------------------------------------------------------------------------------------------

/// A layer stack that owns its parameters. Copies are deep.
class Sequential {
 public:
  explicit Sequential(std::uint64_t seed = 0) : rng_(seed) {}
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  Sequential& dense(std::size_t out);
  Sequential& relu();
  Sequential& conv2d(std::size_t filters, std::size_t kernel = 2);
  Sequential& maxpool2x2();
  Sequential& gru(std::size_t hidden);
  Sequential& lstm(std::size_t hidden);

  /// Declares the input shape before the first layer: flat features, an image, or a sequence.
  Sequential& input_features(std::size_t n);
  Sequential& input_image(std::size_t h, std::size_t w, std::size_t c);
  Sequential& input_sequence(std::size_t steps, std::size_t features);

  RowMatrix forward(const RowMatrix& x) const;
  RowMatrix forward_train(const RowMatrix& x);
  /// Back-propagates d loss / d output; gradients accumulate in params().
  RowMatrix backward(const RowMatrix& dy);

  ParameterTree& params() { return params_; }
  const ParameterTree& params() const { return params_; }
  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::string next_prefix(const std::string& kind) const;

  Rng rng_;
  ParameterTree params_;
  std::vector<std::unique_ptr<Layer>> layers_;
  // Shape of the current output: image (h, w, c), sequence (t, i) or flat n.
  std::size_t cur_h_ = 0, cur_w_ = 0, cur_c_ = 0, cur_t_ = 0, cur_n_ = 0;
  std::size_t in_size_ = 0;
};

/// Uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace thzvr::nn
