// SPDX-License-Identifier: Apache-2.0

#include "thzvr/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "thzvr/errors.hpp"

namespace thzvr::nn {
namespace {

using Idx = Eigen::Index;

Idx as_idx(std::size_t v) { return static_cast<Idx>(v); }

void check_cols(const RowMatrix& x, std::size_t want, const char* who) {
  if (x.cols() != as_idx(want)) {
    throw ContractError(std::string(who) + ": expected " + std::to_string(want) + " features, got " +
                        std::to_string(x.cols()));
  }
}

RowMatrix sigmoid(const RowMatrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }
RowMatrix tanh_of(const RowMatrix& a) { return a.array().tanh().matrix(); }

Eigen::Map<const RowMatrix> mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data.data(), as_idx(rows), as_idx(cols)};
}
Eigen::Map<RowMatrix> mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data.data(), as_idx(rows), as_idx(cols)};
}
Eigen::Map<const Eigen::RowVectorXd> row(const Tensor& t) { return {t.data.data(), as_idx(t.size())}; }
Eigen::Map<Eigen::RowVectorXd> row(Tensor& t) { return {t.data.data(), as_idx(t.size())}; }

/// Columns [i*T..] of the sequence row block for step t.
RowMatrix step_input(const RowMatrix& x, std::size_t t, std::size_t features) {
  return x.middleCols(as_idx(t * features), as_idx(features));
}

void recurrent_init(Tensor& t, std::size_t hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-k, k);
  for (auto& v : t.data) v = u(rng);
}

}  // namespace

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : t.data) v = u(rng);
}

// --- Dense ----------------------------------------------------------------------------------

Dense::Dense(ParameterTree& params, std::string prefix, std::size_t in, std::size_t out, Rng& rng)
    : w_(prefix + "w"), b_(prefix + "b"), in_(in), out_(out) {
  glorot_uniform(params.add(w_, {in, out}), in, out, rng);
  params.add(b_, {out});
}

RowMatrix Dense::forward(const ParameterTree& params, const RowMatrix& x) const {
  check_cols(x, in_, "dense");
  RowMatrix y = x * mat(params.value(w_), in_, out_);
  y.rowwise() += row(params.value(b_));
  return y;
}

RowMatrix Dense::forward_train(const ParameterTree& params, const RowMatrix& x) {
  x_ = x;
  return forward(params, x);
}

RowMatrix Dense::backward(ParameterTree& params, const RowMatrix& dy) {
  mat(params.grad(w_), in_, out_).noalias() += x_.transpose() * dy;
  row(params.grad(b_)) += dy.colwise().sum();
  return dy * mat(params.value(w_), in_, out_).transpose();
}

// --- Conv2d ---------------------------------------------------------------------------------

Conv2d::Conv2d(ParameterTree& params, std::string prefix, std::size_t height, std::size_t width,
               std::size_t channels, std::size_t filters, std::size_t kernel, Rng& rng)
    : kw_(prefix + "w"), kb_(prefix + "b"), h_(height), w_(width), c_(channels), f_(filters), k_(kernel) {
  if (kernel == 0) throw ContractError("conv2d: kernel must be positive");
  glorot_uniform(params.add(kw_, {k_, k_, c_, f_}), k_ * k_ * c_, k_ * k_ * f_, rng);
  params.add(kb_, {f_});
}

RowMatrix Conv2d::im2col(const RowMatrix& x) const {
  check_cols(x, input_size(), "conv2d");
  const std::size_t pad = (k_ - 1) / 2;
  const Idx batch = x.rows();
  RowMatrix cols = RowMatrix::Zero(batch * as_idx(h_ * w_), as_idx(k_ * k_ * c_));
  for (Idx s = 0; s < batch; ++s) {
    const double* img = x.row(s).data();
    for (std::size_t i = 0; i < h_; ++i) {
      for (std::size_t j = 0; j < w_; ++j) {
        double* dst = cols.row(s * as_idx(h_ * w_) + as_idx(i * w_ + j)).data();
        for (std::size_t di = 0; di < k_; ++di) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + di) - static_cast<std::ptrdiff_t>(pad);
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(h_)) continue;
          for (std::size_t dj = 0; dj < k_; ++dj) {
            const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j + dj) - static_cast<std::ptrdiff_t>(pad);
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w_)) continue;
            const double* src = img + (static_cast<std::size_t>(si) * w_ + static_cast<std::size_t>(sj)) * c_;
            std::copy(src, src + c_, dst + (di * k_ + dj) * c_);
          }
        }
      }
    }
  }
  return cols;
}

RowMatrix Conv2d::apply(const ParameterTree& params, const RowMatrix& cols, Idx batch) const {
  RowMatrix y = cols * mat(params.value(kw_), k_ * k_ * c_, f_);
  y.rowwise() += row(params.value(kb_));
  // (B*H*W) x F and B x (H*W*F) share the same row-major memory order.
  return Eigen::Map<RowMatrix>(y.data(), batch, as_idx(h_ * w_ * f_));
}

RowMatrix Conv2d::forward(const ParameterTree& params, const RowMatrix& x) const {
  return apply(params, im2col(x), x.rows());
}

RowMatrix Conv2d::forward_train(const ParameterTree& params, const RowMatrix& x) {
  cols_ = im2col(x);
  return apply(params, cols_, x.rows());
}

RowMatrix Conv2d::backward(ParameterTree& params, const RowMatrix& dy) {
  const Idx batch = dy.rows();
  Eigen::Map<const RowMatrix> g(dy.data(), batch * as_idx(h_ * w_), as_idx(f_));
  mat(params.grad(kw_), k_ * k_ * c_, f_).noalias() += cols_.transpose() * g;
  row(params.grad(kb_)) += g.colwise().sum();
  const RowMatrix dcols = g * mat(params.value(kw_), k_ * k_ * c_, f_).transpose();

  const std::size_t pad = (k_ - 1) / 2;
  RowMatrix dx = RowMatrix::Zero(batch, as_idx(input_size()));
  for (Idx s = 0; s < batch; ++s) {
    double* img = dx.row(s).data();
    for (std::size_t i = 0; i < h_; ++i) {
      for (std::size_t j = 0; j < w_; ++j) {
        const double* src = dcols.row(s * as_idx(h_ * w_) + as_idx(i * w_ + j)).data();
        for (std::size_t di = 0; di < k_; ++di) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + di) - static_cast<std::ptrdiff_t>(pad);
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(h_)) continue;
          for (std::size_t dj = 0; dj < k_; ++dj) {
            const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j + dj) - static_cast<std::ptrdiff_t>(pad);
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w_)) continue;
            double* dst = img + (static_cast<std::size_t>(si) * w_ + static_cast<std::size_t>(sj)) * c_;
            const double* part = src + (di * k_ + dj) * c_;
            for (std::size_t ch = 0; ch < c_; ++ch) dst[ch] += part[ch];
          }
        }
      }
    }
  }
  return dx;
}

// --- MaxPool2x2 -----------------------------------------------------------------------------

MaxPool2x2::MaxPool2x2(std::size_t height, std::size_t width, std::size_t channels)
    : h_(height), w_(width), c_(channels) {}

RowMatrix MaxPool2x2::pool(const RowMatrix& x, std::vector<Idx>* argmax) const {
  check_cols(x, input_size(), "maxpool2x2");
  const Idx batch = x.rows();
  const std::size_t oh = out_h();
  const std::size_t ow = out_w();
  RowMatrix y(batch, as_idx(output_size()));
  if (argmax) argmax->assign(static_cast<std::size_t>(batch) * output_size(), 0);
  for (Idx s = 0; s < batch; ++s) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c_; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          Idx best_at = 0;
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t si = 2 * i + di;
              const std::size_t sj = 2 * j + dj;
              if (si >= h_ || sj >= w_) continue;
              const Idx at = as_idx((si * w_ + sj) * c_ + ch);
              if (x(s, at) > best) {
                best = x(s, at);
                best_at = at;
              }
            }
          }
          const Idx out = as_idx((i * ow + j) * c_ + ch);
          y(s, out) = best;
          if (argmax) (*argmax)[static_cast<std::size_t>(s * as_idx(output_size()) + out)] = best_at;
        }
      }
    }
  }
  return y;
}

RowMatrix MaxPool2x2::forward(const ParameterTree&, const RowMatrix& x) const { return pool(x, nullptr); }

RowMatrix MaxPool2x2::forward_train(const ParameterTree&, const RowMatrix& x) {
  batch_ = x.rows();
  return pool(x, &argmax_);
}

RowMatrix MaxPool2x2::backward(ParameterTree&, const RowMatrix& dy) {
  RowMatrix dx = RowMatrix::Zero(dy.rows(), as_idx(input_size()));
  const Idx n = as_idx(output_size());
  for (Idx s = 0; s < dy.rows(); ++s) {
    for (Idx o = 0; o < n; ++o) dx(s, argmax_[static_cast<std::size_t>(s * n + o)]) += dy(s, o);
  }
  return dx;
}

// --- ReLU -----------------------------------------------------------------------------------

RowMatrix ReLU::forward(const ParameterTree&, const RowMatrix& x) const { return x.cwiseMax(0.0); }

RowMatrix ReLU::forward_train(const ParameterTree& params, const RowMatrix& x) {
  x_ = x;
  return forward(params, x);
}

RowMatrix ReLU::backward(ParameterTree&, const RowMatrix& dy) {
  return (x_.array() > 0.0).select(dy, 0.0);
}

// --- GRU ------------------------------------------------------------------------------------

GruStep gru_cell(const RowMatrix& x, const RowMatrix& h, const Tensor& wx, const Tensor& wh, const Tensor& b) {
  const auto hidden = static_cast<std::size_t>(h.cols());
  const auto input = static_cast<std::size_t>(x.cols());
  RowMatrix a = x * mat(wx, input, 3 * hidden);
  a.rowwise() += row(b);
  const RowMatrix hh = h * mat(wh, hidden, 3 * hidden);
  const Idx H = as_idx(hidden);
  GruStep s;
  s.z = sigmoid(a.leftCols(H) + hh.leftCols(H));
  s.r = sigmoid(a.middleCols(H, H) + hh.middleCols(H, H));
  s.hn = hh.rightCols(H);
  s.n = tanh_of(a.rightCols(H) + s.r.cwiseProduct(s.hn));
  s.h = (1.0 - s.z.array()) * s.n.array() + s.z.array() * h.array();
  return s;
}

Gru::Gru(ParameterTree& params, std::string prefix, std::size_t steps, std::size_t input, std::size_t hidden, Rng& rng)
    : wx_(prefix + "wx"), wh_(prefix + "wh"), b_(prefix + "b"), t_(steps), i_(input), h_(hidden) {
  recurrent_init(params.add(wx_, {i_, 3 * h_}), h_, rng);
  recurrent_init(params.add(wh_, {h_, 3 * h_}), h_, rng);
  params.add(b_, {3 * h_});
}

RowMatrix Gru::forward(const ParameterTree& params, const RowMatrix& x) const {
  check_cols(x, input_size(), "gru");
  RowMatrix h = RowMatrix::Zero(x.rows(), as_idx(h_));
  for (std::size_t t = 0; t < t_; ++t) {
    h = gru_cell(step_input(x, t, i_), h, params.value(wx_), params.value(wh_), params.value(b_)).h;
  }
  return h;
}

RowMatrix Gru::forward_train(const ParameterTree& params, const RowMatrix& x) {
  check_cols(x, input_size(), "gru");
  x_ = x;
  hs_.assign(1, RowMatrix::Zero(x.rows(), as_idx(h_)));
  steps_.clear();
  for (std::size_t t = 0; t < t_; ++t) {
    steps_.push_back(gru_cell(step_input(x, t, i_), hs_.back(), params.value(wx_), params.value(wh_), params.value(b_)));
    hs_.push_back(steps_.back().h);
  }
  return hs_.back();
}

RowMatrix Gru::backward(ParameterTree& params, const RowMatrix& dy) {
  const Idx H = as_idx(h_);
  const auto wx = mat(params.value(wx_), i_, 3 * h_);
  const auto wh = mat(params.value(wh_), h_, 3 * h_);
  auto gwx = mat(params.grad(wx_), i_, 3 * h_);
  auto gwh = mat(params.grad(wh_), h_, 3 * h_);
  auto gb = row(params.grad(b_));
  RowMatrix dx(x_.rows(), as_idx(input_size()));
  RowMatrix dh = dy;
  RowMatrix da(x_.rows(), 3 * H);
  RowMatrix dhh(x_.rows(), 3 * H);
  for (std::size_t t = t_; t-- > 0;) {
    const GruStep& s = steps_[t];
    const RowMatrix& h_prev = hs_[t];
    const RowMatrix dn = (dh.array() * (1.0 - s.z.array())).matrix();
    const RowMatrix dz = (dh.array() * (h_prev.array() - s.n.array())).matrix();
    RowMatrix dh_prev = (dh.array() * s.z.array()).matrix();
    const RowMatrix dn_pre = (dn.array() * (1.0 - s.n.array().square())).matrix();
    const RowMatrix dr = (dn_pre.array() * s.hn.array()).matrix();
    const RowMatrix dz_pre = (dz.array() * s.z.array() * (1.0 - s.z.array())).matrix();
    const RowMatrix dr_pre = (dr.array() * s.r.array() * (1.0 - s.r.array())).matrix();
    da << dz_pre, dr_pre, dn_pre;
    dhh << dz_pre, dr_pre, (dn_pre.array() * s.r.array()).matrix();
    const RowMatrix xt = step_input(x_, t, i_);
    gwx.noalias() += xt.transpose() * da;
    gb += da.colwise().sum();
    gwh.noalias() += h_prev.transpose() * dhh;
    dh_prev.noalias() += dhh * wh.transpose();
    dx.middleCols(as_idx(t * i_), as_idx(i_)) = da * wx.transpose();
    dh = std::move(dh_prev);
  }
  return dx;
}

// --- LSTM -----------------------------------------------------------------------------------

LstmStep lstm_cell(const RowMatrix& x, const RowMatrix& h, const RowMatrix& c, const Tensor& wx,
                   const Tensor& wh, const Tensor& b) {
  const auto hidden = static_cast<std::size_t>(h.cols());
  const auto input = static_cast<std::size_t>(x.cols());
  RowMatrix a = x * mat(wx, input, 4 * hidden) + h * mat(wh, hidden, 4 * hidden);
  a.rowwise() += row(b);
  const Idx H = as_idx(hidden);
  LstmStep s;
  s.i = sigmoid(a.leftCols(H));
  s.f = sigmoid(a.middleCols(H, H));
  s.g = tanh_of(a.middleCols(2 * H, H));
  s.o = sigmoid(a.rightCols(H));
  s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
  s.h = s.o.cwiseProduct(tanh_of(s.c));
  return s;
}

Lstm::Lstm(ParameterTree& params, std::string prefix, std::size_t steps, std::size_t input, std::size_t hidden, Rng& rng)
    : wx_(prefix + "wx"), wh_(prefix + "wh"), b_(prefix + "b"), t_(steps), i_(input), h_(hidden) {
  recurrent_init(params.add(wx_, {i_, 4 * h_}), h_, rng);
  recurrent_init(params.add(wh_, {h_, 4 * h_}), h_, rng);
  auto& bias = params.add(b_, {4 * h_});
  for (std::size_t j = h_; j < 2 * h_; ++j) bias.data[j] = 1.0;  // forget gate starts open
}

RowMatrix Lstm::forward(const ParameterTree& params, const RowMatrix& x) const {
  check_cols(x, input_size(), "lstm");
  RowMatrix h = RowMatrix::Zero(x.rows(), as_idx(h_));
  RowMatrix c = h;
  for (std::size_t t = 0; t < t_; ++t) {
    auto s = lstm_cell(step_input(x, t, i_), h, c, params.value(wx_), params.value(wh_), params.value(b_));
    h = std::move(s.h);
    c = std::move(s.c);
  }
  return h;
}

RowMatrix Lstm::forward_train(const ParameterTree& params, const RowMatrix& x) {
  check_cols(x, input_size(), "lstm");
  x_ = x;
  hs_.assign(1, RowMatrix::Zero(x.rows(), as_idx(h_)));
  cs_.assign(1, RowMatrix::Zero(x.rows(), as_idx(h_)));
  steps_.clear();
  for (std::size_t t = 0; t < t_; ++t) {
    steps_.push_back(lstm_cell(step_input(x, t, i_), hs_.back(), cs_.back(), params.value(wx_),
                               params.value(wh_), params.value(b_)));
    hs_.push_back(steps_.back().h);
    cs_.push_back(steps_.back().c);
  }
  return hs_.back();
}

RowMatrix Lstm::backward(ParameterTree& params, const RowMatrix& dy) {
  const Idx H = as_idx(h_);
  const auto wx = mat(params.value(wx_), i_, 4 * h_);
  const auto wh = mat(params.value(wh_), h_, 4 * h_);
  auto gwx = mat(params.grad(wx_), i_, 4 * h_);
  auto gwh = mat(params.grad(wh_), h_, 4 * h_);
  auto gb = row(params.grad(b_));
  RowMatrix dx(x_.rows(), as_idx(input_size()));
  RowMatrix dh = dy;
  RowMatrix dc = RowMatrix::Zero(x_.rows(), H);
  RowMatrix da(x_.rows(), 4 * H);
  for (std::size_t t = t_; t-- > 0;) {
    const LstmStep& s = steps_[t];
    const RowMatrix tc_m = tanh_of(s.c);
    const auto tc = tc_m.array();
    dc.array() += dh.array() * s.o.array() * (1.0 - tc.square());
    const auto d_o = dh.array() * tc;
    const auto d_i = dc.array() * s.g.array();
    const auto d_g = dc.array() * s.i.array();
    const auto d_f = dc.array() * cs_[t].array();
    da.leftCols(H) = (d_i * s.i.array() * (1.0 - s.i.array())).matrix();
    da.middleCols(H, H) = (d_f * s.f.array() * (1.0 - s.f.array())).matrix();
    da.middleCols(2 * H, H) = (d_g * (1.0 - s.g.array().square())).matrix();
    da.rightCols(H) = (d_o * s.o.array() * (1.0 - s.o.array())).matrix();
    dc = (dc.array() * s.f.array()).matrix();
    const RowMatrix xt = step_input(x_, t, i_);
    gwx.noalias() += xt.transpose() * da;
    gwh.noalias() += hs_[t].transpose() * da;
    gb += da.colwise().sum();
    dh = da * wh.transpose();
    dx.middleCols(as_idx(t * i_), as_idx(i_)) = da * wx.transpose();
  }
  return dx;
}

// --- Sequential -----------------------------------------------------------------------------

Sequential::Sequential(const Sequential& other)
    : rng_(other.rng_),
      params_(other.params_),
      cur_h_(other.cur_h_), cur_w_(other.cur_w_), cur_c_(other.cur_c_), cur_t_(other.cur_t_), cur_n_(other.cur_n_),
      in_size_(other.in_size_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::string Sequential::next_prefix(const std::string& kind) const {
  std::string idx = std::to_string(layers_.size());
  if (idx.size() < 2) idx = "0" + idx;
  return idx + "." + kind + ".";
}

Sequential& Sequential::input_features(std::size_t n) {
  if (!layers_.empty()) throw ContractError("input shape must precede layers");
  cur_n_ = in_size_ = n;
  cur_h_ = cur_w_ = cur_c_ = cur_t_ = 0;
  return *this;
}

Sequential& Sequential::input_image(std::size_t h, std::size_t w, std::size_t c) {
  input_features(h * w * c);
  cur_h_ = h;
  cur_w_ = w;
  cur_c_ = c;
  return *this;
}

Sequential& Sequential::input_sequence(std::size_t steps, std::size_t features) {
  input_features(steps * features);
  cur_t_ = steps;
  return *this;
}

Sequential& Sequential::dense(std::size_t out) {
  if (cur_n_ == 0) throw ContractError("dense: input shape not declared");
  layers_.push_back(std::make_unique<Dense>(params_, next_prefix("dense"), cur_n_, out, rng_));
  cur_n_ = out;
  cur_h_ = cur_w_ = cur_c_ = cur_t_ = 0;
  return *this;
}

Sequential& Sequential::relu() {
  if (cur_n_ == 0) throw ContractError("relu: input shape not declared");
  layers_.push_back(std::make_unique<ReLU>(cur_n_));
  return *this;
}

Sequential& Sequential::conv2d(std::size_t filters, std::size_t kernel) {
  if (cur_h_ == 0) throw ContractError("conv2d needs an image input");
  layers_.push_back(std::make_unique<Conv2d>(params_, next_prefix("conv"), cur_h_, cur_w_, cur_c_, filters, kernel, rng_));
  cur_c_ = filters;
  cur_n_ = cur_h_ * cur_w_ * cur_c_;
  return *this;
}

Sequential& Sequential::maxpool2x2() {
  if (cur_h_ == 0) throw ContractError("maxpool2x2 needs an image input");
  auto pool = std::make_unique<MaxPool2x2>(cur_h_, cur_w_, cur_c_);
  cur_h_ = pool->out_h();
  cur_w_ = pool->out_w();
  cur_n_ = cur_h_ * cur_w_ * cur_c_;
  layers_.push_back(std::move(pool));
  return *this;
}

Sequential& Sequential::gru(std::size_t hidden) {
  if (cur_t_ == 0) throw ContractError("gru needs a sequence input");
  layers_.push_back(std::make_unique<Gru>(params_, next_prefix("gru"), cur_t_, cur_n_ / cur_t_, hidden, rng_));
  cur_n_ = hidden;
  cur_t_ = 0;
  return *this;
}

Sequential& Sequential::lstm(std::size_t hidden) {
  if (cur_t_ == 0) throw ContractError("lstm needs a sequence input");
  layers_.push_back(std::make_unique<Lstm>(params_, next_prefix("lstm"), cur_t_, cur_n_ / cur_t_, hidden, rng_));
  cur_n_ = hidden;
  cur_t_ = 0;
  return *this;
}

RowMatrix Sequential::forward(const RowMatrix& x) const {
  RowMatrix y = x;
  for (const auto& l : layers_) y = l->forward(params_, y);
  return y;
}

RowMatrix Sequential::forward_train(const RowMatrix& x) {
  RowMatrix y = x;
  for (auto& l : layers_) y = l->forward_train(params_, y);
  return y;
}

RowMatrix Sequential::backward(const RowMatrix& dy) {
  RowMatrix d = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(params_, d);
  return d;
}

std::size_t Sequential::input_size() const { return in_size_; }

std::size_t Sequential::output_size() const { return layers_.empty() ? in_size_ : layers_.back()->output_size(); }

}  // namespace thzvr::nn
