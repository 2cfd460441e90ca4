// Copyright 2026 The GameIRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GAMEIRL_CORE_LAYERS_HPP_
#define GAMEIRL_CORE_LAYERS_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core/gemm.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace gameirl {

// Flat storage for all parameters of one network. Values and gradients live
// in two parallel arrays; layers hold handles (entry indices) into it. Keeping
// storage flat makes the optimizer, gradient clipping and checkpointing
// trivial and bitwise-stable.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool trainable = true;
  };

  int add(std::string name, std::vector<int> shape, bool trainable = true) {
    if (finalized_) throw std::logic_error("ParamStore already finalized");
    Entry e;
    e.name = std::move(name);
    e.size = Tensor<S>::count(shape);
    e.shape = std::move(shape);
    e.offset = total_;
    e.trainable = trainable;
    total_ += e.size;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  void finalize() {
    values_.assign(total_, S(0));
    grads_.assign(total_, S(0));
    finalized_ = true;
  }

  S* val(int h) { return values_.data() + entries_[h].offset; }
  const S* val(int h) const { return values_.data() + entries_[h].offset; }
  S* grad(int h) { return grads_.data() + entries_[h].offset; }
  const Entry& entry(int h) const { return entries_[h]; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<S>& values() { return values_; }
  const std::vector<S>& values() const { return values_; }
  std::vector<S>& grads() { return grads_; }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), S(0)); }

  bool finite() const {
    for (S v : values_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<S> values_, grads_;
  std::size_t total_ = 0;
  bool finalized_ = false;
};

// Orthogonal initialization (QR of a Gaussian matrix, sign-fixed), the
// conventional stable choice for PPO trunks.
template <typename S>
void orthogonal_init(S* w, int rows, int cols, double gain, Rng& rng) {
  const int r = rows >= cols ? rows : cols;
  const int c = rows >= cols ? cols : rows;
  Eigen::MatrixXd g(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd rm = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (rm(j, j) < 0) q.col(j) = -q.col(j);
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = rows >= cols ? q(i, j) : q(j, i);
      w[i * cols + j] = static_cast<S>(gain * v);
    }
  }
}

// 2D convolution, VALID padding, NHWC activations, weights [K,K,Cin,Cout]
// flattened to (K*K*Cin, Cout). `sparse_input` switches the forward/weight-
// gradient path to a nonzero scan; game frames are almost entirely background
// so the first layer runs an order of magnitude faster that way. The sparse
// path is used unconditionally for layers constructed with the flag, keeping
// results deterministic.
template <typename S>
class Conv2D {
 public:
  Conv2D(ParamStore<S>& ps, const std::string& prefix, int in_c, int out_c,
         int ksize, int stride, bool sparse_input = false)
      : ps_(&ps),
        in_c_(in_c),
        out_c_(out_c),
        k_(ksize),
        stride_(stride),
        sparse_(sparse_input) {
    w_ = ps.add(prefix + ".w", {ksize, ksize, in_c, out_c});
    b_ = ps.add(prefix + ".b", {out_c});
  }

  void init(Rng& rng, double gain) {
    orthogonal_init(ps_->val(w_), k_ * k_ * in_c_, out_c_, gain, rng);
  }

  int out_dim(int in_dim) const { return (in_dim - k_) / stride_ + 1; }

  void forward(const Tensor<S>& x, Tensor<S>& y) const {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ho = out_dim(h), wo = out_dim(w);
    y.resize({b, ho, wo, out_c_});
    const S* bias = ps_->val(b_);
    S* yp = y.data();
    const std::size_t rows = static_cast<std::size_t>(b) * ho * wo;
    for (std::size_t r = 0; r < rows; ++r) {
      std::memcpy(yp + r * out_c_, bias, sizeof(S) * out_c_);
    }
    if (sparse_) {
      forward_sparse(x, y);
    } else {
      forward_dense(x, y);
    }
  }

  // Accumulates weight/bias gradients; writes input gradient if dx != null.
  void backward(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>* dx) {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ho = out_dim(h), wo = out_dim(w);
    const std::size_t rows = static_cast<std::size_t>(b) * ho * wo;
    S* db = ps_->grad(b_);
    const S* dyp = dy.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (int c = 0; c < out_c_; ++c) db[c] += dyp[r * out_c_ + c];
    }
    if (sparse_ && dx == nullptr) {
      backward_weights_sparse(x, dy);
      return;
    }
    backward_dense(x, dy, dx);
  }

 private:
  static constexpr std::size_t kMaxColElems = 1u << 24;  // 16M scalars

  int chunk_samples(int per_sample_rows) const {
    const std::size_t per =
        static_cast<std::size_t>(per_sample_rows) * k_ * k_ * in_c_;
    std::size_t c = kMaxColElems / (per == 0 ? 1 : per);
    if (c < 1) c = 1;
    return static_cast<int>(c);
  }

  void im2col(const Tensor<S>& x, int b0, int b1, int ho, int wo,
              std::vector<S>& col) const {
    const int h = x.dim(1), w = x.dim(2);
    const int patch = k_ * k_ * in_c_;
    col.resize(static_cast<std::size_t>(b1 - b0) * ho * wo * patch);
    S* cp = col.data();
    for (int bi = b0; bi < b1; ++bi) {
      const S* xb = x.data() + static_cast<std::size_t>(bi) * h * w * in_c_;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          for (int ky = 0; ky < k_; ++ky) {
            const S* src =
                xb + ((oy * stride_ + ky) * static_cast<std::size_t>(w) +
                      ox * stride_) *
                         in_c_;
            std::memcpy(cp, src, sizeof(S) * k_ * in_c_);
            cp += k_ * in_c_;
          }
        }
      }
    }
  }

  void forward_dense(const Tensor<S>& x, Tensor<S>& y) const {
    const int b = x.dim(0);
    const int ho = y.dim(1), wo = y.dim(2);
    const int patch = k_ * k_ * in_c_;
    const int cb = chunk_samples(ho * wo);
    for (int b0 = 0; b0 < b; b0 += cb) {
      const int b1 = b0 + cb < b ? b0 + cb : b;
      im2col(x, b0, b1, ho, wo, col_);
      const int m = (b1 - b0) * ho * wo;
      gemm_nn(m, out_c_, patch, col_.data(), patch, ps_->val(w_), out_c_,
              y.data() + static_cast<std::size_t>(b0) * ho * wo * out_c_,
              out_c_, /*accumulate=*/true);
    }
  }

  void forward_sparse(const Tensor<S>& x, Tensor<S>& y) const {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ho = y.dim(1), wo = y.dim(2);
    const S* wt = ps_->val(w_);
    const S* xp = x.data();
    S* yp = y.data();
    for (int bi = 0; bi < b; ++bi) {
      for (int iy = 0; iy < h; ++iy) {
        int oy_lo = (iy - k_ + stride_) / stride_;  // ceil((iy-k+1)/s)
        if (oy_lo < 0) oy_lo = 0;
        int oy_hi = iy / stride_;
        if (oy_hi > ho - 1) oy_hi = ho - 1;
        if (oy_lo > oy_hi) continue;
        for (int ix = 0; ix < w; ++ix) {
          const S* xv = xp + ((static_cast<std::size_t>(bi) * h + iy) * w + ix) * in_c_;
          int ox_lo = (ix - k_ + stride_) / stride_;
          if (ox_lo < 0) ox_lo = 0;
          int ox_hi = ix / stride_;
          if (ox_hi > wo - 1) ox_hi = wo - 1;
          for (int c = 0; c < in_c_; ++c) {
            const S v = xv[c];
            if (v == S(0)) continue;
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const int ky = iy - oy * stride_;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                const int kx = ix - ox * stride_;
                const S* wr = wt + ((ky * k_ + kx) * in_c_ + c) *
                                       static_cast<std::size_t>(out_c_);
                S* yr = yp + ((static_cast<std::size_t>(bi) * ho + oy) * wo + ox) *
                                 out_c_;
                for (int oc = 0; oc < out_c_; ++oc) yr[oc] += v * wr[oc];
              }
            }
          }
        }
      }
    }
  }

  void backward_weights_sparse(const Tensor<S>& x, const Tensor<S>& dy) {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ho = dy.dim(1), wo = dy.dim(2);
    S* dw = ps_->grad(w_);
    const S* xp = x.data();
    const S* dyp = dy.data();
    for (int bi = 0; bi < b; ++bi) {
      for (int iy = 0; iy < h; ++iy) {
        int oy_lo = (iy - k_ + stride_) / stride_;
        if (oy_lo < 0) oy_lo = 0;
        int oy_hi = iy / stride_;
        if (oy_hi > ho - 1) oy_hi = ho - 1;
        if (oy_lo > oy_hi) continue;
        for (int ix = 0; ix < w; ++ix) {
          const S* xv = xp + ((static_cast<std::size_t>(bi) * h + iy) * w + ix) * in_c_;
          int ox_lo = (ix - k_ + stride_) / stride_;
          if (ox_lo < 0) ox_lo = 0;
          int ox_hi = ix / stride_;
          if (ox_hi > wo - 1) ox_hi = wo - 1;
          for (int c = 0; c < in_c_; ++c) {
            const S v = xv[c];
            if (v == S(0)) continue;
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const int ky = iy - oy * stride_;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                const int kx = ix - ox * stride_;
                S* dwr = dw + ((ky * k_ + kx) * in_c_ + c) *
                                  static_cast<std::size_t>(out_c_);
                const S* dyr =
                    dyp + ((static_cast<std::size_t>(bi) * ho + oy) * wo + ox) *
                              out_c_;
                for (int oc = 0; oc < out_c_; ++oc) dwr[oc] += v * dyr[oc];
              }
            }
          }
        }
      }
    }
  }

  void backward_dense(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>* dx) {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ho = dy.dim(1), wo = dy.dim(2);
    const int patch = k_ * k_ * in_c_;
    if (dx != nullptr) {
      dx->resize({b, h, w, in_c_});
      dx->fill(S(0));
    }
    const int cb = chunk_samples(ho * wo);
    for (int b0 = 0; b0 < b; b0 += cb) {
      const int b1 = b0 + cb < b ? b0 + cb : b;
      const int m = (b1 - b0) * ho * wo;
      im2col(x, b0, b1, ho, wo, col_);
      const S* dyc = dy.data() + static_cast<std::size_t>(b0) * ho * wo * out_c_;
      // dW += col^T * dy
      gemm_tn_acc(m, out_c_, patch, col_.data(), patch, dyc, out_c_,
                  ps_->grad(w_), out_c_);
      if (dx == nullptr) continue;
      // dcol = dy * W^T, then scatter back (col2im).
      dcol_.resize(static_cast<std::size_t>(m) * patch);
      gemm_nt(m, out_c_, patch, dyc, out_c_, ps_->val(w_), out_c_,
              dcol_.data(), patch, /*accumulate=*/false);
      const S* cp = dcol_.data();
      for (int bi = b0; bi < b1; ++bi) {
        S* dxb = dx->data() + static_cast<std::size_t>(bi) * h * w * in_c_;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            for (int ky = 0; ky < k_; ++ky) {
              S* dst = dxb + ((oy * stride_ + ky) * static_cast<std::size_t>(w) +
                              ox * stride_) *
                                 in_c_;
              for (int i = 0; i < k_ * in_c_; ++i) dst[i] += cp[i];
              cp += k_ * in_c_;
            }
          }
        }
      }
    }
  }

  ParamStore<S>* ps_;
  int in_c_, out_c_, k_, stride_;
  bool sparse_;
  int w_ = -1, b_ = -1;
  mutable std::vector<S> col_;
  std::vector<S> dcol_;
};

// Transposed convolution (decoder mirror of Conv2D). Weights [Cin, K, K,
// Cout] flattened to (Cin, K*K*Cout); output H = (Hin-1)*stride + K.
template <typename S>
class ConvTranspose2D {
 public:
  ConvTranspose2D(ParamStore<S>& ps, const std::string& prefix, int in_c,
                  int out_c, int ksize, int stride)
      : ps_(&ps), in_c_(in_c), out_c_(out_c), k_(ksize), stride_(stride) {
    w_ = ps.add(prefix + ".w", {in_c, ksize, ksize, out_c});
    b_ = ps.add(prefix + ".b", {out_c});
  }

  void init(Rng& rng, double gain) {
    orthogonal_init(ps_->val(w_), in_c_, k_ * k_ * out_c_, gain, rng);
  }

  int out_dim(int in_dim) const { return (in_dim - 1) * stride_ + k_; }

  void forward(const Tensor<S>& x, Tensor<S>& y) const {
    const int b = x.dim(0), hi = x.dim(1), wi = x.dim(2);
    const int ho = out_dim(hi), wo = out_dim(wi);
    y.resize({b, ho, wo, out_c_});
    const S* bias = ps_->val(b_);
    S* yp = y.data();
    const std::size_t rows = static_cast<std::size_t>(b) * ho * wo;
    for (std::size_t r = 0; r < rows; ++r) {
      std::memcpy(yp + r * out_c_, bias, sizeof(S) * out_c_);
    }
    const int m = b * hi * wi;
    const int patch = k_ * k_ * out_c_;
    col_.resize(static_cast<std::size_t>(m) * patch);
    gemm_nn(m, patch, in_c_, x.data(), in_c_, ps_->val(w_), patch,
            col_.data(), patch, /*accumulate=*/false);
    const S* cp = col_.data();
    for (int bi = 0; bi < b; ++bi) {
      S* yb = yp + static_cast<std::size_t>(bi) * ho * wo * out_c_;
      for (int iy = 0; iy < hi; ++iy) {
        for (int ix = 0; ix < wi; ++ix) {
          for (int ky = 0; ky < k_; ++ky) {
            S* dst = yb + ((iy * stride_ + ky) * static_cast<std::size_t>(wo) +
                           ix * stride_) *
                              out_c_;
            for (int i = 0; i < k_ * out_c_; ++i) dst[i] += cp[i];
            cp += k_ * out_c_;
          }
        }
      }
    }
  }

  void backward(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>* dx) {
    const int b = x.dim(0), hi = x.dim(1), wi = x.dim(2);
    const int ho = dy.dim(1), wo = dy.dim(2);
    const int m = b * hi * wi;
    const int patch = k_ * k_ * out_c_;
    S* db = ps_->grad(b_);
    const S* dyp = dy.data();
    const std::size_t rows = static_cast<std::size_t>(b) * ho * wo;
    for (std::size_t r = 0; r < rows; ++r) {
      for (int c = 0; c < out_c_; ++c) db[c] += dyp[r * out_c_ + c];
    }
    // Gather dcol from dy (inverse of the forward scatter).
    col_.resize(static_cast<std::size_t>(m) * patch);
    S* cp = col_.data();
    for (int bi = 0; bi < b; ++bi) {
      const S* dyb = dyp + static_cast<std::size_t>(bi) * ho * wo * out_c_;
      for (int iy = 0; iy < hi; ++iy) {
        for (int ix = 0; ix < wi; ++ix) {
          for (int ky = 0; ky < k_; ++ky) {
            const S* src =
                dyb + ((iy * stride_ + ky) * static_cast<std::size_t>(wo) +
                       ix * stride_) *
                          out_c_;
            std::memcpy(cp, src, sizeof(S) * k_ * out_c_);
            cp += k_ * out_c_;
          }
        }
      }
    }
    // dW += x^T * dcol
    gemm_tn_acc(m, patch, in_c_, x.data(), in_c_, col_.data(), patch,
                ps_->grad(w_), patch);
    if (dx != nullptr) {
      dx->resize({b, hi, wi, in_c_});
      gemm_nt(m, patch, in_c_, col_.data(), patch, ps_->val(w_), patch,
              dx->data(), in_c_, /*accumulate=*/false);
    }
  }

 private:
  ParamStore<S>* ps_;
  int in_c_, out_c_, k_, stride_;
  int w_ = -1, b_ = -1;
  mutable std::vector<S> col_;
};

// Fully connected layer, weights (In, Out).
template <typename S>
class Linear {
 public:
  Linear(ParamStore<S>& ps, const std::string& prefix, int in, int out)
      : ps_(&ps), in_(in), out_(out) {
    w_ = ps.add(prefix + ".w", {in, out});
    b_ = ps.add(prefix + ".b", {out});
  }

  void init(Rng& rng, double gain) {
    orthogonal_init(ps_->val(w_), in_, out_, gain, rng);
  }

  void forward(const Tensor<S>& x, Tensor<S>& y) const {
    const int b = static_cast<int>(x.size()) / in_;
    y.resize({b, out_});
    const S* bias = ps_->val(b_);
    for (int r = 0; r < b; ++r) {
      std::memcpy(y.data() + static_cast<std::size_t>(r) * out_, bias,
                  sizeof(S) * out_);
    }
    gemm_nn(b, out_, in_, x.data(), in_, ps_->val(w_), out_, y.data(), out_,
            /*accumulate=*/true);
  }

  void backward(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>* dx) {
    const int b = static_cast<int>(x.size()) / in_;
    S* db = ps_->grad(b_);
    const S* dyp = dy.data();
    for (int r = 0; r < b; ++r) {
      for (int c = 0; c < out_; ++c) db[c] += dyp[static_cast<std::size_t>(r) * out_ + c];
    }
    gemm_tn_acc(b, out_, in_, x.data(), in_, dyp, out_, ps_->grad(w_), out_);
    if (dx != nullptr) {
      dx->resize({b, in_});
      gemm_nt(b, out_, in_, dyp, out_, ps_->val(w_), out_, dx->data(), in_,
              /*accumulate=*/false);
    }
  }

 private:
  ParamStore<S>* ps_;
  int in_, out_;
  int w_ = -1, b_ = -1;
};

// Per-channel batch normalization over (B,H,W). Batch statistics in training,
// exponential running statistics (momentum 0.99) when serving.
template <typename S>
class BatchNorm {
 public:
  BatchNorm(ParamStore<S>& ps, const std::string& prefix, int channels,
            double momentum = 0.99, double eps = 1e-5)
      : ps_(&ps), c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = ps.add(prefix + ".gamma", {channels});
    beta_ = ps.add(prefix + ".beta", {channels});
    rmean_ = ps.add(prefix + ".running_mean", {channels}, /*trainable=*/false);
    rvar_ = ps.add(prefix + ".running_var", {channels}, /*trainable=*/false);
  }

  void init() {
    S* g = ps_->val(gamma_);
    S* rv = ps_->val(rvar_);
    for (int c = 0; c < c_; ++c) {
      g[c] = S(1);
      rv[c] = S(1);
    }
  }

  void forward(const Tensor<S>& x, Tensor<S>& y, bool train) {
    const std::size_t n = x.size() / c_;
    y.resize(x.shape());
    if (train) {
      mean_.assign(c_, 0.0);
      var_.assign(c_, 0.0);
      const S* xp = x.data();
      for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < c_; ++c) mean_[c] += xp[r * c_ + c];
      }
      for (int c = 0; c < c_; ++c) mean_[c] /= static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < c_; ++c) {
          const double d = xp[r * c_ + c] - mean_[c];
          var_[c] += d * d;
        }
      }
      for (int c = 0; c < c_; ++c) var_[c] /= static_cast<double>(n);
      S* rm = ps_->val(rmean_);
      S* rv = ps_->val(rvar_);
      for (int c = 0; c < c_; ++c) {
        rm[c] = static_cast<S>(momentum_ * rm[c] + (1.0 - momentum_) * mean_[c]);
        rv[c] = static_cast<S>(momentum_ * rv[c] + (1.0 - momentum_) * var_[c]);
      }
      inv_std_.resize(c_);
      for (int c = 0; c < c_; ++c) {
        inv_std_[c] = 1.0 / std::sqrt(var_[c] + eps_);
      }
      xhat_.resize(x.shape());
      const S* g = ps_->val(gamma_);
      const S* bt = ps_->val(beta_);
      S* xh = xhat_.data();
      S* yp = y.data();
      for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < c_; ++c) {
          const S h = static_cast<S>((xp[r * c_ + c] - mean_[c]) * inv_std_[c]);
          xh[r * c_ + c] = h;
          yp[r * c_ + c] = g[c] * h + bt[c];
        }
      }
    } else {
      const S* rm = ps_->val(rmean_);
      const S* rv = ps_->val(rvar_);
      const S* g = ps_->val(gamma_);
      const S* bt = ps_->val(beta_);
      std::vector<double> scale(c_), shift(c_);
      for (int c = 0; c < c_; ++c) {
        const double is = 1.0 / std::sqrt(static_cast<double>(rv[c]) + eps_);
        scale[c] = g[c] * is;
        shift[c] = bt[c] - scale[c] * rm[c];
      }
      const S* xp = x.data();
      S* yp = y.data();
      for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < c_; ++c) {
          yp[r * c_ + c] = static_cast<S>(scale[c] * xp[r * c_ + c] + shift[c]);
        }
      }
    }
  }

  // Training-mode backward (batch statistics are part of the graph).
  void backward(const Tensor<S>& dy, Tensor<S>& dx) {
    const std::size_t n = dy.size() / c_;
    dx.resize(dy.shape());
    S* dg = ps_->grad(gamma_);
    S* db = ps_->grad(beta_);
    std::vector<double> sum_dy(c_, 0.0), sum_dy_xhat(c_, 0.0);
    const S* dyp = dy.data();
    const S* xh = xhat_.data();
    for (std::size_t r = 0; r < n; ++r) {
      for (int c = 0; c < c_; ++c) {
        sum_dy[c] += dyp[r * c_ + c];
        sum_dy_xhat[c] += static_cast<double>(dyp[r * c_ + c]) * xh[r * c_ + c];
      }
    }
    for (int c = 0; c < c_; ++c) {
      dg[c] += static_cast<S>(sum_dy_xhat[c]);
      db[c] += static_cast<S>(sum_dy[c]);
    }
    const S* g = ps_->val(gamma_);
    S* dxp = dx.data();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (int c = 0; c < c_; ++c) {
        const double t = static_cast<double>(dyp[r * c_ + c]) -
                         inv_n * sum_dy[c] -
                         inv_n * sum_dy_xhat[c] * xh[r * c_ + c];
        dxp[r * c_ + c] = static_cast<S>(g[c] * inv_std_[c] * t);
      }
    }
  }

 private:
  ParamStore<S>* ps_;
  int c_;
  double momentum_, eps_;
  int gamma_ = -1, beta_ = -1, rmean_ = -1, rvar_ = -1;
  std::vector<double> mean_, var_, inv_std_;
  Tensor<S> xhat_;
};

template <typename S>
void relu_forward(const Tensor<S>& x, Tensor<S>& y) {
  y.resize(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] > S(0) ? x[i] : S(0);
  }
}

template <typename S>
void relu_backward(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>& dx) {
  dx.resize(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i] = x[i] > S(0) ? dy[i] : S(0);
  }
}

template <typename S>
void leaky_relu_forward(const Tensor<S>& x, Tensor<S>& y, S slope) {
  y.resize(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] > S(0) ? x[i] : slope * x[i];
  }
}

template <typename S>
void leaky_relu_backward(const Tensor<S>& x, const Tensor<S>& dy,
                         Tensor<S>& dx, S slope) {
  dx.resize(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i] = x[i] > S(0) ? dy[i] : slope * dy[i];
  }
}

// Scales trainable gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename S>
double clip_grad_norm(ParamStore<S>& ps, double max_norm) {
  double sq = 0.0;
  for (const auto& e : ps.entries()) {
    if (!e.trainable) continue;
    const S* g = ps.grads().data() + e.offset;
    for (std::size_t i = 0; i < e.size; ++i) {
      sq += static_cast<double>(g[i]) * g[i];
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / (norm + 1e-12));
    for (const auto& e : ps.entries()) {
      if (!e.trainable) continue;
      S* g = ps.grads().data() + e.offset;
      for (std::size_t i = 0; i < e.size; ++i) g[i] *= scale;
    }
  }
  return norm;
}

// Adaptive-moment optimizer over a ParamStore's trainable entries.
template <typename S>
class Adam {
 public:
  explicit Adam(ParamStore<S>& ps, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : ps_(&ps), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.assign(ps.values().size(), 0.0);
    v_.assign(ps.values().size(), 0.0);
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (const auto& e : ps_->entries()) {
      if (!e.trainable) continue;
      S* p = ps_->values().data() + e.offset;
      const S* g = ps_->grads().data() + e.offset;
      double* m = m_.data() + e.offset;
      double* v = v_.data() + e.offset;
      for (std::size_t i = 0; i < e.size; ++i) {
        const double gi = g[i];
        m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
        v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] = static_cast<S>(p[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  ParamStore<S>* ps_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace gameirl

#endif  // GAMEIRL_CORE_LAYERS_HPP_
