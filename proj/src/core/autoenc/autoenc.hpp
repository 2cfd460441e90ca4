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

#ifndef GAMEIRL_CORE_AUTOENC_AUTOENC_HPP_
#define GAMEIRL_CORE_AUTOENC_AUTOENC_HPP_

#include <string>
#include <vector>

#include "core/envs/catcher.hpp"
#include "core/layers.hpp"
#include "core/nets/nets.hpp"
#include "core/tensor.hpp"

namespace gameirl::autoenc {

enum class AEMode { kPixelClass, kMse };

struct AEConfig {
  AEMode mode = AEMode::kPixelClass;
  int classes = 8;      // K
  int embed = 32;       // E
  int epochs = 20;
  int batch = 64;
  double lr = 1e-3;
  double sigma_min = 1e-3;
  uint64_t seed = 0;
};

// Frame autoencoder. The pixel-class variant decodes per-pixel class logits
// over K globally shared Gaussians (mu_k, sigma_k); the mse variant decodes
// the pixel value directly. Single-frame input, NHWC.
template <typename S>
class Autoencoder {
 public:
  struct Cache {
    // encoder
    Tensor<S> ez1, ea1, ez2, ea2, ez3, ea3, embed;
    // decoder
    Tensor<S> dz0, da0, dz1, da1, dz2, da2, out;
  };

  Autoencoder(AEMode mode, int classes, int embed, double sigma_min = 1e-3)
      : mode_(mode),
        k_(mode == AEMode::kPixelClass ? classes : 1),
        e_(embed),
        sigma_min_(sigma_min),
        ec1_(ps_, "enc.conv1", 1, 32, 8, 4, /*sparse_input=*/true),
        ec2_(ps_, "enc.conv2", 32, 64, 4, 2),
        ec3_(ps_, "enc.conv3", 64, 64, 3, 1),
        efc_(ps_, "enc.fc", nets::kConvFlat, embed),
        dfc_(ps_, "dec.fc", embed, nets::kConvFlat),
        dd1_(ps_, "dec.deconv1", 64, 64, 3, 1),
        dd2_(ps_, "dec.deconv2", 64, 32, 4, 2),
        dd3_(ps_, "dec.deconv3", 32,
             mode == AEMode::kPixelClass ? classes : 1, 8, 4) {
    if (mode_ == AEMode::kPixelClass) {
      mu_ = ps_.add("mix.mu", {k_});
      sigma_raw_ = ps_.add("mix.sigma_raw", {k_});
    }
    ps_.finalize();
    if (mode_ == AEMode::kPixelClass) {
      // Means evenly spread over the luminance range, sigma at 0.1.
      S* mu = ps_.val(mu_);
      S* raw = ps_.val(sigma_raw_);
      for (int k = 0; k < k_; ++k) {
        mu[k] = k_ == 1 ? S(0.5) : static_cast<S>(k) / static_cast<S>(k_ - 1);
        raw[k] = inverse_softplus(S(0.1) - static_cast<S>(sigma_min_));
      }
    }
  }

  void init(Rng& rng) {
    const double g = std::sqrt(2.0);
    ec1_.init(rng, g);
    ec2_.init(rng, g);
    ec3_.init(rng, g);
    efc_.init(rng, 1.0);
    dfc_.init(rng, g);
    dd1_.init(rng, g);
    dd2_.init(rng, g);
    dd3_.init(rng, 1.0);
  }

  static S inverse_softplus(S y) { return std::log(std::expm1(y)); }

  std::string arch_tag() const {
    return mode_ == AEMode::kPixelClass ? "ae:pixel_class" : "ae:mse";
  }

  // x: (B, 84, 84, 1) -> embedding (B, E)
  void encode(const Tensor<S>& x, Cache& c) const {
    if (x.dim(1) != 84 || x.dim(2) != 84 || x.dim(3) != 1) {
      throw UsageError("encode: frame must be 84x84x1");
    }
    ec1_.forward(x, c.ez1);
    leaky_relu_forward(c.ez1, c.ea1, kSlope);
    ec2_.forward(c.ea1, c.ez2);
    leaky_relu_forward(c.ez2, c.ea2, kSlope);
    ec3_.forward(c.ea2, c.ez3);
    leaky_relu_forward(c.ez3, c.ea3, kSlope);
    efc_.forward(c.ea3, c.embed);
  }

  // embedding (B, E) -> (B, 84, 84, K) logits or (B, 84, 84, 1) pixels
  void decode(const Tensor<S>& e, Cache& c) const {
    if (e.dim(1) != e_) throw UsageError("decode: embedding dimension mismatch");
    const int b = e.dim(0);
    dfc_.forward(e, c.dz0);
    leaky_relu_forward(c.dz0, c.da0, kSlope);
    c.da0.reshape({b, 7, 7, 64});
    dd1_.forward(c.da0, c.dz1);
    leaky_relu_forward(c.dz1, c.da1, kSlope);
    dd2_.forward(c.da1, c.dz2);
    leaky_relu_forward(c.dz2, c.da2, kSlope);
    dd3_.forward(c.da2, c.out);
  }

  void forward(const Tensor<S>& x, Cache& c) const {
    encode(x, c);
    decode(c.embed, c);
  }

  // Full backward from d_out (gradient w.r.t. decoder output).
  void backward(const Tensor<S>& x, Cache& c, const Tensor<S>& d_out) {
    Tensor<S>&d_da2 = scratch_[0], &d_dz2 = scratch_[1], &d_da1 = scratch_[2],
             &d_dz1 = scratch_[3], &d_da0 = scratch_[4], &d_dz0 = scratch_[5],
             &d_embed = scratch_[6], &d_ea3 = scratch_[7], &d_ez3 = scratch_[8],
             &d_ea2 = scratch_[9], &d_ez2 = scratch_[10], &d_ea1 = scratch_[11],
             &d_ez1 = scratch_[12];
    dd3_.backward(c.da2, d_out, &d_da2);
    leaky_relu_backward(c.dz2, d_da2, d_dz2, kSlope);
    dd2_.backward(c.da1, d_dz2, &d_da1);
    leaky_relu_backward(c.dz1, d_da1, d_dz1, kSlope);
    dd1_.backward(c.da0, d_dz1, &d_da0);
    leaky_relu_backward(c.dz0, d_da0, d_dz0, kSlope);
    dfc_.backward(c.embed, d_dz0, &d_embed);
    efc_.backward(c.ea3, d_embed, &d_ea3);
    leaky_relu_backward(c.ez3, d_ea3, d_ez3, kSlope);
    ec3_.backward(c.ea2, d_ez3, &d_ea2);
    leaky_relu_backward(c.ez2, d_ea2, d_ez2, kSlope);
    ec2_.backward(c.ea1, d_ez2, &d_ea1);
    leaky_relu_backward(c.ez1, d_ea1, d_ez1, kSlope);
    ec1_.backward(x, d_ez1, nullptr);
  }

  AEMode mode() const { return mode_; }
  int classes() const { return k_; }
  int embed_dim() const { return e_; }
  double sigma_min() const { return sigma_min_; }

  const S* mu() const { return ps_.val(mu_); }
  S* mu_grad() { return ps_.grad(mu_); }
  const S* sigma_raw() const { return ps_.val(sigma_raw_); }
  S* sigma_raw_grad() { return ps_.grad(sigma_raw_); }

  // sigma_k = sigma_min + softplus(raw_k), so the floor holds throughout.
  void sigmas(std::vector<S>& out) const {
    out.resize(k_);
    const S* raw = ps_.val(sigma_raw_);
    for (int k = 0; k < k_; ++k) {
      out[k] = static_cast<S>(sigma_min_) + softplus(raw[k]);
    }
  }

  ParamStore<S>& params() { return ps_; }
  const ParamStore<S>& params() const { return ps_; }

  nets::ParamSet snapshot() const { return nets::to_param_set(ps_, arch_tag()); }
  void restore(const nets::ParamSet& set) {
    nets::from_param_set(set, arch_tag(), ps_);
  }

 private:
  static constexpr S kSlope = S(0.2);

  AEMode mode_;
  int k_, e_;
  double sigma_min_;
  ParamStore<S> ps_;
  Conv2D<S> ec1_, ec2_, ec3_;
  Linear<S> efc_;
  Linear<S> dfc_;
  ConvTranspose2D<S> dd1_, dd2_, dd3_;
  int mu_ = -1, sigma_raw_ = -1;
  Tensor<S> scratch_[13];
};

// Negative log likelihood of frames under the mixture observation model:
// -(1/(B*H*W)) * sum_ij log sum_k softmax(z_ij)_k * N(x_ij; mu_k, sigma_k^2),
// log-sum-exp stabilized. Optional gradients w.r.t. logits, mu and sigma.
template <typename S>
S mixture_nll(const Tensor<S>& logits, const S* mu, const S* sigma, int k,
              const Tensor<S>& frames, double sigma_min = 1e-3,
              Tensor<S>* dlogits = nullptr, S* dmu = nullptr,
              S* dsigma = nullptr) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  for (int j = 0; j < k; ++j) {
    if (!(sigma[j] >= static_cast<S>(sigma_min))) {
      throw UsageError("mixture_nll: sigma below sigma_min");
    }
  }
  const std::size_t pixels = logits.size() / k;
  if (frames.size() != pixels) {
    throw UsageError("mixture_nll: frame/logit shape mismatch");
  }
  if (dlogits != nullptr) {
    dlogits->resize(logits.shape());
  }
  std::vector<double> ls(k), lg(k), w(k), p(k);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    const S* z = logits.data() + i * k;
    const double x = frames[i];
    double zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double zsum = 0.0;
    for (int j = 0; j < k; ++j) zsum += std::exp(z[j] - zmax);
    const double zlse = zmax + std::log(zsum);
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      ls[j] = z[j] - zlse;
      const double t = (x - mu[j]) / sigma[j];
      lg[j] = -0.5 * t * t - std::log(static_cast<double>(sigma[j])) - kHalfLog2Pi;
      m = std::max(m, ls[j] + lg[j]);
    }
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(ls[j] + lg[j] - m);
    const double ll = m + std::log(s);
    total -= ll * inv_n;
    if (dlogits != nullptr || dmu != nullptr || dsigma != nullptr) {
      for (int j = 0; j < k; ++j) {
        w[j] = std::exp(ls[j] + lg[j] - ll);
        p[j] = std::exp(ls[j]);
      }
      if (dlogits != nullptr) {
        S* dz = dlogits->data() + i * k;
        for (int j = 0; j < k; ++j) {
          dz[j] = static_cast<S>(-(w[j] - p[j]) * inv_n);
        }
      }
      for (int j = 0; j < k; ++j) {
        const double diff = x - mu[j];
        const double s2 = static_cast<double>(sigma[j]) * sigma[j];
        if (dmu != nullptr) {
          dmu[j] += static_cast<S>(-(w[j] * diff / s2) * inv_n);
        }
        if (dsigma != nullptr) {
          dsigma[j] += static_cast<S>(
              -(w[j] * (diff * diff / (s2 * sigma[j]) - 1.0 / sigma[j])) * inv_n);
        }
      }
    }
  }
  return static_cast<S>(total);
}

// Reconstruction: pixel_class mode picks mu of the argmax class (ties to the
// lowest index); mse mode clamps the decoder output to [0, 1].
template <typename S>
void reconstruct_from_output(const Tensor<S>& out, AEMode mode, const S* mu,
                             int k, std::vector<S>& pixels) {
  if (mode == AEMode::kPixelClass) {
    const std::size_t n = out.size() / k;
    pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const S* z = out.data() + i * k;
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (z[j] > z[best]) best = j;
      }
      pixels[i] = mu[best];
    }
  } else {
    pixels.assign(out.data(), out.data() + out.size());
    for (auto& v : pixels) v = std::clamp(v, S(0), S(1));
  }
}

struct TrainAEResult {
  std::vector<double> epoch_loss;
};

// Maximum-likelihood (pixel_class) or least-squares (mse) minibatch training.
template <typename S>
TrainAEResult train_autoencoder(Autoencoder<S>& model,
                                const envs::FrameCorpus& corpus,
                                const AEConfig& cfg);

// Convenience single-frame paths used by evaluation code and the C API.
std::vector<float> encode_frame(Autoencoder<float>& model, const uint8_t* frame);
std::vector<float> reconstruct_frame(Autoencoder<float>& model,
                                     const uint8_t* frame);

// Draws a frame from the generative model: class per pixel from the logits'
// softmax, then Gaussian noise around the class mean.
std::vector<float> sample_frame(Autoencoder<float>& model,
                                const std::vector<float>& embedding, Rng& rng);

}  // namespace gameirl::autoenc

#endif  // GAMEIRL_CORE_AUTOENC_AUTOENC_HPP_
