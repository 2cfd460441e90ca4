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

#include "core/autoenc/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/common.hpp"
#include "core/numeric.hpp"

namespace gameirl::autoenc {

namespace {
constexpr std::size_t kPixels = 84 * 84;
}

template <typename S>
TrainAEResult train_autoencoder(Autoencoder<S>& model,
                                const envs::FrameCorpus& corpus,
                                const AEConfig& cfg) {
  if (corpus.count <= 0) throw UsageError("train_autoencoder: empty corpus");
  Rng rng = Rng::derive(cfg.seed, "ae-train");
  Adam<S> opt(model.params(), cfg.lr);

  std::vector<int> order(corpus.count);
  std::iota(order.begin(), order.end(), 0);

  typename Autoencoder<S>::Cache cache;
  Tensor<S> batch, d_out, target;
  std::vector<S> sigma;
  std::vector<double> dmu, dsigma;

  TrainAEResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long batches = 0;
    for (int start = 0; start < corpus.count; start += cfg.batch) {
      const int b = std::min(cfg.batch, corpus.count - start);
      batch.resize({b, 84, 84, 1});
      for (int i = 0; i < b; ++i) {
        nets::bytes_to_scalar(
            corpus.frames.data() +
                static_cast<std::size_t>(order[start + i]) * kPixels,
            kPixels, batch.data() + static_cast<std::size_t>(i) * kPixels);
      }
      model.forward(batch, cache);

      double loss;
      if (model.mode() == AEMode::kPixelClass) {
        model.sigmas(sigma);
        const int k = model.classes();
        std::vector<S> dmu_s(k, S(0)), dsigma_s(k, S(0));
        loss = mixture_nll<S>(cache.out, model.mu(), sigma.data(), k, batch,
                              model.sigma_min(), &d_out, dmu_s.data(),
                              dsigma_s.data());
        model.params().zero_grads();
        model.backward(batch, cache, d_out);
        // Chain mixture gradients through sigma = sigma_min + softplus(raw).
        S* gmu = model.mu_grad();
        S* graw = model.sigma_raw_grad();
        const S* raw = model.sigma_raw();
        for (int j = 0; j < k; ++j) {
          gmu[j] += dmu_s[j];
          graw[j] += dsigma_s[j] * sigmoid(raw[j]);
        }
      } else {
        // Mean squared reconstruction error.
        d_out.resize(cache.out.shape());
        const double inv_n = 1.0 / static_cast<double>(cache.out.size());
        double mse = 0.0;
        for (std::size_t i = 0; i < cache.out.size(); ++i) {
          const double diff = cache.out[i] - batch[i];
          mse += diff * diff * inv_n;
          d_out[i] = static_cast<S>(2.0 * diff * inv_n);
        }
        loss = mse;
        model.params().zero_grads();
        model.backward(batch, cache, d_out);
      }
      if (!std::isfinite(loss)) {
        throw DivergenceError("divergence: non-finite autoencoder loss");
      }
      opt.step();
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / std::max(1L, batches));
  }
  return result;
}

template TrainAEResult train_autoencoder<float>(Autoencoder<float>&,
                                                const envs::FrameCorpus&,
                                                const AEConfig&);
template TrainAEResult train_autoencoder<double>(Autoencoder<double>&,
                                                 const envs::FrameCorpus&,
                                                 const AEConfig&);

std::vector<float> encode_frame(Autoencoder<float>& model,
                                const uint8_t* frame) {
  Tensor<float> x({1, 84, 84, 1});
  nets::bytes_to_scalar(frame, kPixels, x.data());
  Autoencoder<float>::Cache cache;
  model.encode(x, cache);
  return std::vector<float>(cache.embed.data(),
                            cache.embed.data() + model.embed_dim());
}

std::vector<float> reconstruct_frame(Autoencoder<float>& model,
                                     const uint8_t* frame) {
  Tensor<float> x({1, 84, 84, 1});
  nets::bytes_to_scalar(frame, kPixels, x.data());
  Autoencoder<float>::Cache cache;
  model.forward(x, cache);
  std::vector<float> pixels;
  std::vector<float> sigma;
  if (model.mode() == AEMode::kPixelClass) {
    reconstruct_from_output(cache.out, model.mode(), model.mu(),
                            model.classes(), pixels);
  } else {
    reconstruct_from_output<float>(cache.out, model.mode(), nullptr, 1, pixels);
  }
  return pixels;
}

std::vector<float> sample_frame(Autoencoder<float>& model,
                                const std::vector<float>& embedding, Rng& rng) {
  if (model.mode() != AEMode::kPixelClass) {
    throw UsageError("sample_frame requires a pixel-class model");
  }
  Tensor<float> e({1, model.embed_dim()});
  std::copy(embedding.begin(), embedding.end(), e.data());
  Autoencoder<float>::Cache cache;
  model.decode(e, cache);
  const int k = model.classes();
  std::vector<float> sigma;
  model.sigmas(sigma);
  std::vector<float> pixels(kPixels);
  std::vector<float> p(k);
  for (std::size_t i = 0; i < kPixels; ++i) {
    softmax(cache.out.data() + i * k, p.data(), k);
    const double u = rng.uniform();
    double acc = 0.0;
    int c = k - 1;
    for (int j = 0; j < k; ++j) {
      acc += p[j];
      if (u < acc) {
        c = j;
        break;
      }
    }
    pixels[i] =
        model.mu()[c] + sigma[c] * static_cast<float>(rng.normal());
  }
  return pixels;
}

}  // namespace gameirl::autoenc
