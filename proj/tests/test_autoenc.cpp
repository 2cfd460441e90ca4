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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/autoenc/autoenc.hpp"
#include "core/common.hpp"

using namespace gameirl;
using namespace gameirl::autoenc;

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

TEST_CASE("mixture nll closed-form cases") {
  SUBCASE("K=1, sigma=1, x at the mean") {
    Tensor<double> logits({1, 1, 1, 1});
    Tensor<double> frame({1, 1, 1, 1});
    logits[0] = 3.7;  // irrelevant for K=1
    frame[0] = 0.25;
    const double mu[1] = {0.25};
    const double sigma[1] = {1.0};
    const double nll = mixture_nll(logits, mu, sigma, 1, frame);
    CHECK(nll == doctest::Approx(kHalfLog2Pi).epsilon(1e-12));
  }
  SUBCASE("K=2, uniform logits, mu=(0,1), sigma=(1,1), x=0") {
    Tensor<double> logits({1, 1, 1, 2});
    Tensor<double> frame({1, 1, 1, 1});
    logits[0] = 0.0;
    logits[1] = 0.0;
    frame[0] = 0.0;
    const double mu[2] = {0.0, 1.0};
    const double sigma[2] = {1.0, 1.0};
    const double nll = mixture_nll(logits, mu, sigma, 2, frame);
    // -ln(0.5*N(0;0,1) + 0.5*N(0;1,1)), evaluated by hand.
    const double n0 = std::exp(-0.0) / std::sqrt(2.0 * M_PI);
    const double n1 = std::exp(-0.5) / std::sqrt(2.0 * M_PI);
    const double expect = -std::log(0.5 * n0 + 0.5 * n1);
    CHECK(expect == doctest::Approx(1.1380087295845114).epsilon(1e-12));
    CHECK(nll == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("mixture nll softmax shift invariance and K=1 exactness") {
  Rng rng(31);
  Tensor<double> logits({1, 3, 3, 4});
  Tensor<double> frame({1, 3, 3, 1});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = rng.uniform();
  const double mu[4] = {0.1, 0.4, 0.6, 0.9};
  const double sigma[4] = {0.3, 0.2, 0.5, 0.7};

  const double base = mixture_nll(logits, mu, sigma, 4, frame);
  Tensor<double> shifted = logits;
  for (std::size_t px = 0; px < 9; ++px) {
    for (int k = 0; k < 4; ++k) shifted[px * 4 + k] += 11.5;
  }
  const double moved = mixture_nll(shifted, mu, sigma, 4, frame);
  CHECK(std::abs(base - moved) <= 1e-6);

  // K=1 equals the plain Gaussian NLL formula exactly.
  Tensor<double> l1({1, 3, 3, 1});
  const double mu1[1] = {0.37};
  const double s1[1] = {0.21};
  const double nll = mixture_nll(l1, mu1, s1, 1, frame);
  double expect = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double t = (frame[i] - mu1[0]) / s1[0];
    expect += (0.5 * t * t + std::log(s1[0]) + kHalfLog2Pi) / 9.0;
  }
  CHECK(nll == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("per-pixel mixture density integrates to one") {
  Rng rng(32);
  const int k = 5;
  double mu[k], sigma[k], z[k], p[k];
  for (int j = 0; j < k; ++j) {
    mu[j] = rng.uniform();
    sigma[j] = 0.05 + 0.95 * rng.uniform();
    z[j] = 2.0 * rng.normal();
  }
  softmax(z, p, k);
  // Trapezoid quadrature of sum_k p_k N(x; mu_k, sigma_k^2) over [-8, 9].
  const int steps = 200000;
  const double lo = -8.0, hi = 9.0;
  const double h = (hi - lo) / steps;
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + h * i;
    double density = 0.0;
    for (int j = 0; j < k; ++j) {
      const double t = (x - mu[j]) / sigma[j];
      density += p[j] * std::exp(-0.5 * t * t) /
                 (sigma[j] * std::sqrt(2.0 * M_PI));
    }
    integral += density * h * ((i == 0 || i == steps) ? 0.5 : 1.0);
  }
  CHECK(std::abs(integral - 1.0) <= 1e-4);
}

TEST_CASE("mixture nll gradients match central finite differences") {
  Rng rng(33);
  const int k = 3;
  Tensor<double> logits({1, 2, 2, k});
  Tensor<double> frame({1, 2, 2, 1});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = rng.uniform();
  double mu[k] = {0.2, 0.5, 0.8};
  double sigma[k] = {0.4, 0.3, 0.6};

  Tensor<double> dlogits;
  double dmu[k] = {0, 0, 0}, dsigma[k] = {0, 0, 0};
  mixture_nll(logits, mu, sigma, k, frame, 1e-3, &dlogits, dmu, dsigma);

  const double step = 1e-6;
  const auto check = [&](double analytic, double* slot) {
    const double orig = *slot;
    *slot = orig + step;
    const double fp = mixture_nll(logits, mu, sigma, k, frame);
    *slot = orig - step;
    const double fm = mixture_nll(logits, mu, sigma, k, frame);
    *slot = orig;
    const double num = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(num), std::abs(analytic), 1e-3});
    CHECK(std::abs(num - analytic) / denom <= 1e-4);
  };
  for (std::size_t i = 0; i < logits.size(); ++i) check(dlogits[i], &logits[i]);
  for (int j = 0; j < k; ++j) check(dmu[j], &mu[j]);
  for (int j = 0; j < k; ++j) check(dsigma[j], &sigma[j]);

  double bad_sigma[k] = {1e-5, 0.3, 0.6};
  CHECK_THROWS_AS(mixture_nll(logits, mu, bad_sigma, k, frame), UsageError);
}

TEST_CASE("encoder and decoder shapes, zero-weight behavior") {
  Autoencoder<float> model(AEMode::kPixelClass, 8, 32);
  Rng rng(34);
  const envs::FrameCorpus corpus = envs::collect_random_frames(3, 5);

  Tensor<float> x({1, 84, 84, 1});
  nets::bytes_to_scalar(corpus.frames.data(), 84 * 84, x.data());
  Autoencoder<float>::Cache c;

  // Zero weights: zero embedding, uniform class logits at every pixel.
  model.encode(x, c);
  CHECK(c.embed.shape() == std::vector<int>{1, 32});
  for (std::size_t i = 0; i < c.embed.size(); ++i) CHECK(c.embed[i] == 0.0f);

  model.forward(x, c);
  CHECK(c.out.shape() == std::vector<int>{1, 84, 84, 8});
  for (std::size_t px = 0; px < 84 * 84; ++px) {
    for (int j = 1; j < 8; ++j) {
      REQUIRE(c.out[px * 8 + j] == c.out[px * 8]);
    }
  }

  // Identical frames give identical embeddings after init.
  Rng ir(35);
  model.init(ir);
  model.encode(x, c);
  std::vector<float> e1(c.embed.data(), c.embed.data() + 32);
  model.encode(x, c);
  std::vector<float> e2(c.embed.data(), c.embed.data() + 32);
  CHECK(e1 == e2);

  Tensor<float> bad({1, 84, 84, 4});
  CHECK_THROWS_AS(model.encode(bad, c), UsageError);
}

TEST_CASE("reconstruct tie-breaking and value set") {
  SUBCASE("uniform logits pick the lowest class index") {
    Tensor<float> out({1, 2, 2, 2});
    out.fill(0.0f);
    const float mu[2] = {0.2f, 0.8f};
    std::vector<float> pixels;
    reconstruct_from_output(out, AEMode::kPixelClass, mu, 2, pixels);
    for (float v : pixels) CHECK(v == 0.2f);
  }
  SUBCASE("K=1 reconstruction is constant mu0") {
    Tensor<float> out({1, 2, 2, 1});
    out.fill(-3.0f);
    const float mu[1] = {0.41f};
    std::vector<float> pixels;
    reconstruct_from_output(out, AEMode::kPixelClass, mu, 1, pixels);
    for (float v : pixels) CHECK(v == 0.41f);
  }
  SUBCASE("pixel-class reconstructions only emit class means") {
    Autoencoder<float> model(AEMode::kPixelClass, 4, 16);
    Rng ir(36);
    model.init(ir);
    const envs::FrameCorpus corpus = envs::collect_random_frames(2, 9);
    const auto pixels = reconstruct_frame(model, corpus.frames.data());
    std::vector<float> allowed(model.mu(), model.mu() + 4);
    for (float v : pixels) {
      bool ok = false;
      for (float m : allowed) ok = ok || v == m;
      REQUIRE(ok);
    }
  }
  SUBCASE("mse mode output is clamped to [0,1]") {
    Tensor<float> out({1, 2, 2, 1});
    out[0] = -0.5f;
    out[1] = 0.25f;
    out[2] = 1.5f;
    out[3] = 1.0f;
    std::vector<float> pixels;
    reconstruct_from_output<float>(out, AEMode::kMse, nullptr, 1, pixels);
    CHECK(pixels[0] == 0.0f);
    CHECK(pixels[1] == 0.25f);
    CHECK(pixels[2] == 1.0f);
    CHECK(pixels[3] == 1.0f);
  }
}

TEST_CASE("training reduces loss and keeps sigma off the floor") {
  const envs::FrameCorpus corpus = envs::collect_random_frames(400, 77);
  AEConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 64;
  cfg.seed = 5;

  SUBCASE("pixel-class nll decreases") {
    Autoencoder<float> model(AEMode::kPixelClass, cfg.classes, cfg.embed);
    Rng ir = Rng::derive(cfg.seed, "ae-init");
    model.init(ir);
    const TrainAEResult res = train_autoencoder(model, corpus, cfg);
    REQUIRE(res.epoch_loss.size() == 3);
    CHECK(res.epoch_loss.back() < res.epoch_loss.front());
    std::vector<float> sigma;
    model.sigmas(sigma);
    for (float s : sigma) CHECK(s > 1.1f * 1e-3f);
  }

  SUBCASE("mse mode memorizes a constant corpus") {
    envs::FrameCorpus constant = corpus;
    for (int i = 1; i < constant.count; ++i) {
      std::memcpy(constant.frames.data() + static_cast<std::size_t>(i) * 84 * 84,
                  constant.frames.data(), 84 * 84);
    }
    AEConfig mcfg = cfg;
    mcfg.mode = AEMode::kMse;
    mcfg.epochs = 12;
    mcfg.lr = 3e-3;
    Autoencoder<float> model(AEMode::kMse, 1, mcfg.embed);
    Rng ir = Rng::derive(mcfg.seed, "ae-init");
    model.init(ir);
    const TrainAEResult res = train_autoencoder(model, constant, mcfg);
    CHECK(res.epoch_loss.back() < 1e-3);
  }

  SUBCASE("empty corpus is rejected") {
    envs::FrameCorpus empty;
    Autoencoder<float> model(AEMode::kMse, 1, 8);
    CHECK_THROWS_AS(train_autoencoder(model, empty, cfg), UsageError);
  }
}

TEST_CASE("decode in mse mode cannot produce class logits") {
  Autoencoder<float> model(AEMode::kMse, 1, 8);
  CHECK(model.mode() == AEMode::kMse);
  Rng rng(40);
  CHECK_THROWS_AS(sample_frame(model, std::vector<float>(8, 0.0f), rng),
                  UsageError);
}
