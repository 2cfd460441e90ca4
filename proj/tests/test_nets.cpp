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
#include <filesystem>

#include "core/nets/nets.hpp"
#include "core/util/fs.hpp"

using namespace gameirl;
using namespace gameirl::nets;

namespace {

template <typename S>
Tensor<S> frame_batch(int b, int stack, Rng& rng, double density = 0.05) {
  Tensor<S> t({b, 84, 84, stack});
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform() < density ? S(1) : S(0);
  }
  return t;
}

// Dense inputs and jittered biases keep pre-activations away from the exact
// ReLU kinks where one-sided derivatives would spoil a finite difference.
template <typename S>
Tensor<S> dense_batch(int b, int stack, Rng& rng) {
  Tensor<S> t({b, 84, 84, stack});
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<S>(rng.uniform());
  }
  return t;
}

template <typename Net>
void jitter_biases(Net& net, Rng& rng) {
  auto& ps = net.params();
  using Scalar = std::remove_reference_t<decltype(ps.values()[0])>;
  for (const auto& e : ps.entries()) {
    if (!e.trainable || e.name.find(".b") == std::string::npos) continue;
    for (std::size_t i = 0; i < e.size; ++i) {
      ps.values()[e.offset + i] += static_cast<Scalar>(0.05 * rng.normal());
    }
  }
}

// Directional derivative check: analytic dot(grad, dir) against a central
// difference of the loss along dir.
template <typename Net, typename LossFn>
void check_directional(Net& net, LossFn&& loss_and_grads, double step,
                       double tol, Rng& rng) {
  auto& ps = net.params();
  ps.zero_grads();
  loss_and_grads();  // fills ps.grads()

  std::vector<double> dir(ps.values().size());
  for (auto& d : dir) d = rng.normal();

  double analytic = 0.0;
  for (const auto& e : ps.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.size; ++i) {
      analytic += ps.grads()[e.offset + i] * dir[e.offset + i];
    }
  }

  std::vector<double> backup(ps.values().begin(), ps.values().end());
  const auto eval = [&](double eps) {
    for (const auto& e : ps.entries()) {
      if (!e.trainable) continue;
      for (std::size_t i = 0; i < e.size; ++i) {
        ps.values()[e.offset + i] = backup[e.offset + i] + eps * dir[e.offset + i];
      }
    }
    ps.zero_grads();
    return loss_and_grads();
  };
  const double fp = eval(step);
  const double fm = eval(-step);
  for (std::size_t i = 0; i < backup.size(); ++i) ps.values()[i] = backup[i];
  const double numeric = (fp - fm) / (2.0 * step);
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  CHECK(std::abs(analytic - numeric) / denom <= tol);
}

}  // namespace

TEST_CASE("policy forward shapes, purity and zero-head behavior") {
  PolicyNet<float> net(4);  // zero-initialized: logits and value exactly 0
  Rng rng(3);
  Tensor<float> x = frame_batch<float>(5, 4, rng);
  // duplicate row 0 into row 4
  std::memcpy(x.data() + std::size_t(4) * 84 * 84 * 4, x.data(),
              sizeof(float) * 84 * 84 * 4);
  PolicyNet<float>::Cache c;
  net.forward(x, c);
  CHECK(c.logits.shape() == std::vector<int>{5, 3});
  CHECK(c.value.shape() == std::vector<int>{5, 1});
  for (std::size_t i = 0; i < c.logits.size(); ++i) CHECK(c.logits[i] == 0.0f);
  for (std::size_t i = 0; i < c.value.size(); ++i) CHECK(c.value[i] == 0.0f);

  Rng init(4);
  net.init(init);
  net.forward(x, c);
  for (int j = 0; j < 3; ++j) {
    CHECK(c.logits[0 * 3 + j] == c.logits[4 * 3 + j]);
  }
  CHECK(c.value[0] == c.value[4]);

  Tensor<float> bad({2, 84, 84, 2});
  CHECK_THROWS_AS(net.forward(bad, c), UsageError);
}

TEST_CASE("state-only reward ignores actions; state-action reward does not") {
  Rng rng(5);
  RewardNetRaw<float> state_only(4, /*state_action=*/false);
  Rng ir(6);
  state_only.init(ir);
  Tensor<float> x = frame_batch<float>(3, 4, rng);
  RewardNetRaw<float>::Cache c;
  state_only.forward(x, nullptr, /*train=*/false, c);
  CHECK(c.f.dim(0) == 3);
  Tensor<float> oh = one_hot<float>({0, 1, 2});
  CHECK_THROWS_AS(state_only.forward(x, &oh, false, c), UsageError);

  RewardNetRaw<float> sa(4, /*state_action=*/true);
  Rng ir2(7);
  sa.init(ir2);
  CHECK_THROWS_AS(sa.forward(x, nullptr, false, c), UsageError);

  // Same state with two different one-hot actions: f differs for random
  // parameters (evaluated directly, the stated oracle).
  Tensor<float> x1 = frame_batch<float>(1, 4, rng);
  Tensor<float> x2 = x1;
  Tensor<float> a0 = one_hot<float>({0});
  Tensor<float> a1 = one_hot<float>({1});
  RewardNetRaw<float>::Cache c0, c1;
  sa.forward(x1, &a0, false, c0);
  sa.forward(x2, &a1, false, c1);
  CHECK(c0.f[0] != c1.f[0]);
}

TEST_CASE("state-action zero final layer gives f = 0") {
  RewardNetRaw<float> sa(4, true);  // all parameters zero
  Rng rng(8);
  Tensor<float> x = frame_batch<float>(2, 4, rng);
  Tensor<float> oh = one_hot<float>({2, 0});
  RewardNetRaw<float>::Cache c;
  sa.forward(x, &oh, false, c);
  CHECK(c.f[0] == 0.0f);
  CHECK(c.f[1] == 0.0f);
}

TEST_CASE("encoded reward: zero weights give constant bias, rows permute") {
  RewardNetEncoded<float> mlp(8, false);
  Tensor<float> e({4, 8});
  Rng rng(9);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<float>(rng.normal());
  RewardNetEncoded<float>::Cache c;
  mlp.forward(e, nullptr, c);
  for (int i = 0; i < 4; ++i) CHECK(c.f[i] == 0.0f);  // zero bias constant

  Rng ir(10);
  mlp.init(ir);
  mlp.forward(e, nullptr, c);
  std::vector<float> f0 = {c.f[0], c.f[1], c.f[2], c.f[3]};
  // permute rows (reverse) and re-run
  Tensor<float> rev({4, 8});
  for (int r = 0; r < 4; ++r) {
    std::memcpy(rev.data() + std::size_t(r) * 8, e.data() + std::size_t(3 - r) * 8,
                sizeof(float) * 8);
  }
  mlp.forward(rev, nullptr, c);
  for (int r = 0; r < 4; ++r) CHECK(c.f[r] == f0[3 - r]);

  Tensor<float> wrong({4, 5});
  CHECK_THROWS_AS(mlp.forward(wrong, nullptr, c), UsageError);
}

TEST_CASE("encoded reward gradient w.r.t. embedding matches finite differences") {
  RewardNetEncoded<double> mlp(6, true);
  Rng ir(11);
  mlp.init(ir);
  Rng rng(12);
  Tensor<double> e({2, 6});
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = rng.normal();
  Tensor<double> oh = one_hot<double>({1, 2});

  RewardNetEncoded<double>::Cache c;
  const auto loss = [&]() {
    mlp.forward(e, &oh, c);
    double s = 0.0;
    for (int i = 0; i < 2; ++i) s += c.f[i];
    return s;
  };
  loss();
  Tensor<double> df({2, 1});
  df.fill(1.0);
  Tensor<double> de;
  mlp.params().zero_grads();
  mlp.backward(c, df, &de);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double orig = e[i];
    e[i] = orig + 1e-6;
    const double fp = loss();
    e[i] = orig - 1e-6;
    const double fm = loss();
    e[i] = orig;
    const double num = (fp - fm) / 2e-6;
    const double denom = std::max({std::abs(num), std::abs(de[i]), 1e-4});
    REQUIRE(std::abs(num - de[i]) / denom <= 1e-4);
  }
}

TEST_CASE("full-network directional gradient checks (64-bit)") {
  Rng rng(13);
  Rng dir_rng(14);

  SUBCASE("policy network with PPO-style weighted loss") {
    PolicyNet<double> net(2);
    Rng ir(15);
    net.init(ir);
    jitter_biases(net, ir);
    Tensor<double> x = dense_batch<double>(3, 2, rng);
    Tensor<double> wl({3, 3}), wv({3, 1});
    for (std::size_t i = 0; i < wl.size(); ++i) wl[i] = rng.normal();
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = rng.normal();
    PolicyNet<double>::Cache c;
    const auto loss = [&]() {
      net.forward(x, c);
      double s = 0.0;
      for (std::size_t i = 0; i < c.logits.size(); ++i) s += wl[i] * c.logits[i];
      for (std::size_t i = 0; i < c.value.size(); ++i) s += wv[i] * c.value[i];
      net.backward(x, c, wl, wv);
      return s;
    };
    check_directional(net, loss, 1e-6, 1e-4, dir_rng);
  }

  SUBCASE("raw reward network in training mode (batch norm active)") {
    RewardNetRaw<double> net(2, true);
    Rng ir(16);
    net.init(ir);
    jitter_biases(net, ir);
    Tensor<double> x = dense_batch<double>(4, 2, rng);
    Tensor<double> oh = one_hot<double>({0, 2, 1, 1});
    Tensor<double> wf({4, 1});
    for (std::size_t i = 0; i < wf.size(); ++i) wf[i] = rng.normal();
    RewardNetRaw<double>::Cache c;
    const auto loss = [&]() {
      net.forward(x, &oh, /*train=*/true, c);
      double s = 0.0;
      for (int i = 0; i < 4; ++i) s += wf[i] * c.f[i];
      net.backward(x, c, wf);
      return s;
    };
    check_directional(net, loss, 1e-6, 1e-4, dir_rng);
  }

  SUBCASE("encoded reward network") {
    RewardNetEncoded<double> net(5, false);
    Rng ir(17);
    net.init(ir);
    Tensor<double> e({3, 5});
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = rng.normal();
    Tensor<double> wf({3, 1});
    for (std::size_t i = 0; i < wf.size(); ++i) wf[i] = rng.normal();
    RewardNetEncoded<double>::Cache c;
    const auto loss = [&]() {
      net.forward(e, nullptr, c);
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += wf[i] * c.f[i];
      net.backward(c, wf, nullptr);
      return s;
    };
    check_directional(net, loss, 1e-6, 1e-4, dir_rng);
  }
}

TEST_CASE("sample_action statistics and log probabilities") {
  Rng rng(18);
  SUBCASE("uniform logits") {
    const float logits[3] = {0.0f, 0.0f, 0.0f};
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 30000; ++i) {
      const auto [a, lp] = sample_action(logits, 3, rng);
      ++counts[a];
      REQUIRE(lp == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-6));
    }
    for (int j = 0; j < 3; ++j) {
      CHECK(counts[j] > 30000 / 3 - 600);
      CHECK(counts[j] < 30000 / 3 + 600);
    }
  }
  SUBCASE("peaked logits select action 0 with probability > 0.9999") {
    const float logits[3] = {10.0f, -10.0f, -10.0f};
    float p[3];
    softmax(logits, p, 3);
    CHECK(p[0] > 0.9999f);
    for (int i = 0; i < 1000; ++i) {
      const auto [a, lp] = sample_action(logits, 3, rng);
      REQUIRE(a == 0);
    }
  }
  SUBCASE("probabilities over all actions sum to one") {
    const float logits[3] = {0.3f, -1.2f, 2.0f};
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
      total += std::exp(logits[a] - logsumexp(logits, 3));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("non-finite logits are rejected") {
    const float logits[3] = {0.0f, std::numeric_limits<float>::infinity(), 0.0f};
    CHECK_THROWS_AS(sample_action(logits, 3, rng), UsageError);
  }
}

TEST_CASE("checkpoint round trip is bitwise and validates") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "gameirl_nets_test";
  fs::create_directories(dir);
  const std::string path = (dir / "policy.json").string();

  PolicyNet<float> net(4);
  Rng rng(19);
  net.init(rng);
  const ParamSet snap = net.snapshot();
  save_param_set(snap, path);
  const ParamSet loaded = load_param_set(path);
  CHECK(loaded.arch == snap.arch);
  REQUIRE(loaded.items.size() == snap.items.size());
  for (std::size_t i = 0; i < snap.items.size(); ++i) {
    REQUIRE(loaded.items[i].name == snap.items[i].name);
    REQUIRE(loaded.items[i].shape == snap.items[i].shape);
    REQUIRE(loaded.items[i].data == snap.items[i].data);
  }

  PolicyNet<float> other(4);
  other.restore(loaded);
  CHECK(other.params().values() == net.params().values());

  // Restoring into the wrong architecture fails.
  RewardNetRaw<float> reward(4, true);
  CHECK_THROWS_AS(reward.restore(loaded), UsageError);

  // Truncated blob is caught by manifest arithmetic.
  const std::string bin = (dir / "policy.bin").string();
  auto bytes = read_bytes(bin);
  bytes.resize(bytes.size() - 4);
  write_bytes(bin, bytes.data(), bytes.size());
  CHECK_THROWS_WITH_AS(load_param_set(path), doctest::Contains("byte length"),
                       StageError);
  fs::remove_all(dir);
}
