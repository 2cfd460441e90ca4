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

#ifndef GAMEIRL_CORE_NETS_NETS_HPP_
#define GAMEIRL_CORE_NETS_NETS_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/layers.hpp"
#include "core/numeric.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace gameirl::nets {

inline constexpr int kFrame = 84;
inline constexpr int kActions = 3;
inline constexpr int kConvFlat = 7 * 7 * 64;  // 84 -> 20 -> 9 -> 7

// Serializable snapshot of a network's parameters.
struct ParamSet {
  struct Item {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::string arch;
  std::vector<Item> items;
};

template <typename S>
ParamSet to_param_set(const ParamStore<S>& ps, const std::string& arch) {
  ParamSet out;
  out.arch = arch;
  for (const auto& e : ps.entries()) {
    ParamSet::Item item;
    item.name = e.name;
    item.shape = e.shape;
    item.data.resize(e.size);
    const S* v = ps.values().data() + e.offset;
    for (std::size_t i = 0; i < e.size; ++i) {
      item.data[i] = static_cast<float>(v[i]);
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

template <typename S>
void from_param_set(const ParamSet& set, const std::string& expected_arch,
                    ParamStore<S>& ps) {
  if (set.arch != expected_arch) {
    throw UsageError("checkpoint architecture '" + set.arch +
                     "' does not match expected '" + expected_arch + "'");
  }
  const auto& entries = ps.entries();
  if (set.items.size() != entries.size()) {
    throw UsageError("checkpoint entry count mismatch");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& item = set.items[i];
    const auto& e = entries[i];
    if (item.name != e.name || item.shape != e.shape) {
      throw UsageError("checkpoint entry '" + item.name +
                       "' does not match expected '" + e.name + "'");
    }
    S* v = ps.values().data() + e.offset;
    for (std::size_t j = 0; j < e.size; ++j) {
      v[j] = static_cast<S>(item.data[j]);
    }
  }
}

void save_param_set(const ParamSet& set, const std::string& path);
ParamSet load_param_set(const std::string& path);

// Converts byte observations (luminance * 255) into a float NHWC batch.
template <typename S>
void bytes_to_scalar(const uint8_t* src, std::size_t n, S* dst) {
  constexpr S kInv = S(1) / S(255);
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = static_cast<S>(src[i]) * kInv;
  }
}

// One-hot action rows.
template <typename S>
Tensor<S> one_hot(const std::vector<int>& actions) {
  Tensor<S> t({static_cast<int>(actions.size()), kActions});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    t[i * kActions + static_cast<std::size_t>(actions[i])] = S(1);
  }
  return t;
}

// DQN-style trunk with action-logit and state-value heads.
template <typename S>
class PolicyNet {
 public:
  static constexpr const char* kArch = "policy-cnn";

  struct Cache {
    Tensor<S> x, z1, a1, z2, a2, z3, a3, zf, af, logits, value;
  };

  explicit PolicyNet(int frame_stack = 4)
      : frame_stack_(frame_stack),
        c1_(ps_, "conv1", frame_stack, 32, 8, 4, /*sparse_input=*/true),
        c2_(ps_, "conv2", 32, 64, 4, 2),
        c3_(ps_, "conv3", 64, 64, 3, 1),
        fc_(ps_, "fc", kConvFlat, 512),
        pi_(ps_, "pi", 512, kActions),
        v_(ps_, "v", 512, 1) {
    ps_.finalize();
  }

  void init(Rng& rng) {
    const double g = std::sqrt(2.0);
    c1_.init(rng, g);
    c2_.init(rng, g);
    c3_.init(rng, g);
    fc_.init(rng, g);
    pi_.init(rng, 0.01);
    v_.init(rng, 1.0);
  }

  // x: (B, 84, 84, frame_stack). Fills cache; logits (B, 3), value (B, 1).
  void forward(const Tensor<S>& x, Cache& c) const {
    if (x.dim(1) != kFrame || x.dim(2) != kFrame || x.dim(3) != frame_stack_) {
      throw UsageError("policy_forward: observation shape mismatch");
    }
    c1_.forward(x, c.z1);
    relu_forward(c.z1, c.a1);
    c2_.forward(c.a1, c.z2);
    relu_forward(c.z2, c.a2);
    c3_.forward(c.a2, c.z3);
    relu_forward(c.z3, c.a3);
    fc_.forward(c.a3, c.zf);
    relu_forward(c.zf, c.af);
    pi_.forward(c.af, c.logits);
    v_.forward(c.af, c.value);
  }

  // Accumulates parameter gradients. `x` must be the batch passed to forward.
  void backward(const Tensor<S>& x, Cache& c, const Tensor<S>& dlogits,
                const Tensor<S>& dvalue) {
    Tensor<S>&d_af = scratch_[0], &d_zf = scratch_[1], &d_a3 = scratch_[2],
             &d_z3 = scratch_[3], &d_a2 = scratch_[4], &d_z2 = scratch_[5],
             &d_a1 = scratch_[6], &d_z1 = scratch_[7], &tmp = scratch_[8];
    pi_.backward(c.af, dlogits, &d_af);
    v_.backward(c.af, dvalue, &tmp);
    for (std::size_t i = 0; i < d_af.size(); ++i) d_af[i] += tmp[i];
    relu_backward(c.zf, d_af, d_zf);
    fc_.backward(c.a3, d_zf, &d_a3);
    relu_backward(c.z3, d_a3, d_z3);
    c3_.backward(c.a2, d_z3, &d_a2);
    relu_backward(c.z2, d_a2, d_z2);
    c2_.backward(c.a1, d_z2, &d_a1);
    relu_backward(c.z1, d_a1, d_z1);
    c1_.backward(x, d_z1, nullptr);
  }

  ParamStore<S>& params() { return ps_; }
  const ParamStore<S>& params() const { return ps_; }
  int frame_stack() const { return frame_stack_; }

  ParamSet snapshot() const { return to_param_set(ps_, kArch); }
  void restore(const ParamSet& set) { from_param_set(set, kArch, ps_); }

 private:
  int frame_stack_;
  ParamStore<S> ps_;
  Conv2D<S> c1_, c2_, c3_;
  Linear<S> fc_, pi_, v_;
  Tensor<S> scratch_[9];
};

// Reward network on raw observations: conv trunk with batch-normalized leaky
// ReLU, optional one-hot action concatenated to the flattened features, then
// two fully-connected layers down to a scalar f per sample.
template <typename S>
class RewardNetRaw {
 public:
  static constexpr S kSlope = S(0.2);

  struct Cache {
    Tensor<S> z1, b1, a1, z2, b2, a2, z3, b3, a3, cat, zf, af, f;
  };

  RewardNetRaw(int frame_stack, bool state_action)
      : frame_stack_(frame_stack),
        state_action_(state_action),
        c1_(ps_, "conv1", frame_stack, 32, 8, 4, /*sparse_input=*/true),
        bn1_(ps_, "bn1", 32),
        c2_(ps_, "conv2", 32, 64, 4, 2),
        bn2_(ps_, "bn2", 64),
        c3_(ps_, "conv3", 64, 64, 3, 1),
        bn3_(ps_, "bn3", 64),
        fc1_(ps_, "fc1", kConvFlat + (state_action ? kActions : 0), 512),
        fc2_(ps_, "fc2", 512, 1) {
    ps_.finalize();
    bn1_.init();
    bn2_.init();
    bn3_.init();
  }

  void init(Rng& rng) {
    const double g = std::sqrt(2.0);
    c1_.init(rng, g);
    c2_.init(rng, g);
    c3_.init(rng, g);
    fc1_.init(rng, g);
    fc2_.init(rng, 1.0);
  }

  static std::string arch_tag(bool state_action) {
    return state_action ? "reward-cnn-raw:state_action" : "reward-cnn-raw:state";
  }

  // x: (B, 84, 84, frame_stack); actions: one-hot (B, 3) when state_action.
  // Batch statistics when `train`, running statistics otherwise.
  void forward(const Tensor<S>& x, const Tensor<S>* actions, bool train,
               Cache& c) {
    if (x.dim(1) != kFrame || x.dim(2) != kFrame || x.dim(3) != frame_stack_) {
      throw UsageError("reward_forward_raw: observation shape mismatch");
    }
    check_actions(x.dim(0), actions);
    c1_.forward(x, c.z1);
    bn1_.forward(c.z1, c.b1, train);
    leaky_relu_forward(c.b1, c.a1, kSlope);
    c2_.forward(c.a1, c.z2);
    bn2_.forward(c.z2, c.b2, train);
    leaky_relu_forward(c.b2, c.a2, kSlope);
    c3_.forward(c.a2, c.z3);
    bn3_.forward(c.z3, c.b3, train);
    leaky_relu_forward(c.b3, c.a3, kSlope);
    concat_actions(c.a3, actions, c.cat);
    fc1_.forward(c.cat, c.zf);
    leaky_relu_forward(c.zf, c.af, kSlope);
    fc2_.forward(c.af, c.f);
  }

  // Training-mode backward; df is (B, 1) or (B).
  void backward(const Tensor<S>& x, Cache& c, const Tensor<S>& df) {
    Tensor<S>&d_af = scratch_[0], &d_zf = scratch_[1], &d_cat = scratch_[2],
             &d_a3 = scratch_[3], &d_b3 = scratch_[4], &d_z3 = scratch_[5],
             &d_a2 = scratch_[6], &d_b2 = scratch_[7], &d_z2 = scratch_[8],
             &d_a1 = scratch_[9], &d_b1 = scratch_[10], &d_z1 = scratch_[11];
    fc2_.backward(c.af, df, &d_af);
    leaky_relu_backward(c.zf, d_af, d_zf, kSlope);
    fc1_.backward(c.cat, d_zf, &d_cat);
    split_actions(d_cat, c.a3.shape(), d_a3);
    leaky_relu_backward(c.b3, d_a3, d_b3, kSlope);
    bn3_.backward(d_b3, d_z3);
    c3_.backward(c.a2, d_z3, &d_a2);
    leaky_relu_backward(c.b2, d_a2, d_b2, kSlope);
    bn2_.backward(d_b2, d_z2);
    c2_.backward(c.a1, d_z2, &d_a1);
    leaky_relu_backward(c.b1, d_a1, d_b1, kSlope);
    bn1_.backward(d_b1, d_z1);
    c1_.backward(x, d_z1, nullptr);
  }

  ParamStore<S>& params() { return ps_; }
  const ParamStore<S>& params() const { return ps_; }
  bool state_action() const { return state_action_; }
  int frame_stack() const { return frame_stack_; }

  ParamSet snapshot() const { return to_param_set(ps_, arch_tag(state_action_)); }
  void restore(const ParamSet& set) {
    from_param_set(set, arch_tag(state_action_), ps_);
  }

 private:
  void check_actions(int batch, const Tensor<S>* actions) const {
    if (state_action_) {
      if (actions == nullptr) {
        throw UsageError("state-action reward network requires actions");
      }
      if (actions->dim(0) != batch || actions->dim(1) != kActions) {
        throw UsageError("action batch shape mismatch");
      }
    } else if (actions != nullptr) {
      throw UsageError("state-only reward network takes no actions");
    }
  }

  void concat_actions(const Tensor<S>& flat, const Tensor<S>* actions,
                      Tensor<S>& out) const {
    const int b = static_cast<int>(flat.size()) / kConvFlat;
    if (!state_action_) {
      out.resize({b, kConvFlat});
      std::memcpy(out.data(), flat.data(), sizeof(S) * flat.size());
      return;
    }
    out.resize({b, kConvFlat + kActions});
    for (int r = 0; r < b; ++r) {
      std::memcpy(out.data() + static_cast<std::size_t>(r) * (kConvFlat + kActions),
                  flat.data() + static_cast<std::size_t>(r) * kConvFlat,
                  sizeof(S) * kConvFlat);
      std::memcpy(out.data() + static_cast<std::size_t>(r) * (kConvFlat + kActions) +
                      kConvFlat,
                  actions->data() + static_cast<std::size_t>(r) * kActions,
                  sizeof(S) * kActions);
    }
  }

  void split_actions(const Tensor<S>& d_cat, const std::vector<int>& a3_shape,
                     Tensor<S>& d_flat) const {
    d_flat.resize(a3_shape);
    const int b = d_cat.dim(0);
    if (!state_action_) {
      std::memcpy(d_flat.data(), d_cat.data(), sizeof(S) * d_cat.size());
      return;
    }
    for (int r = 0; r < b; ++r) {
      std::memcpy(d_flat.data() + static_cast<std::size_t>(r) * kConvFlat,
                  d_cat.data() + static_cast<std::size_t>(r) * (kConvFlat + kActions),
                  sizeof(S) * kConvFlat);
    }
  }

  int frame_stack_;
  bool state_action_;
  ParamStore<S> ps_;
  Conv2D<S> c1_;
  BatchNorm<S> bn1_;
  Conv2D<S> c2_;
  BatchNorm<S> bn2_;
  Conv2D<S> c3_;
  BatchNorm<S> bn3_;
  Linear<S> fc1_, fc2_;
  Tensor<S> scratch_[12];
};

// Reward head on autoencoder embeddings: two leaky-ReLU hidden layers of 64.
template <typename S>
class RewardNetEncoded {
 public:
  static constexpr S kSlope = S(0.2);

  struct Cache {
    Tensor<S> cat, z1, a1, z2, a2, f;
  };

  RewardNetEncoded(int embed_dim, bool state_action)
      : embed_dim_(embed_dim),
        state_action_(state_action),
        fc1_(ps_, "fc1", embed_dim + (state_action ? kActions : 0), 64),
        fc2_(ps_, "fc2", 64, 64),
        fc3_(ps_, "fc3", 64, 1) {
    ps_.finalize();
  }

  void init(Rng& rng) {
    const double g = std::sqrt(2.0);
    fc1_.init(rng, g);
    fc2_.init(rng, g);
    fc3_.init(rng, 1.0);
  }

  static std::string arch_tag(bool state_action) {
    return state_action ? "reward-mlp-encoded:state_action"
                        : "reward-mlp-encoded:state";
  }

  void forward(const Tensor<S>& embed, const Tensor<S>* actions, Cache& c) {
    if (embed.dim(1) != embed_dim_) {
      throw UsageError("reward_forward_encoded: embedding dimension mismatch");
    }
    const int b = embed.dim(0);
    if (state_action_) {
      if (actions == nullptr) {
        throw UsageError("state-action reward network requires actions");
      }
      if (actions->dim(0) != b || actions->dim(1) != kActions) {
        throw UsageError("action batch shape mismatch");
      }
      c.cat.resize({b, embed_dim_ + kActions});
      for (int r = 0; r < b; ++r) {
        std::memcpy(c.cat.data() + static_cast<std::size_t>(r) * (embed_dim_ + kActions),
                    embed.data() + static_cast<std::size_t>(r) * embed_dim_,
                    sizeof(S) * embed_dim_);
        std::memcpy(c.cat.data() + static_cast<std::size_t>(r) * (embed_dim_ + kActions) +
                        embed_dim_,
                    actions->data() + static_cast<std::size_t>(r) * kActions,
                    sizeof(S) * kActions);
      }
    } else {
      if (actions != nullptr) {
        throw UsageError("state-only reward network takes no actions");
      }
      c.cat.resize({b, embed_dim_});
      std::memcpy(c.cat.data(), embed.data(), sizeof(S) * embed.size());
    }
    fc1_.forward(c.cat, c.z1);
    leaky_relu_forward(c.z1, c.a1, kSlope);
    fc2_.forward(c.a1, c.z2);
    leaky_relu_forward(c.z2, c.a2, kSlope);
    fc3_.forward(c.a2, c.f);
  }

  // Returns gradient w.r.t. the embedding in d_embed when non-null.
  void backward(Cache& c, const Tensor<S>& df, Tensor<S>* d_embed = nullptr) {
    Tensor<S>&d_a2 = scratch_[0], &d_z2 = scratch_[1], &d_a1 = scratch_[2],
             &d_z1 = scratch_[3], &d_cat = scratch_[4];
    fc3_.backward(c.a2, df, &d_a2);
    leaky_relu_backward(c.z2, d_a2, d_z2, kSlope);
    fc2_.backward(c.a1, d_z2, &d_a1);
    leaky_relu_backward(c.z1, d_a1, d_z1, kSlope);
    fc1_.backward(c.cat, d_z1, &d_cat);
    if (d_embed != nullptr) {
      const int b = d_cat.dim(0);
      d_embed->resize({b, embed_dim_});
      const int stride = embed_dim_ + (state_action_ ? kActions : 0);
      for (int r = 0; r < b; ++r) {
        std::memcpy(d_embed->data() + static_cast<std::size_t>(r) * embed_dim_,
                    d_cat.data() + static_cast<std::size_t>(r) * stride,
                    sizeof(S) * embed_dim_);
      }
    }
  }

  ParamStore<S>& params() { return ps_; }
  const ParamStore<S>& params() const { return ps_; }
  bool state_action() const { return state_action_; }
  int embed_dim() const { return embed_dim_; }

  ParamSet snapshot() const {
    return to_param_set(ps_, arch_tag(state_action_));
  }
  void restore(const ParamSet& set) {
    from_param_set(set, arch_tag(state_action_), ps_);
  }

 private:
  int embed_dim_;
  bool state_action_;
  ParamStore<S> ps_;
  Linear<S> fc1_, fc2_, fc3_;
  Tensor<S> scratch_[5];
};

// Samples from softmax(logits); returns the index and its log probability.
template <typename S>
std::pair<int, S> sample_action(const S* logits, int n, Rng& rng) {
  if (n < 1 || n > 8) throw UsageError("sample_action: bad action count");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(logits[i]))) {
      throw UsageError("sample_action: non-finite logits");
    }
  }
  S p[8];
  softmax(logits, p, n);
  const S u = static_cast<S>(rng.uniform());
  S acc = S(0);
  int a = n - 1;
  for (int i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) {
      a = i;
      break;
    }
  }
  const S log_prob = logits[a] - logsumexp(logits, n);
  return {a, log_prob};
}

// Log-softmax row extraction: log pi(a|s) for the recorded action.
template <typename S>
void action_log_probs(const Tensor<S>& logits, const std::vector<int>& actions,
                      std::vector<S>& out) {
  const int b = logits.dim(0), n = logits.dim(1);
  out.resize(b);
  for (int r = 0; r < b; ++r) {
    const S* row = logits.data() + static_cast<std::size_t>(r) * n;
    out[r] = row[actions[r]] - logsumexp(row, n);
  }
}

}  // namespace gameirl::nets

#endif  // GAMEIRL_CORE_NETS_NETS_HPP_
