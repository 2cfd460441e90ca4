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

#ifndef GAMEIRL_CORE_RL_PPO_HPP_
#define GAMEIRL_CORE_RL_PPO_HPP_

#include <limits>
#include <utility>
#include <vector>

#include "core/rl/rollout.hpp"

namespace gameirl::rl {

struct PPOConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip = 0.1;
  int epochs = 4;
  int minibatch = 256;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 2.5e-4;
  double max_grad_norm = 0.5;
  int rollout_length = 1024;
  int n_envs = 4;
};

struct AdvantageBatch {
  std::vector<float> advantages;
  std::vector<float> returns;
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
};

// Lambda-weighted TD-residual advantages via the reverse recursion
// A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}; returns_t = A_t + v_t.
AdvantageBatch compute_gae(const Rollout& rollout, double gamma, double lam);

// Clipped-surrogate term for one sample: min(rho*adv, clamp(rho)*adv).
double clip_objective_term(double rho, double adv, double clip);

// Zero-mean unit-variance standardization (population std, eps-guarded).
void normalize_advantages(const float* x, int n, float* out);

// One PPO update over a rollout: cfg.epochs passes of shuffled minibatches
// with per-minibatch advantage normalization, gradient clipping and an
// adaptive-moment step. Throws DivergenceError on non-finite loss.
PpoStats ppo_update(nets::PolicyNet<float>& net, Adam<float>& opt,
                    const Rollout& rollout, const AdvantageBatch& adv,
                    const PPOConfig& cfg, Rng& rng);

// Spec-shaped stateless form (fresh optimizer); used by tests and the C API.
std::pair<nets::ParamSet, PpoStats> ppo_update(const nets::ParamSet& params,
                                               const Rollout& rollout,
                                               const AdvantageBatch& adv,
                                               const PPOConfig& cfg,
                                               uint64_t seed);

struct HistoryRow {
  long rollout_index = 0;
  long env_steps = 0;
  double mean_gt_return = std::numeric_limits<double>::quiet_NaN();
  PpoStats stats;
};

struct TrainResult {
  nets::ParamSet params;
  std::vector<HistoryRow> history;
  double final_mean_return = std::numeric_limits<double>::quiet_NaN();
  long env_steps = 0;
  bool reached_threshold = false;
};

// Forward RL: repeats collect -> GAE -> update until total_steps environment
// steps, optionally stopping once the running mean episode return (ground
// truth, last `stop_window` episodes) reaches `stop_at_return`.
TrainResult train_forward_rl(
    const envs::EnvConfig& env_cfg, const PPOConfig& cfg, long total_steps,
    RewardSource& reward_source, uint64_t seed,
    double stop_at_return = std::numeric_limits<double>::infinity(),
    int stop_window = 20);

}  // namespace gameirl::rl

#endif  // GAMEIRL_CORE_RL_PPO_HPP_
