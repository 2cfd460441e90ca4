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

#include "core/rl/rollout.hpp"

#include <string>

#include "core/common.hpp"

namespace gameirl::rl {

using envs::Action;
using envs::CatcherEnv;
using nets::PolicyNet;

VecCollector::VecCollector(const envs::EnvConfig& cfg, int n_envs,
                           uint64_t base_seed)
    : cfg_(cfg) {
  if (n_envs < 1) throw UsageError("collector needs at least one environment");
  for (int i = 0; i < n_envs; ++i) {
    const std::string slot = std::to_string(i);
    reset_rngs_.push_back(Rng::derive(base_seed, "resets/" + slot));
    action_rngs_.push_back(Rng::derive(base_seed, "actions/" + slot));
    envs_.push_back(
        std::make_unique<CatcherEnv>(cfg, reset_rngs_.back().bits()));
    current_obs_.push_back(envs_.back()->reset(reset_rngs_.back().bits()));
    episode_return_.push_back(0.0f);
  }
}

std::vector<Rollout> VecCollector::collect(const PolicyNet<float>& net,
                                           int n_steps, RewardSource& source,
                                           int n_active) {
  if (n_active < 0) n_active = n_envs();
  if (n_active < 1 || n_active > n_envs()) {
    throw UsageError("collect: bad active environment count");
  }
  const std::size_t stride =
      static_cast<std::size_t>(84) * 84 * cfg_.frame_stack;

  std::vector<Rollout> rollouts(n_active);
  for (auto& r : rollouts) {
    r.length = n_steps;
    r.frame_stack = cfg_.frame_stack;
    r.observations.resize(static_cast<std::size_t>(n_steps) * stride);
    r.actions.resize(n_steps);
    r.log_probs.resize(n_steps);
    r.values.resize(n_steps);
    r.rewards.assign(n_steps, 0.0f);
    r.gt_rewards.resize(n_steps);
    r.dones.resize(n_steps);
  }

  batch_.resize({n_active, 84, 84, cfg_.frame_stack});
  for (int t = 0; t < n_steps; ++t) {
    for (int i = 0; i < n_active; ++i) {
      nets::bytes_to_scalar(current_obs_[i].data.data(), stride,
                            batch_.data() + static_cast<std::size_t>(i) * stride);
    }
    net.forward(batch_, cache_);
    for (int i = 0; i < n_active; ++i) {
      Rollout& r = rollouts[i];
      std::memcpy(r.observations.data() + static_cast<std::size_t>(t) * stride,
                  current_obs_[i].data.data(), stride);
      const float* logits =
          cache_.logits.data() + static_cast<std::size_t>(i) * nets::kActions;
      const auto [action, log_prob] =
          nets::sample_action(logits, nets::kActions, action_rngs_[i]);
      r.actions[t] = action;
      r.log_probs[t] = log_prob;
      r.values[t] = cache_.value[i];

      const envs::StepResult step =
          envs_[i]->step(static_cast<Action>(action));
      r.gt_rewards[t] = step.reward;
      r.dones[t] = step.done ? 1 : 0;
      episode_return_[i] += step.reward;
      if (step.done) {
        r.completed_episode_returns.push_back(episode_return_[i]);
        episode_return_[i] = 0.0f;
        current_obs_[i] = envs_[i]->reset(reset_rngs_[i].bits());
      } else {
        current_obs_[i] = step.obs;
      }
    }
  }

  // Bootstrap values for the state after the last step.
  for (int i = 0; i < n_active; ++i) {
    nets::bytes_to_scalar(current_obs_[i].data.data(), stride,
                          batch_.data() + static_cast<std::size_t>(i) * stride);
  }
  net.forward(batch_, cache_);
  for (int i = 0; i < n_active; ++i) {
    rollouts[i].bootstrap_value = cache_.value[i];
    source.score_rollout(rollouts[i]);
  }
  return rollouts;
}

Rollout collect_rollout(const PolicyNet<float>& net, CatcherEnv& env,
                        int n_steps, RewardSource& source, Rng& action_rng,
                        Rng& reset_rng) {
  const int stack = env.config().frame_stack;
  const std::size_t stride = static_cast<std::size_t>(84) * 84 * stack;

  Rollout r;
  r.length = n_steps;
  r.frame_stack = stack;
  r.observations.resize(static_cast<std::size_t>(n_steps) * stride);
  r.actions.resize(n_steps);
  r.log_probs.resize(n_steps);
  r.values.resize(n_steps);
  r.rewards.assign(n_steps, 0.0f);
  r.gt_rewards.resize(n_steps);
  r.dones.resize(n_steps);

  PolicyNet<float>::Cache cache;
  Tensor<float> batch({1, 84, 84, stack});
  envs::Observation obs =
      env.done() ? env.reset(reset_rng.bits()) : env.observation();

  float episode_return = 0.0f;
  for (int t = 0; t < n_steps; ++t) {
    nets::bytes_to_scalar(obs.data.data(), stride, batch.data());
    net.forward(batch, cache);
    std::memcpy(r.observations.data() + static_cast<std::size_t>(t) * stride,
                obs.data.data(), stride);
    const auto [action, log_prob] =
        nets::sample_action(cache.logits.data(), nets::kActions, action_rng);
    r.actions[t] = action;
    r.log_probs[t] = log_prob;
    r.values[t] = cache.value[0];
    const envs::StepResult step = env.step(static_cast<Action>(action));
    r.gt_rewards[t] = step.reward;
    r.dones[t] = step.done ? 1 : 0;
    episode_return += step.reward;
    if (step.done) {
      r.completed_episode_returns.push_back(episode_return);
      episode_return = 0.0f;
      obs = env.reset(reset_rng.bits());
    } else {
      obs = step.obs;
    }
  }
  nets::bytes_to_scalar(obs.data.data(), stride, batch.data());
  net.forward(batch, cache);
  r.bootstrap_value = cache.value[0];
  source.score_rollout(r);
  return r;
}

}  // namespace gameirl::rl
