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

#ifndef GAMEIRL_CORE_RL_ROLLOUT_HPP_
#define GAMEIRL_CORE_RL_ROLLOUT_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "core/envs/catcher.hpp"
#include "core/nets/nets.hpp"
#include "core/rng.hpp"

namespace gameirl::rl {

// Fixed-length slice of agent experience. Observations stay in byte form
// (luminance * 255) until a batch is materialized. Ground-truth rewards are
// recorded alongside the serving rewards so the apprenticeship metric is
// available regardless of the reward source.
struct Rollout {
  int length = 0;
  int frame_stack = 4;
  std::vector<uint8_t> observations;  // length * 84*84*frame_stack
  std::vector<int> actions;
  std::vector<float> log_probs;
  std::vector<float> values;
  std::vector<float> rewards;     // from the serving reward source
  std::vector<float> gt_rewards;  // from the environment
  std::vector<uint8_t> dones;
  float bootstrap_value = 0.0f;
  std::vector<float> completed_episode_returns;  // ground truth
  int round_tag = 0;

  std::size_t obs_stride() const {
    return static_cast<std::size_t>(84) * 84 * frame_stack;
  }
  const uint8_t* obs_at(int t) const {
    return observations.data() + static_cast<std::size_t>(t) * obs_stride();
  }
};

// Maps (observation, action) to the scalar reward served to the generator.
class RewardSource {
 public:
  virtual ~RewardSource() = default;
  virtual float score(const uint8_t* obs, std::size_t obs_size,
                      int action) = 0;
  // Batch hook; the default applies `score` per step.
  virtual void score_rollout(Rollout& r) {
    for (int t = 0; t < r.length; ++t) {
      r.rewards[t] = score(r.obs_at(t), r.obs_stride(), r.actions[t]);
    }
  }
};

// Serves the environment's own reward stream.
class GroundTruthReward : public RewardSource {
 public:
  float score(const uint8_t*, std::size_t, int) override { return 0.0f; }
  void score_rollout(Rollout& r) override { r.rewards = r.gt_rewards; }
};

class ConstantReward : public RewardSource {
 public:
  explicit ConstantReward(float value) : value_(value) {}
  float score(const uint8_t*, std::size_t, int) override { return value_; }

 private:
  float value_;
};

// Steps a set of independent environments in lockstep with batched policy
// forwards; each slot produces its own Rollout and the merge order is the
// slot order, so results do not depend on scheduling.
class VecCollector {
 public:
  VecCollector(const envs::EnvConfig& cfg, int n_envs, uint64_t base_seed);

  // Collects one rollout of n_steps per active slot under the current policy.
  std::vector<Rollout> collect(const nets::PolicyNet<float>& net, int n_steps,
                               RewardSource& source, int n_active = -1);

  int n_envs() const { return static_cast<int>(envs_.size()); }

 private:
  envs::EnvConfig cfg_;
  std::vector<std::unique_ptr<envs::CatcherEnv>> envs_;
  std::vector<Rng> action_rngs_;
  std::vector<Rng> reset_rngs_;
  std::vector<envs::Observation> current_obs_;
  std::vector<float> episode_return_;
  mutable nets::PolicyNet<float>::Cache cache_;
  Tensor<float> batch_;
};

// Single-environment collection against a pluggable reward source.
Rollout collect_rollout(const nets::PolicyNet<float>& net,
                        envs::CatcherEnv& env, int n_steps,
                        RewardSource& source, Rng& action_rng,
                        Rng& reset_rng);

}  // namespace gameirl::rl

#endif  // GAMEIRL_CORE_RL_ROLLOUT_HPP_
