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

#include "core/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "core/common.hpp"
#include "core/numeric.hpp"

namespace gameirl::rl {

using nets::PolicyNet;

AdvantageBatch compute_gae(const Rollout& rollout, double gamma, double lam) {
  const int t_len = rollout.length;
  AdvantageBatch out;
  out.advantages.resize(t_len);
  out.returns.resize(t_len);
  double next_adv = 0.0;
  for (int t = t_len - 1; t >= 0; --t) {
    const double not_done = rollout.dones[t] ? 0.0 : 1.0;
    const double next_value =
        t + 1 < t_len ? rollout.values[t + 1] : rollout.bootstrap_value;
    const double delta = rollout.rewards[t] + gamma * next_value * not_done -
                         rollout.values[t];
    next_adv = delta + gamma * lam * not_done * next_adv;
    out.advantages[t] = static_cast<float>(next_adv);
    out.returns[t] = static_cast<float>(next_adv + rollout.values[t]);
  }
  return out;
}

double clip_objective_term(double rho, double adv, double clip) {
  const double clipped = std::clamp(rho, 1.0 - clip, 1.0 + clip);
  return std::min(rho * adv, clipped * adv);
}

void normalize_advantages(const float* x, int n, float* out) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    var += d * d;
  }
  var /= n;
  const double inv_std = 1.0 / (std::sqrt(var) + 1e-8);
  for (int i = 0; i < n; ++i) {
    out[i] = static_cast<float>((x[i] - mean) * inv_std);
  }
}

PpoStats ppo_update(PolicyNet<float>& net, Adam<float>& opt,
                    const Rollout& rollout, const AdvantageBatch& adv,
                    const PPOConfig& cfg, Rng& rng) {
  const int t_len = rollout.length;
  const std::size_t stride = rollout.obs_stride();
  const int mb_size = std::min(cfg.minibatch, t_len);

  std::vector<int> order(t_len);
  std::iota(order.begin(), order.end(), 0);

  PolicyNet<float>::Cache cache;
  Tensor<float> batch, dlogits, dvalue;
  std::vector<float> norm_adv(mb_size), mb_adv(mb_size);

  PpoStats stats;
  long stat_samples = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < t_len; start += mb_size) {
      const int mb = std::min(mb_size, t_len - start);
      batch.resize({mb, 84, 84, rollout.frame_stack});
      for (int i = 0; i < mb; ++i) {
        nets::bytes_to_scalar(rollout.obs_at(order[start + i]), stride,
                              batch.data() + static_cast<std::size_t>(i) * stride);
      }
      net.forward(batch, cache);

      // Advantages normalized per minibatch.
      mb_adv.resize(mb);
      for (int i = 0; i < mb; ++i) {
        mb_adv[i] = adv.advantages[order[start + i]];
      }
      norm_adv.resize(mb);
      normalize_advantages(mb_adv.data(), mb, norm_adv.data());

      dlogits.resize({mb, nets::kActions});
      dlogits.fill(0.0f);
      dvalue.resize({mb, 1});

      double mb_policy_loss = 0.0, mb_value_loss = 0.0, mb_entropy = 0.0;
      double mb_kl = 0.0;
      int mb_clipped = 0;
      const double inv_mb = 1.0 / mb;

      for (int i = 0; i < mb; ++i) {
        const int t = order[start + i];
        const float* logits =
            cache.logits.data() + static_cast<std::size_t>(i) * nets::kActions;
        float p[nets::kActions];
        softmax(logits, p, nets::kActions);
        const double lse = logsumexp(logits, nets::kActions);
        const int a = rollout.actions[t];
        const double logp_new = logits[a] - lse;
        const double logp_old = rollout.log_probs[t];
        const double rho = std::exp(logp_new - logp_old);
        const double a_norm = norm_adv[i];

        const double surr1 = rho * a_norm;
        const double clipped = std::clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surr2 = clipped * a_norm;
        const bool take_unclipped = surr1 <= surr2;
        mb_policy_loss -= std::min(surr1, surr2) * inv_mb;
        if (std::abs(rho - 1.0) > cfg.clip) ++mb_clipped;
        mb_kl += (logp_old - logp_new) * inv_mb;

        double entropy = 0.0;
        for (int j = 0; j < nets::kActions; ++j) {
          if (p[j] > 0.0f) entropy -= p[j] * std::log(static_cast<double>(p[j]));
        }
        mb_entropy += entropy * inv_mb;

        // d(-surrogate)/dlogit and d(-entropy_coef * H)/dlogit.
        float* dl = dlogits.data() + static_cast<std::size_t>(i) * nets::kActions;
        for (int j = 0; j < nets::kActions; ++j) {
          double g = 0.0;
          if (take_unclipped) {
            const double indicator = j == a ? 1.0 : 0.0;
            g -= a_norm * rho * (indicator - p[j]);
          }
          const double logpj = std::log(static_cast<double>(p[j]) + 1e-30);
          g += cfg.entropy_coef * p[j] * (logpj + entropy);
          dl[j] = static_cast<float>(g * inv_mb);
        }

        const double v = cache.value[i];
        const double ret = adv.returns[t];
        mb_value_loss += (v - ret) * (v - ret) * inv_mb;
        dvalue[i] =
            static_cast<float>(cfg.value_coef * 2.0 * (v - ret) * inv_mb);
      }

      const double total_loss = mb_policy_loss +
                                cfg.value_coef * mb_value_loss -
                                cfg.entropy_coef * mb_entropy;
      if (!std::isfinite(total_loss)) {
        throw DivergenceError("divergence: non-finite PPO loss");
      }

      net.params().zero_grads();
      net.backward(batch, cache, dlogits, dvalue);
      clip_grad_norm(net.params(), cfg.max_grad_norm);
      opt.step();

      stats.policy_loss += mb_policy_loss * mb;
      stats.value_loss += mb_value_loss * mb;
      stats.entropy += mb_entropy * mb;
      stats.approx_kl += mb_kl * mb;
      stats.clip_frac += mb_clipped;
      stat_samples += mb;
    }
  }
  if (stat_samples > 0) {
    stats.policy_loss /= stat_samples;
    stats.value_loss /= stat_samples;
    stats.entropy /= stat_samples;
    stats.approx_kl /= stat_samples;
    stats.clip_frac /= stat_samples;
  }
  return stats;
}

std::pair<nets::ParamSet, PpoStats> ppo_update(const nets::ParamSet& params,
                                               const Rollout& rollout,
                                               const AdvantageBatch& adv,
                                               const PPOConfig& cfg,
                                               uint64_t seed) {
  PolicyNet<float> net(rollout.frame_stack);
  net.restore(params);
  Adam<float> opt(net.params(), cfg.learning_rate);
  Rng rng = Rng::derive(seed, "ppo-update");
  const PpoStats stats = ppo_update(net, opt, rollout, adv, cfg, rng);
  return {net.snapshot(), stats};
}

TrainResult train_forward_rl(const envs::EnvConfig& env_cfg,
                             const PPOConfig& cfg, long total_steps,
                             RewardSource& reward_source, uint64_t seed,
                             double stop_at_return, int stop_window) {
  if (total_steps < 0 || total_steps % cfg.rollout_length != 0) {
    throw UsageError("total_steps must be a multiple of rollout_length");
  }
  PolicyNet<float> net(env_cfg.frame_stack);
  Rng init_rng = Rng::derive(seed, "policy-init");
  net.init(init_rng);
  Adam<float> opt(net.params(), cfg.learning_rate);
  Rng update_rng = Rng::derive(seed, "ppo-shuffle");
  VecCollector collector(env_cfg, cfg.n_envs, seed);

  TrainResult result;
  std::deque<float> recent_returns;
  long steps = 0;
  long index = 0;
  bool stop = false;
  while (steps < total_steps && !stop) {
    const long remaining = (total_steps - steps) / cfg.rollout_length;
    const int n_active =
        static_cast<int>(std::min<long>(cfg.n_envs, remaining));
    auto rollouts =
        collector.collect(net, cfg.rollout_length, reward_source, n_active);
    for (auto& rollout : rollouts) {
      const AdvantageBatch adv = compute_gae(rollout, cfg.gamma, cfg.lam);
      const PpoStats stats = ppo_update(net, opt, rollout, adv, cfg, update_rng);
      steps += rollout.length;

      HistoryRow row;
      row.rollout_index = index++;
      row.env_steps = steps;
      row.stats = stats;
      if (!rollout.completed_episode_returns.empty()) {
        double sum = 0.0;
        for (float g : rollout.completed_episode_returns) {
          sum += g;
          recent_returns.push_back(g);
          while (static_cast<int>(recent_returns.size()) > stop_window) {
            recent_returns.pop_front();
          }
        }
        row.mean_gt_return = sum / rollout.completed_episode_returns.size();
      }
      result.history.push_back(row);

      if (static_cast<int>(recent_returns.size()) >= stop_window) {
        const double mean =
            std::accumulate(recent_returns.begin(), recent_returns.end(), 0.0) /
            recent_returns.size();
        result.final_mean_return = mean;
        if (mean >= stop_at_return) {
          result.reached_threshold = true;
          stop = true;
          break;
        }
      }
    }
  }
  result.params = net.snapshot();
  result.env_steps = steps;
  return result;
}

}  // namespace gameirl::rl
