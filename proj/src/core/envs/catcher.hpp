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

#ifndef GAMEIRL_CORE_ENVS_CATCHER_HPP_
#define GAMEIRL_CORE_ENVS_CATCHER_HPP_

#include <cstdint>
#include <vector>

#include "core/rng.hpp"

namespace gameirl::envs {

// Frame geometry. Render is grayscale-native: paddle and block at luminance
// 1.0 on a 0.0 background, so preprocessing reduces to frame stacking.
inline constexpr int kFrameSize = 84;
inline constexpr int kPaddleWidth = 12;
inline constexpr int kPaddleHeight = 3;
inline constexpr int kBlockSize = 4;
inline constexpr int kPaddleSpeed = 2;
inline constexpr int kNumActions = 3;

enum class Action : int { kLeft = 0, kNoop = 1, kRight = 2 };

struct EnvConfig {
  int episode_length = 500;
  int frame_stack = 4;
};

struct EnvState {
  int paddle_x = 0;
  int block_x = 0;
  int block_y = 0;
  int step_count = 0;
};

// Stacked observation, stored as bytes (frames are exactly {0, 255} here).
// Channel layout is HWC with the newest frame at the highest channel index;
// luminance = byte / 255.
struct Observation {
  std::vector<uint8_t> data;  // 84 * 84 * frame_stack
  int frame_stack = 0;
};

struct StepResult {
  Observation obs;
  float reward = 0.0f;
  bool done = false;
};

// Deterministic single-player Catcher: a 4x4 block falls one row per step; a
// 12x3 paddle at the bottom moves +-2 columns per action. Catching scores +1,
// a block reaching the ground scores -1; episodes run a fixed horizon.
class CatcherEnv {
 public:
  explicit CatcherEnv(const EnvConfig& cfg, uint64_t seed)
      : cfg_(cfg), rng_(0) {
    reset(seed);
  }

  Observation reset(uint64_t seed);
  StepResult step(Action action);

  // Current stacked observation without advancing the environment.
  Observation observation() const { return make_observation(); }

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }

  // Render the current state into an 84x84 byte frame (values 0 or 255).
  void render(uint8_t* frame) const;

  // Steps a falling cycle takes: block bottom from spawn to the paddle row.
  static int catch_cycle_steps() {
    return kFrameSize - kPaddleHeight - kBlockSize + 1;
  }

  // Highest achievable episode return (one catch per falling cycle; the
  // paddle can always reach the next spawn column in time).
  int max_return() const { return cfg_.episode_length / catch_cycle_steps(); }

  int obs_size() const { return kFrameSize * kFrameSize * cfg_.frame_stack; }

 private:
  Observation make_observation() const;
  void push_frame();

  EnvConfig cfg_;
  EnvState state_;
  Rng rng_;
  bool done_ = false;
  std::vector<uint8_t> frames_;  // last frame_stack frames, oldest first
};

// Stacks a raw frame with the preceding frame_stack-1 frames into an
// Observation (newest last). History must have exactly frame_stack-1 entries.
Observation preprocess(const std::vector<uint8_t>& raw,
                       const std::vector<std::vector<uint8_t>>& history,
                       int frame_stack = 4);

// Frames gathered by uniform-random exploration, plus the block's bounding
// box per frame (used for object-region reconstruction metrics).
struct FrameCorpus {
  std::vector<uint8_t> frames;  // count * 84 * 84, row-major, frame-major
  std::vector<int> block_x;     // per-frame block column
  std::vector<int> block_y;     // per-frame block row
  uint64_t source_seed = 0;
  int count = 0;
};

FrameCorpus collect_random_frames(int n, uint64_t seed,
                                  const EnvConfig& cfg = EnvConfig{});

// JSON manifest at `path` plus a raw byte blob alongside it.
void save_frame_corpus(const FrameCorpus& corpus, const std::string& path);
FrameCorpus load_frame_corpus(const std::string& path);

}  // namespace gameirl::envs

#endif  // GAMEIRL_CORE_ENVS_CATCHER_HPP_
