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

#include "core/envs/catcher.hpp"

#include <algorithm>
#include <cstring>

#include <nlohmann/json.hpp>

#include "core/common.hpp"
#include "core/util/fs.hpp"

namespace gameirl::envs {

namespace {
constexpr int kSpawnColumns = kFrameSize - kBlockSize + 1;   // 81
constexpr int kPaddleTopRow = kFrameSize - kPaddleHeight;    // 81
constexpr int kPaddleMaxX = kFrameSize - kPaddleWidth;       // 72
}  // namespace

Observation CatcherEnv::reset(uint64_t seed) {
  rng_ = Rng::derive(seed, "env");
  state_.paddle_x = (kFrameSize - kPaddleWidth) / 2;
  state_.block_x = static_cast<int>(rng_.uniform_int(kSpawnColumns));
  state_.block_y = 0;
  state_.step_count = 0;
  done_ = false;
  // First frame replicated across the stack.
  frames_.assign(static_cast<std::size_t>(cfg_.frame_stack) * kFrameSize *
                     kFrameSize,
                 0);
  render(frames_.data());
  for (int c = 1; c < cfg_.frame_stack; ++c) {
    std::memcpy(frames_.data() + static_cast<std::size_t>(c) * kFrameSize * kFrameSize,
                frames_.data(), kFrameSize * kFrameSize);
  }
  return make_observation();
}

StepResult CatcherEnv::step(Action action) {
  if (done_) throw UsageError("episode finished");
  if (action == Action::kLeft) {
    state_.paddle_x = std::max(0, state_.paddle_x - kPaddleSpeed);
  } else if (action == Action::kRight) {
    state_.paddle_x = std::min(kPaddleMaxX, state_.paddle_x + kPaddleSpeed);
  }
  state_.block_y += 1;

  float reward = 0.0f;
  const int block_bottom = state_.block_y + kBlockSize - 1;
  if (block_bottom == kPaddleTopRow) {
    const bool overlap = state_.block_x + kBlockSize - 1 >= state_.paddle_x &&
                         state_.block_x <= state_.paddle_x + kPaddleWidth - 1;
    if (overlap) {
      reward = 1.0f;
      state_.block_y = 0;
      state_.block_x = static_cast<int>(rng_.uniform_int(kSpawnColumns));
    }
  } else if (block_bottom == kFrameSize - 1) {
    reward = -1.0f;
    state_.block_y = 0;
    state_.block_x = static_cast<int>(rng_.uniform_int(kSpawnColumns));
  }

  push_frame();
  state_.step_count += 1;
  done_ = state_.step_count >= cfg_.episode_length;
  return {make_observation(), reward, done_};
}

void CatcherEnv::render(uint8_t* frame) const {
  std::memset(frame, 0, kFrameSize * kFrameSize);
  for (int y = kPaddleTopRow; y < kFrameSize; ++y) {
    std::memset(frame + y * kFrameSize + state_.paddle_x, 255, kPaddleWidth);
  }
  const int block_top = state_.block_y;
  for (int y = block_top; y < block_top + kBlockSize && y < kFrameSize; ++y) {
    std::memset(frame + y * kFrameSize + state_.block_x, 255, kBlockSize);
  }
}

void CatcherEnv::push_frame() {
  constexpr std::size_t kPixels = kFrameSize * kFrameSize;
  std::memmove(frames_.data(), frames_.data() + kPixels,
               (static_cast<std::size_t>(cfg_.frame_stack) - 1) * kPixels);
  render(frames_.data() + (static_cast<std::size_t>(cfg_.frame_stack) - 1) * kPixels);
}

Observation CatcherEnv::make_observation() const {
  Observation obs;
  obs.frame_stack = cfg_.frame_stack;
  obs.data.resize(static_cast<std::size_t>(kFrameSize) * kFrameSize *
                  cfg_.frame_stack);
  constexpr std::size_t kPixels = kFrameSize * kFrameSize;
  // frames_ is planar (oldest first); observations are HWC with the newest
  // frame at the highest channel index.
  for (std::size_t p = 0; p < kPixels; ++p) {
    for (int c = 0; c < cfg_.frame_stack; ++c) {
      obs.data[p * cfg_.frame_stack + c] = frames_[c * kPixels + p];
    }
  }
  return obs;
}

Observation preprocess(const std::vector<uint8_t>& raw,
                       const std::vector<std::vector<uint8_t>>& history,
                       int frame_stack) {
  constexpr std::size_t kPixels = kFrameSize * kFrameSize;
  if (raw.size() != kPixels) throw UsageError("raw frame must be 84x84");
  if (static_cast<int>(history.size()) != frame_stack - 1) {
    throw UsageError("preprocess: history must hold frame_stack-1 frames");
  }
  const int stack = frame_stack;
  for (const auto& h : history) {
    if (h.size() != kPixels) throw UsageError("history frame must be 84x84");
  }
  Observation obs;
  obs.frame_stack = stack;
  obs.data.resize(kPixels * stack);
  for (std::size_t p = 0; p < kPixels; ++p) {
    for (int c = 0; c < stack - 1; ++c) {
      obs.data[p * stack + c] = history[c][p];
    }
    obs.data[p * stack + stack - 1] = raw[p];
  }
  return obs;
}

FrameCorpus collect_random_frames(int n, uint64_t seed, const EnvConfig& cfg) {
  if (n <= 0) throw UsageError("frame count must be positive");
  FrameCorpus corpus;
  corpus.source_seed = seed;
  corpus.frames.reserve(static_cast<std::size_t>(n) * kFrameSize * kFrameSize);
  Rng rng = Rng::derive(seed, "explore");
  CatcherEnv env(cfg, seed);

  const auto record = [&]() {
    const std::size_t at = corpus.frames.size();
    corpus.frames.resize(at + kFrameSize * kFrameSize);
    env.render(corpus.frames.data() + at);
    corpus.block_x.push_back(env.state().block_x);
    corpus.block_y.push_back(env.state().block_y);
    corpus.count += 1;
  };

  record();  // the reset frame
  while (corpus.count < n) {
    if (env.done()) {
      env.reset(rng.bits());
      record();
      continue;
    }
    env.step(static_cast<Action>(rng.uniform_int(kNumActions)));
    record();
  }
  return corpus;
}

void save_frame_corpus(const FrameCorpus& corpus, const std::string& path) {
  const std::string bin = bin_path_for(path);
  nlohmann::json manifest = {
      {"count", corpus.count},
      {"height", kFrameSize},
      {"width", kFrameSize},
      {"seed", corpus.source_seed},
      {"blob", std::filesystem::path(bin).filename().string()},
  };
  write_text(path, manifest.dump(2) + "\n");
  write_bytes(bin, corpus.frames.data(), corpus.frames.size());
}

FrameCorpus load_frame_corpus(const std::string& path) {
  nlohmann::json manifest = nlohmann::json::parse(read_text(path));
  FrameCorpus corpus;
  corpus.count = manifest.at("count").get<int>();
  corpus.source_seed = manifest.at("seed").get<uint64_t>();
  const int h = manifest.at("height").get<int>();
  const int w = manifest.at("width").get<int>();
  if (h != kFrameSize || w != kFrameSize) {
    throw StageError("corpus manifest: unsupported frame size");
  }
  auto blob = read_bytes(std::filesystem::path(path).parent_path() /
                         manifest.at("blob").get<std::string>());
  const std::size_t expect =
      static_cast<std::size_t>(corpus.count) * kFrameSize * kFrameSize;
  if (blob.size() != expect) {
    throw StageError("corpus blob: byte length " + std::to_string(blob.size()) +
                     " does not match count*height*width = " +
                     std::to_string(expect));
  }
  corpus.frames = std::move(blob);
  return corpus;
}

}  // namespace gameirl::envs
