// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rerender/model.hpp"
#include "rerender/nn.hpp"

namespace rerender {

// Binary checkpoint: magic, version u32, u64 header length, JSON header
// (model config, stage counters, parameter names/shapes, optimizer entry
// names), then little-endian float32 blobs in header order. Save -> load ->
// save is byte-identical.
inline constexpr char kCheckpointMagic[4] = {'R', 'R', 'P', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointState {
  ModelConfig model_config;
  std::string stage = "none";
  int epoch = 0;
  int64_t global_step = 0;
  uint64_t train_seed = 0;
  int64_t adam_step_count = 0;
  // name -> (m, v) moment blobs, present only when saved mid-training.
  std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> adam_moments;
};

// Atomic (write-temp-then-rename) save of a model and its training state.
void save_checkpoint(const std::string& path, const RerenderModel& model,
                     const CheckpointState& state);

struct LoadedCheckpoint {
  RerenderModel model;
  CheckpointState state;
};

// Validates magic/version, requires every parameter of the rebuilt model to
// be present (and nothing extra), and rejects truncated files.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Rounds every parameter through IEEE half precision (weights stored at
// 16 bits, widened to f32 for compute).
void cast_weights_to_half(RerenderModel& model);

}  // namespace rerender
