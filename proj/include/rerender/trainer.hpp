// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rerender/checkpoint.hpp"
#include "rerender/model.hpp"
#include "rerender/synth.hpp"

namespace rerender {

struct TrainConfig {
  enum class Stage { Coarse, Detail, Finetune };
  Stage stage = Stage::Coarse;

  std::string dataset_dir;
  std::vector<std::string> subjects;  // empty = every subject in the manifest
  std::string checkpoint_in;          // required for Detail/Finetune (and resume)
  std::string checkpoint_out;
  std::string metrics_csv;            // optional per-step log

  double lr = kDefaultLearningRate;
  double weight_decay = kDefaultWeightDecay;
  int batch_size = kDefaultBatchSize;
  int epochs = 10;
  int max_steps = -1;  // stop early after this many optimizer steps (-1 = off)
  uint64_t seed = 1;

  // Fresh-model parameters (Coarse stage without checkpoint_in).
  int height = 128, width = 64;
  double alpha = kDefaultBlendAlpha;
  uint64_t model_seed = 1;
  uint64_t extractor_seed = 77;
  bool wo_coarse = false;  // build/train the guidance-free ablation variant

  int n_refs = kReferenceCountDesk;      // reference candidates per subject
  int finetune_frames = kFinetuneFrames; // frames (x all views) for fine-tuning
  bool augment = true;
  double grad_clip = 10.0;
  bool resume = false;  // continue the stage from checkpoint_in's counters
};

struct TrainResult {
  std::string checkpoint_path;
  double first_loss = 0;
  double final_loss = 0;
  int64_t steps = 0;
  int epochs_run = 0;
};

// Runs one training stage end to end: builds or loads the model, freezes the
// parameters the stage does not own, steps Adam with gradient clipping, logs
// one CSV row per step, and writes the checkpoint.
TrainResult run_training(const TrainConfig& cfg);

// Per-step metrics row, also exposed for tests.
struct StepLog {
  int64_t step = 0;
  std::string stage;
  int epoch = 0;
  double loss_total = 0;
  double loss_coarse = 0;
  double loss_vgg = 0, loss_img = 0;
  double loss_warp_coarse = 0, loss_warp_refined = 0, loss_warp_reg = 0;
  double lambda_c_img = 0, lambda_r_img = 0, lambda_reg = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace rerender
