// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rerender/trainer.hpp"
#include "test_util.hpp"

using namespace rerender;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

TrainConfig base_coarse_cfg(const std::string& tag) {
  TrainConfig cfg;
  cfg.stage = TrainConfig::Stage::Coarse;
  cfg.dataset_dir = testutil::tiny_dataset();
  cfg.seed = 5;
  cfg.epochs = 100;
  cfg.max_steps = 8;
  cfg.checkpoint_out = testutil::tmp_dir("train") + "/" + tag + ".ckpt";
  cfg.metrics_csv = testutil::tmp_dir("train") + "/" + tag + ".csv";
  return cfg;
}

}  // namespace

TEST_CASE("fixed seed reproduces the loss trace and checkpoint bitwise") {
  TrainConfig a = base_coarse_cfg("det_a");
  TrainConfig b = base_coarse_cfg("det_b");
  run_training(a);
  run_training(b);
  const auto la = read_lines(a.metrics_csv);
  const auto lb = read_lines(b.metrics_csv);
  REQUIRE(la.size() == lb.size());
  CHECK(la == lb);
  CHECK(read_bytes(a.checkpoint_out) == read_bytes(b.checkpoint_out));
}

TEST_CASE("metrics log steps are contiguous and loss decreases on a tiny run") {
  TrainConfig cfg = base_coarse_cfg("mono");
  cfg.max_steps = 12;
  TrainResult res = run_training(cfg);
  CHECK(res.steps == 12);

  const auto lines = read_lines(cfg.metrics_csv);
  REQUIRE(lines.size() == 13);  // header + rows
  CHECK(lines[0] == StepLog::csv_header());
  for (size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string step_str;
    std::getline(row, step_str, ',');
    CHECK(std::stoll(step_str) == static_cast<long long>(i - 1));
  }
  CHECK(res.final_loss < res.first_loss);
}

TEST_CASE("stage freezes hold bitwise") {
  // Coarse stage leaves detail parameters untouched.
  TrainConfig cfg = base_coarse_cfg("freeze");
  cfg.max_steps = 4;
  run_training(cfg);
  LoadedCheckpoint after_coarse = load_checkpoint(cfg.checkpoint_out);

  RerenderModel fresh(after_coarse.state.model_config);
  for (const auto& prefix : {"ref_enc", "refine", "decoder"}) {
    const ParamRefs pa = fresh.parameters_with_prefix(prefix);
    const ParamRefs pb = after_coarse.model.parameters_with_prefix(prefix);
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second.vec() == pb[i].second.vec());
  }
  // And the coarse parameters did change.
  bool coarse_changed = false;
  for (size_t i = 0; i < fresh.parameters_with_prefix("coarse").size(); ++i)
    if (fresh.parameters_with_prefix("coarse")[i].second.vec() !=
        after_coarse.model.parameters_with_prefix("coarse")[i].second.vec())
      coarse_changed = true;
  CHECK(coarse_changed);

  // Detail stage leaves the coarse branch untouched.
  TrainConfig dcfg;
  dcfg.stage = TrainConfig::Stage::Detail;
  dcfg.dataset_dir = testutil::tiny_dataset();
  dcfg.checkpoint_in = cfg.checkpoint_out;
  dcfg.checkpoint_out = testutil::tmp_dir("train") + "/freeze_detail.ckpt";
  dcfg.seed = 6;
  dcfg.epochs = 1;
  dcfg.max_steps = 2;
  run_training(dcfg);
  LoadedCheckpoint after_detail = load_checkpoint(dcfg.checkpoint_out);
  const ParamRefs ca = after_coarse.model.parameters_with_prefix("coarse");
  const ParamRefs cb = after_detail.model.parameters_with_prefix("coarse");
  REQUIRE(ca.size() == cb.size());
  for (size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].second.vec() == cb[i].second.vec());

  // Fine-tuning leaves the reference encoder untouched.
  TrainConfig fcfg = dcfg;
  fcfg.stage = TrainConfig::Stage::Finetune;
  fcfg.checkpoint_in = dcfg.checkpoint_out;
  fcfg.checkpoint_out = testutil::tmp_dir("train") + "/freeze_ft.ckpt";
  fcfg.subjects = {"subj1"};
  fcfg.finetune_frames = 2;
  fcfg.max_steps = 2;
  run_training(fcfg);
  LoadedCheckpoint after_ft = load_checkpoint(fcfg.checkpoint_out);
  const ParamRefs ra = after_detail.model.parameters_with_prefix("ref_enc");
  const ParamRefs rb = after_ft.model.parameters_with_prefix("ref_enc");
  for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].second.vec() == rb[i].second.vec());
}

TEST_CASE("resume reproduces the uninterrupted trace") {
  // Uninterrupted 14 steps.
  TrainConfig full = base_coarse_cfg("resume_full");
  full.max_steps = 14;
  run_training(full);

  // 7 steps, checkpoint, then resume for the remaining 7.
  TrainConfig part1 = base_coarse_cfg("resume_part");
  part1.max_steps = 7;
  run_training(part1);
  TrainConfig part2 = part1;
  part2.checkpoint_in = part1.checkpoint_out;
  part2.checkpoint_out = testutil::tmp_dir("train") + "/resume_part2.ckpt";
  part2.resume = true;
  part2.max_steps = 14;
  run_training(part2);

  const auto full_lines = read_lines(full.metrics_csv);
  const auto part_lines = read_lines(part1.metrics_csv);  // part2 appended here
  REQUIRE(full_lines.size() == 15);
  REQUIRE(part_lines.size() == 15);
  CHECK(full_lines == part_lines);
  CHECK(read_bytes(full.checkpoint_out) == read_bytes(part2.checkpoint_out));
}
