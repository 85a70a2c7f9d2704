// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rerender/checkpoint.hpp"
#include "test_util.hpp"

using namespace rerender;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round-trip is byte-identical and parameter-exact") {
  ModelConfig mc;
  mc.init_seed = 9;
  RerenderModel model(mc);

  CheckpointState state;
  state.model_config = mc;
  state.stage = "detail";
  state.epoch = 3;
  state.global_step = 123;
  state.train_seed = 77;
  state.adam_step_count = 123;
  for (const auto& [name, t] : model.parameters_with_prefix("refine")) {
    std::vector<float> m(t.vec().size(), 0.5f), v(t.vec().size(), 0.25f);
    state.adam_moments[name] = {m, v};
  }

  const std::string dir = testutil::tmp_dir("ckpt");
  const std::string path_a = dir + "/a.ckpt";
  save_checkpoint(path_a, model, state);

  LoadedCheckpoint lc = load_checkpoint(path_a);
  CHECK(lc.state.stage == "detail");
  CHECK(lc.state.epoch == 3);
  CHECK(lc.state.global_step == 123);
  CHECK(lc.state.train_seed == 77);
  CHECK(lc.state.adam_step_count == 123);
  CHECK(lc.state.adam_moments.size() == state.adam_moments.size());

  const ParamRefs pa = model.parameters();
  const ParamRefs pb = lc.model.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second.vec() == pb[i].second.vec());
  }

  const std::string path_b = dir + "/b.ckpt";
  save_checkpoint(path_b, lc.model, lc.state);
  CHECK(read_bytes(path_a) == read_bytes(path_b));
}

TEST_CASE("checkpoint rejects corrupt magic and truncation") {
  ModelConfig mc;
  RerenderModel model(mc);
  CheckpointState state;
  state.model_config = mc;

  const std::string dir = testutil::tmp_dir("ckpt");
  const std::string path = dir + "/corrupt.ckpt";
  save_checkpoint(path, model, state);

  std::string bytes = read_bytes(path);
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
  CHECK_THROWS_AS((void)load_checkpoint(path), RuntimeError);

  const std::string trunc_path = dir + "/trunc.ckpt";
  std::ofstream(trunc_path, std::ios::binary | std::ios::trunc)
      << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS((void)load_checkpoint(trunc_path), RuntimeError);
}

TEST_CASE("half casting keeps weights close") {
  ModelConfig mc;
  RerenderModel model(mc);
  ParamRefs before = model.parameters();
  std::vector<std::vector<float>> saved;
  for (auto& [name, t] : before) saved.push_back(t.vec());

  cast_weights_to_half(model);
  ParamRefs after = model.parameters();
  for (size_t p = 0; p < after.size(); ++p) {
    for (size_t i = 0; i < saved[p].size(); ++i) {
      const float orig = saved[p][i];
      const float cast = after[p].second.vec()[i];
      CHECK(std::abs(cast - orig) <= std::abs(orig) * 1e-3f + 1e-6f);
    }
  }
}
