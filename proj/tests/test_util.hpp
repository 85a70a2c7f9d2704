// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "rerender/synth.hpp"

namespace testutil {

inline std::string tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rerender_tests" / name;
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Small dataset shared by training-path tests; generated once per process.
inline const std::string& tiny_dataset() {
  static const std::string dir = [] {
    const std::string d = tmp_dir("tiny_ds");
    if (!std::filesystem::exists(std::filesystem::path(d) / "manifest.json")) {
      rerender::GenConfig cfg;
      cfg.n_subjects = 2;
      cfg.frames_per_seq = 4;
      cfg.n_views = 2;
      cfg.ref_poses = 2;
      cfg.seed = 11;
      cfg.out_dir = d;
      rerender::generate_dataset(cfg);
    }
    return d;
  }();
  return dir;
}

}  // namespace testutil
