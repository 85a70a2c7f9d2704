// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/config.hpp"

#include <filesystem>
#include <fstream>

#include "rerender/common.hpp"

namespace rerender {

void RunConfig::merge_file(const std::string& path) {
  std::ifstream is(path);
  RR_RUNTIME_CHECK(is.good(), "cannot open config file: " << path);
  nlohmann::json j = nlohmann::json::parse(is);
  RR_CHECK(j.is_object(), "config file must hold a JSON object: " << path);
  for (auto it = j.begin(); it != j.end(); ++it) values_[it.key()] = it.value();
}

void RunConfig::write_resolved(const std::string& out_dir) const {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / "config.resolved.json").string();
  std::ofstream os(path, std::ios::trunc);
  RR_RUNTIME_CHECK(os.good(), "cannot write " << path);
  os << values_.dump(2);
}

}  // namespace rerender
