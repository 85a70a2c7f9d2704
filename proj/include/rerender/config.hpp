// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "json.hpp"
#include "rerender/common.hpp"

namespace rerender {

// Flat key-value run configuration: defaults, overlaid by an optional JSON
// file, overlaid by explicitly passed command-line flags. The effective
// config is echoed to <out>/config.resolved.json so a run can be reproduced
// by feeding that file back via --config.
class RunConfig {
 public:
  RunConfig() : values_(nlohmann::json::object()) {}

  void set_default(const std::string& key, const nlohmann::json& v) { values_[key] = v; }
  void merge_file(const std::string& path);
  void override_value(const std::string& key, const nlohmann::json& v) { values_[key] = v; }

  bool has(const std::string& key) const { return values_.contains(key); }
  template <typename T>
  T get(const std::string& key) const {
    RR_CHECK(values_.contains(key), "missing config key: " << key);
    return values_.at(key).get<T>();
  }

  const nlohmann::json& json() const { return values_; }
  void write_resolved(const std::string& out_dir) const;

 private:
  nlohmann::json values_;
};

}  // namespace rerender
