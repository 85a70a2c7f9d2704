// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rerender {

// Contract violation (bad arguments, shape mismatch, protocol misuse).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Runtime failure (non-finite values, I/O, corrupt files).
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rerender

#define RR_CHECK(cond, msg)                                            \
  do {                                                                 \
    if (!(cond)) {                                                     \
      std::ostringstream rr_oss_;                                      \
      rr_oss_ << "check failed: " << msg << " (" << #cond << ")";      \
      throw ::rerender::ContractError(rr_oss_.str());                  \
    }                                                                  \
  } while (0)

#define RR_RUNTIME_CHECK(cond, msg)                 \
  do {                                              \
    if (!(cond)) {                                  \
      std::ostringstream rr_oss_;                   \
      rr_oss_ << msg;                               \
      throw ::rerender::RuntimeError(rr_oss_.str()); \
    }                                               \
  } while (0)
