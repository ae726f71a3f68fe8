// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qtbp {

// Corrupt or structurally inconsistent file content (checkpoints, datasets).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string &what) : std::runtime_error(what) {}
};

// A request would exceed a hard resource bound (e.g. enumeration state space).
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string &what) : std::runtime_error(what) {}
};

}  // namespace qtbp
