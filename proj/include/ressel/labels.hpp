// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ressel {

/// A menu resolution together with its class index.
struct SufficiencyLabel {
  int resolution = 0;
  std::size_t class_index = 0;

  bool operator==(const SufficiencyLabel&) const = default;
};

struct RolloutStep {
  int resolution = 0;
  std::string response;
  double utility = 0.0;

  bool operator==(const RolloutStep&) const = default;
};

/// VLM responses and utilities for the menu prefix that was actually queried.
struct RolloutRecord {
  std::vector<RolloutStep> steps;

  /// Index of the last menu entry queried; meaningless when `steps` is empty.
  std::size_t evaluated_upto() const noexcept { return steps.empty() ? 0 : steps.size() - 1; }
  bool operator==(const RolloutRecord&) const = default;
};

}  // namespace ressel
