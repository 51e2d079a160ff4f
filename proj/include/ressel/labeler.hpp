// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ressel/dataset_store.hpp"
#include "ressel/imageops.hpp"
#include "ressel/labels.hpp"
#include "ressel/menu.hpp"
#include "ressel/vlm_client.hpp"

namespace ressel::labeler {

struct LabelingConfig {
  /// Minimum utility a resolution must reach.
  double tau = 0.85;
  /// Largest later improvement still considered negligible.
  double delta = 0.1;
  bool early_exit = true;

  /// Throws InvalidArgument unless tau in (0, 1] and delta in [0, 1).
  void validate() const;
};

/// Smallest k with u[k] >= tau and no later utility exceeding u[k] by more
/// than delta; the last menu entry when none qualifies. Throws LengthMismatch.
SufficiencyLabel label_from_utilities(std::span<const double> utilities,
                                      const ResolutionMenu& menu, const LabelingConfig& cfg);

/// Result of scanning the menu in increasing order.
struct ScanResult {
  std::size_t class_index = 0;
  /// Number of resolutions evaluated.
  std::size_t evaluations = 0;
};

/// Evaluates menu indices 0, 1, ... through `evaluate` and returns the
/// sufficiency label. With early exit, stops as soon as the label cannot
/// change whatever the unseen utilities are (they lie in [0, 1]); the label
/// always equals the full-scan one.
ScanResult sequential_scan(std::size_t menu_size, const LabelingConfig& cfg,
                           const std::function<double(std::size_t)>& evaluate);

using UtilityFn = std::function<double(const std::string& response,
                                       std::span<const std::string> ground_truths)>;

struct RolloutOutcome {
  RolloutRecord record;
  SufficiencyLabel label;
};

struct LabelingInput {
  std::string sample_id;
  std::string image_ref;
  std::string query;
  std::vector<std::string> ground_truths;
};

/// Queries `vlm` at the menu resolutions in increasing order and labels the
/// sample. Rendering goes through `images`. Throws VlmError on transport
/// failure after the client's retries.
RolloutOutcome rollout_and_label(const LabelingInput& sample, const ResolutionMenu& menu,
                                 const LabelingConfig& cfg, vlm::VlmClient& vlm,
                                 const UtilityFn& metric, imageops::RenderCache& images);

struct LabelingSummary {
  std::size_t labeled = 0;
  std::size_t failed = 0;
  /// Samples already in the store before this run.
  std::size_t skipped = 0;
  std::size_t vlm_calls = 0;
  std::map<int, std::size_t> histogram;
  double mean_utility_at_label = 0.0;

  nlohmann::json to_json() const;
};

/// Labels every sample not already present in `out`. Rollouts run on up to
/// `parallelism` threads; records are appended in input order. Counts in the
/// returned summary cover the whole store (existing plus new).
LabelingSummary label_dataset(const std::vector<store::SampleRecord>& samples,
                              const ResolutionMenu& menu, const LabelingConfig& cfg,
                              vlm::VlmClient& vlm, imageops::RenderCache& images,
                              store::DatasetWriter& out, std::size_t parallelism);

}  // namespace ressel::labeler
