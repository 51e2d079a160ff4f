// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ressel/vlm_client.hpp"

namespace ressel::vlm {

/// One answer the simulator gives once the effective resolution reaches
/// `min_resolution`.
struct AnswerLevel {
  int min_resolution = 0;
  std::string answer;
};

/// Planted behaviour of one sample. In the default step form there is a
/// single level at the sufficient resolution carrying the correct answer.
struct SimulatedSample {
  int sufficient_resolution = 0;
  std::string correct_answer;
  /// Ascending by min_resolution; the last level's min equals
  /// sufficient_resolution and carries correct_answer.
  std::vector<AnswerLevel> levels;
};

/// Desk-scale stand-in for a pretrained VLM: answers correctly at or above a
/// planted resolution and returns a corrupted answer below it.
class SimulatedVlmSpec {
 public:
  void add_step(const std::string& sample_id, int sufficient_resolution, std::string correct_answer);
  /// Multi-level ramp; levels must be ascending and the last one is treated as
  /// the correct answer.
  void add_ramp(const std::string& sample_id, std::vector<AnswerLevel> levels);

  const SimulatedSample& sample(const std::string& sample_id) const;
  bool contains(const std::string& sample_id) const { return samples_.contains(sample_id); }
  std::size_t size() const noexcept { return samples_.size(); }

  /// Response for `sample_id` at effective resolution `r_effective`. Pure.
  std::string answer_at(const std::string& sample_id, int r_effective) const;

  nlohmann::json to_json() const;
  static SimulatedVlmSpec from_json(const nlohmann::json& j);
  static SimulatedVlmSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::unordered_map<std::string, SimulatedSample> samples_;
  std::vector<std::string> order_;
};

/// Deterministic corruption with zero normalized similarity to `correct`:
/// same length, built from characters absent from `correct`.
std::string corrupt_answer(std::string_view correct);

/// `correct` with its last round((1 - similarity) * n) characters replaced,
/// so that the un-thresholded similarity is as close to `similarity` as the
/// length permits.
std::string degrade_answer(std::string_view correct, double similarity);

/// VlmClient over a SimulatedVlmSpec. The effective resolution is the longest
/// side of the image actually received.
class SimulatedVlm : public VlmClient {
 public:
  explicit SimulatedVlm(SimulatedVlmSpec spec) : spec_(std::move(spec)) {}

  VlmResponse chat(const VlmRequest& request) override;

  const SimulatedVlmSpec& spec() const noexcept { return spec_; }

 private:
  SimulatedVlmSpec spec_;
};

}  // namespace ressel::vlm
