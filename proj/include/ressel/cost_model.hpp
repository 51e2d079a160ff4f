// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ressel/imageops.hpp"

namespace ressel::cost {

using imageops::ImageDims;

/// Parametrization of the visual-token function T(dims).
struct CostScheme {
  enum class Kind { kPatchGrid, kTiled, kFixed };

  Kind kind = Kind::kPatchGrid;
  // patch_grid
  int patch_size = 14;
  int merge_factor = 2;
  // tiled
  int tile_size = 0;
  int tokens_per_tile = 0;
  int base_tokens = 0;
  // fixed
  int fixed_tokens = 0;

  static CostScheme patch_grid(int patch_size, int merge_factor);
  static CostScheme tiled(int tile_size, int tokens_per_tile, int base_tokens);
  static CostScheme fixed(int tokens);

  /// Throws ConfigError when a parameter the active kind needs is missing.
  void validate() const;
};

/// Accounting profile of one target VLM.
struct ModelProfile {
  std::string name;
  std::int64_t parameter_count = 0;
  CostScheme scheme;
  /// Side lengths the model accepts; empty means "use the menu's".
  std::vector<int> supported_sizes;
  /// Optional API pricing, dollars per million prompt tokens.
  std::optional<double> usd_per_mtok;

  void validate() const;
};

std::int64_t visual_tokens(const CostScheme& scheme, const ImageDims& dims);

/// 2 * P * N estimate of prompt-processing compute.
double prefill_flops(std::int64_t visual_tokens, std::int64_t text_tokens,
                     std::int64_t parameter_count);

/// Percentage change of `adaptive` relative to `baseline`; negative = savings.
/// Throws NonpositiveBaseline.
double relative_savings(double baseline, double adaptive);

/// ceil(characters / 4), the fallback when no tokenizer count is available.
std::int64_t estimate_text_tokens(std::string_view text);

/// Built-in approximations of the three token regimes.
std::vector<std::string> builtin_profile_names();
ModelProfile builtin_profile(std::string_view name);

ModelProfile profile_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ModelProfile& profile);
void to_json(nlohmann::json& j, const CostScheme& scheme);

/// Accepts a built-in name or a path to a JSON profile file.
ModelProfile resolve_profile(const std::string& name_or_path);

/// One evaluated sample as priced by the report.
struct EvalRecord {
  std::string id;
  std::string tag;
  ImageDims dims_used;
  ImageDims dims_native;
  std::int64_t text_tokens = 0;
  double utility = 0.0;
};

struct ReportRow {
  EvalRecord record;
  std::int64_t visual_tokens = 0;
  std::int64_t native_visual_tokens = 0;
  double flops = 0.0;
  double native_flops = 0.0;
};

struct Report {
  std::string profile_name;
  std::size_t samples = 0;
  double mean_utility = 0.0;
  double macro_utility = 0.0;
  std::map<std::string, double> tag_utility;
  double mean_visual_tokens = 0.0;
  double mean_flops = 0.0;
  std::int64_t total_visual_tokens = 0;
  std::int64_t total_native_visual_tokens = 0;
  double total_flops = 0.0;
  double total_native_flops = 0.0;
  double savings_pct = 0.0;
  std::optional<double> cost_savings_pct;
  std::vector<ReportRow> rows;

  nlohmann::json to_json() const;
  /// Aligned text table: summary block then one line per sample.
  std::string to_table(std::size_t max_rows = 20) const;
};

/// Prices every record under `profile`, using each sample's native dims as the
/// baseline. Throws EmptyEvaluation.
Report run_report(const std::vector<EvalRecord>& records, const ModelProfile& profile);

/// Scatter of (FLOPs, utility) points, one per labelled run.
struct ScatterPoint {
  std::string label;
  double flops = 0.0;
  double utility = 0.0;
};
std::string render_svg(const std::vector<ScatterPoint>& points, std::string_view title);

}  // namespace ressel::cost
