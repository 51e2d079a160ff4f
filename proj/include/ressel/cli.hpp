// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ressel/config.hpp"
#include "ressel/labeler.hpp"
#include "ressel/selector.hpp"

namespace ressel::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.3.0";

/// Reproducibility record written next to a command's output.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::string started_at;
  std::string finished_at;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const fs::path& path) const;
};

std::string utc_now();

/// "384:0.7,768:0.2,1024:0.1" or positional "0.7/0.2/0.1" over the menu.
/// Throws BadMix unless every key is a menu entry, shares are non-negative
/// and sum to 1 within 1e-6.
std::map<int, double> parse_mix(const std::string& text, const ResolutionMenu& menu);

struct SimulateOptions {
  std::size_t n = 1000;
  std::map<int, double> mix;
  ResolutionMenu menu = ResolutionMenu::default_menu();
  std::uint64_t seed = 7;
  fs::path out_dir;
  std::size_t dim = 64;
  /// Minimum distance between class centres, in noise standard deviations.
  double separation = 8.0;
  std::size_t image_pool = 6;
  /// Sufficient resolution drawn uniformly from (r_{k-1}, r_k] of the planted
  /// label (half of r_1 below the first entry) instead of sitting on r_k.
  bool interval_thresholds = true;
  /// Share of samples scored by exact match instead of ANLS.
  double exact_match_share = 0.25;
};

struct SimulateOutputs {
  fs::path samples;
  fs::path spec;
  fs::path features;
  fs::path config;
  std::map<int, std::size_t> planted;
};

/// Writes samples.jsonl, vlm_spec.json, features.jsonl, config.json and an
/// images/ directory under `out_dir`. Deterministic for a fixed seed.
SimulateOutputs simulate(const SimulateOptions& options);

/// id -> feature vector, from a features JSONL file (`{"id", "features": {"dim", "b64"}}`).
std::map<std::string, std::vector<double>> load_features(const fs::path& path);

/// Attaches features from `features` to records that carry none.
void join_features(std::vector<store::SampleRecord>& records,
                   const std::map<std::string, std::vector<double>>& features);

/// True for roughly `fraction` of ids, decided by a hash of the id.
bool in_holdout(const std::string& id, double fraction);

struct TrainOptions {
  fs::path data;
  std::optional<fs::path> features;
  fs::path out;
  selector::TrainConfig train;
  double holdout = 0.2;
};

struct TrainOutcome {
  selector::ClassifierHead head;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
  double train_accuracy = 0.0;
  std::optional<double> holdout_accuracy;
  nlohmann::json to_json() const;
};

/// Trains on labeled records outside the holdout and saves the head.
TrainOutcome train(const TrainOptions& options, const ResolutionMenu& menu);

struct EvalOptions {
  fs::path dataset;
  std::optional<fs::path> features;
  std::optional<fs::path> head;
  Mode mode;
  fs::path out;
  std::size_t parallelism = 4;
};

struct EvalSummary {
  std::string mode;
  std::size_t samples = 0;
  double mean_utility = 0.0;
  double macro_utility = 0.0;
  std::map<std::string, double> tag_utility;
  std::map<int, std::size_t> routed;
  /// Samples whose VLM call failed; scored 0.
  std::size_t errors = 0;
  double total_flops = 0.0;
  double total_native_flops = 0.0;
  double savings_pct = 0.0;
  nlohmann::json to_json() const;
};

/// Routes every sample under `mode`, queries the VLM and writes one run line
/// per sample to `out` plus `<out>.summary.json`.
EvalSummary eval(const EvalOptions& options, const AppConfig& config);

/// Entry point of the `ressel` tool. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace ressel::cli
