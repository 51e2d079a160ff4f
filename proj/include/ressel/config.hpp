// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ressel/cost_model.hpp"
#include "ressel/feature_client.hpp"
#include "ressel/imageops.hpp"
#include "ressel/labeler.hpp"
#include "ressel/menu.hpp"
#include "ressel/vlm_client.hpp"

namespace ressel {

/// How the gateway (and `eval`) picks the resolution sent downstream.
struct Mode {
  enum class Kind { kContinuous, kDiscrete, kPassthrough, kFixed };
  Kind kind = Kind::kContinuous;
  int fixed_resolution = 0;

  /// "continuous" | "discrete" | "passthrough" | "fixed:<r>".
  static Mode parse(std::string_view text);
  std::string to_string() const;
  bool needs_features() const noexcept { return kind == Kind::kContinuous || kind == Kind::kDiscrete; }
  bool operator==(const Mode&) const = default;
};

enum class Fallback { kDegrade, kFail };

struct VlmSettings {
  enum class Kind { kHttp, kSimulated };
  Kind kind = Kind::kSimulated;
  vlm::VlmEndpoint endpoint;
  std::filesystem::path simulated_spec;
};

struct GatewaySettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path head_path;
  Mode mode;
  std::size_t concurrency = 16;
  Fallback fallback = Fallback::kDegrade;
  double probe_interval_s = 5.0;
};

/// Parsed configuration file. Relative paths are resolved against the
/// directory of the file.
struct AppConfig {
  ResolutionMenu menu = ResolutionMenu::default_menu();
  labeler::LabelingConfig labeling;
  imageops::RenderOptions image;
  std::optional<VlmSettings> vlm;
  cost::ModelProfile profile = cost::builtin_profile("patch-grid-2b");
  std::optional<features::FeatureEndpoint> features;
  GatewaySettings gateway;
  /// Raw document, for the run manifest hash.
  nlohmann::json raw = nlohmann::json::object();

  /// Sizes the continuous policy rounds to: the profile's when declared,
  /// otherwise the menu's.
  std::vector<int> supported_sizes() const;
};

/// Throws ConfigError whose message starts with the JSON path of the
/// offending field, e.g. "gateway.mode: ...".
AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

std::unique_ptr<vlm::VlmClient> make_vlm_client(const VlmSettings& settings);

}  // namespace ressel
