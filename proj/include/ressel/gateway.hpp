// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ressel/config.hpp"
#include "ressel/cost_model.hpp"
#include "ressel/feature_client.hpp"
#include "ressel/imageops.hpp"
#include "ressel/selector.hpp"
#include "ressel/vlm_client.hpp"

namespace httplib {
class Server;
}

namespace ressel::gateway {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  ResolutionMenu menu = ResolutionMenu::default_menu();
  std::vector<int> supported_sizes{384, 768, 1024};
  cost::ModelProfile profile = cost::builtin_profile("patch-grid-2b");
  Mode mode;
  std::size_t concurrency = 16;
  Fallback fallback = Fallback::kDegrade;
  imageops::RenderOptions image;
  double probe_interval_s = 5.0;

  static GatewayConfig from_app(const AppConfig& app);
};

struct StageLatencies {
  double feature_ms = 0.0;
  double select_ms = 0.0;
  double resize_ms = 0.0;
  double vlm_ms = 0.0;
};

struct Telemetry {
  std::string mode;
  std::optional<double> chosen_r_continuous;
  int chosen_r_rounded = 0;
  std::vector<double> probabilities;
  imageops::ImageDims dims_native;
  imageops::ImageDims dims_sent;
  std::int64_t text_tokens_est = 0;
  std::int64_t visual_tokens_est = 0;
  double flops_est = 0.0;
  double flops_native_est = 0.0;
  double savings_pct = 0.0;
  bool degraded = false;
  std::string degraded_reason;
  StageLatencies latency;

  nlohmann::json to_json() const;
};

struct RouteRequest {
  std::string image_bytes;
  std::string query;
  std::optional<Mode> mode;
  /// Forwarded to simulated VLMs only.
  std::string sample_id;
};

struct RouteResult {
  std::string answer;
  Telemetry telemetry;
};

/// Routing decision for one image, before the downstream call.
struct Routed {
  std::string payload;  // bytes to send
  Telemetry telemetry;
};

struct Health {
  bool feature_ok = true;
  bool vlm_ok = true;

  /// "ok" or "degraded:<component>[,<component>]".
  std::string status() const;
};

/// The deployed selection path: cheap low-resolution feature pass, resolution
/// policy, resize, forward. Handlers share no mutable state apart from the
/// head snapshot, which `reload_head` swaps atomically.
class Gateway {
 public:
  Gateway(GatewayConfig config, selector::ClassifierHead head, std::shared_ptr<vlm::VlmClient> vlm,
          std::shared_ptr<features::FeatureClient> features);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Throws DecodeError, FeatureServiceUnavailable (fallback=fail) or VlmError.
  RouteResult handle_query(const RouteRequest& request);

  /// Picks the resolution and renders the payload without calling the VLM.
  Routed route(const std::string& image_bytes, const std::string& query, const Mode& mode);

  Health healthz() const;
  /// Refreshes reachability of both downstream services.
  void probe_once();

  void reload_head(selector::ClassifierHead head);
  std::shared_ptr<const selector::ClassifierHead> head() const;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  void stop();
  /// Blocks serving on the calling thread.
  void serve_forever();

  const GatewayConfig& config() const noexcept { return config_; }

 private:
  void install_routes();
  void run_probe_loop();

  GatewayConfig config_;
  mutable std::mutex head_mutex_;
  std::shared_ptr<const selector::ClassifierHead> head_;
  std::shared_ptr<vlm::VlmClient> vlm_;
  std::shared_ptr<features::FeatureClient> features_;
  std::atomic<bool> feature_ok_{true};
  std::atomic<bool> vlm_ok_{true};

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread probe_thread_;
  std::mutex probe_mutex_;
  std::condition_variable probe_cv_;
  bool stopping_ = false;
  int bound_port_ = 0;
};

}  // namespace ressel::gateway
