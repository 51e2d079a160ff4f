// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "ressel/gateway.hpp"

#include <chrono>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"
#include "ressel/log.hpp"

namespace ressel::gateway {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

json dims_json(const imageops::ImageDims& d) { return json::array({d.width, d.height}); }

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& stage,
                const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"stage", stage}, {"message", message}}}}.dump(),
                  "application/json");
}

std::string fetch_image(const std::string& url) {
  if (url.starts_with("data:")) {
    const auto comma = url.find(',');
    if (comma == std::string::npos || url.substr(0, comma).find(";base64") == std::string::npos)
      throw DecodeError("only base64 data URLs are supported");
    try {
      return codec::base64_decode(std::string_view(url).substr(comma + 1));
    } catch (const InvalidArgument& e) {
      throw DecodeError(std::string("image data URL: ") + e.what());
    }
  }
  vlm::ParsedUrl parsed;
  try {
    parsed = vlm::parse_url(url);
  } catch (const ConfigError& e) {
    throw DecodeError(std::string("image_url: ") + e.what());
  }
  httplib::Client client(parsed.origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  client.set_follow_location(true);
  auto res = client.Get(parsed.path.empty() ? "/" : parsed.path);
  if (!res || res->status != 200) throw DecodeError("cannot fetch image from '" + url + "'");
  return res->body;
}

}  // namespace

GatewayConfig GatewayConfig::from_app(const AppConfig& app) {
  GatewayConfig c;
  c.host = app.gateway.host;
  c.port = app.gateway.port;
  c.menu = app.menu;
  c.supported_sizes = app.supported_sizes();
  c.profile = app.profile;
  c.mode = app.gateway.mode;
  c.concurrency = app.gateway.concurrency;
  c.fallback = app.gateway.fallback;
  c.image = app.image;
  c.probe_interval_s = app.gateway.probe_interval_s;
  return c;
}

json Telemetry::to_json() const {
  json j = {{"mode", mode},
            {"chosen_r_continuous", chosen_r_continuous ? json(*chosen_r_continuous) : json(nullptr)},
            {"chosen_r_rounded", chosen_r_rounded},
            {"probabilities", probabilities},
            {"dims_native", dims_json(dims_native)},
            {"dims_sent", dims_json(dims_sent)},
            {"text_tokens_est", text_tokens_est},
            {"visual_tokens_est", visual_tokens_est},
            {"flops_est", flops_est},
            {"flops_native_est", flops_native_est},
            {"savings_pct", savings_pct},
            {"degraded", degraded},
            {"latency_ms",
             {{"feature", latency.feature_ms},
              {"select", latency.select_ms},
              {"resize", latency.resize_ms},
              {"vlm", latency.vlm_ms}}}};
  if (degraded) j["degraded_reason"] = degraded_reason;
  return j;
}

std::string Health::status() const {
  if (feature_ok && vlm_ok) return "ok";
  std::string out = "degraded:";
  if (!feature_ok) out += "feature_endpoint";
  if (!vlm_ok) out += std::string(feature_ok ? "" : ",") + "target_vlm";
  return out;
}

Gateway::Gateway(GatewayConfig config, selector::ClassifierHead head, std::shared_ptr<vlm::VlmClient> vlm,
                 std::shared_ptr<features::FeatureClient> features)
    : config_(std::move(config)), vlm_(std::move(vlm)), features_(std::move(features)) {
  if (!vlm_) throw ConfigError("gateway needs a target VLM client");
  if (config_.supported_sizes.empty()) throw ConfigError("gateway: supported sizes must not be empty");
  if (config_.supported_sizes.back() < config_.menu.back())
    throw ConfigError("gateway: supported sizes must reach the largest menu entry");
  if (config_.mode.kind == Mode::Kind::kFixed &&
      std::find(config_.supported_sizes.begin(), config_.supported_sizes.end(),
                config_.mode.fixed_resolution) == config_.supported_sizes.end())
    throw ConfigError("gateway.mode: fixed resolution must be one of the supported sizes");
  config_.profile.validate();
  reload_head(std::move(head));
}

Gateway::~Gateway() { stop(); }

void Gateway::reload_head(selector::ClassifierHead head) {
  if (!head.menu().same_classes(config_.menu))
    throw ConfigError("head menu does not match the configured menu");
  auto snapshot = std::make_shared<const selector::ClassifierHead>(std::move(head));
  std::lock_guard lock(head_mutex_);
  head_ = std::move(snapshot);
}

std::shared_ptr<const selector::ClassifierHead> Gateway::head() const {
  std::lock_guard lock(head_mutex_);
  return head_;
}

Routed Gateway::route(const std::string& image_bytes, const std::string& query, const Mode& mode) {
  if (query.empty()) throw InvalidArgument("query must not be empty");
  Routed out;
  Telemetry& t = out.telemetry;
  t.mode = mode.to_string();
  const imageops::Raster image = imageops::decode(image_bytes);
  t.dims_native = image.dims();
  const auto& supported = config_.supported_sizes;

  int r_target = 0;
  switch (mode.kind) {
    case Mode::Kind::kPassthrough:
      r_target = t.dims_native.long_side();
      break;
    case Mode::Kind::kFixed:
      r_target = mode.fixed_resolution;
      break;
    case Mode::Kind::kContinuous:
    case Mode::Kind::kDiscrete: {
      const auto snapshot = head();
      try {
        if (!features_) throw FeatureServiceUnavailable("no feature endpoint configured");
        auto start = Clock::now();
        const auto low_dims = imageops::target_dims(t.dims_native, config_.menu.front());
        const std::string low = imageops::encode_jpeg(imageops::resize(image, low_dims, config_.image.filter),
                                                      config_.image.jpeg_quality);
        const auto z = features_->features(low, query);
        t.latency.feature_ms = ms_since(start);
        if (z.size() != snapshot->dim())
          throw FeatureServiceUnavailable("feature dimension " + std::to_string(z.size()) +
                                          " does not match head dimension " + std::to_string(snapshot->dim()));
        start = Clock::now();
        if (mode.kind == Mode::Kind::kContinuous) {
          auto sel = selector::select_continuous(*snapshot, z, supported);
          t.chosen_r_continuous = sel.r_continuous;
          t.probabilities = std::move(sel.probabilities);
          r_target = sel.r_rounded;
        } else {
          const auto label = selector::select_discrete(*snapshot, z);
          t.probabilities = selector::softmax(snapshot->logits(z));
          r_target = selector::round_to_supported(label.resolution, supported);
        }
        t.latency.select_ms = ms_since(start);
      } catch (const FeatureServiceUnavailable& e) {
        if (config_.fallback == Fallback::kFail) throw;
        t.degraded = true;
        t.degraded_reason = e.what();
        r_target = selector::round_to_supported(config_.menu.range_max(), supported);
        log::warn("feature_fallback", {{"reason", e.what()}, {"r", r_target}});
      }
      break;
    }
  }
  t.chosen_r_rounded = r_target;

  const auto start = Clock::now();
  t.dims_sent = imageops::target_dims(t.dims_native, r_target);
  out.payload = t.dims_sent == t.dims_native
                    ? image_bytes
                    : imageops::encode_jpeg(imageops::resize(image, t.dims_sent, config_.image.filter),
                                            config_.image.jpeg_quality);
  t.latency.resize_ms = ms_since(start);

  const auto& profile = config_.profile;
  t.text_tokens_est = cost::estimate_text_tokens(query);
  t.visual_tokens_est = cost::visual_tokens(profile.scheme, t.dims_sent);
  t.flops_est = cost::prefill_flops(t.visual_tokens_est, t.text_tokens_est, profile.parameter_count);
  t.flops_native_est = cost::prefill_flops(cost::visual_tokens(profile.scheme, t.dims_native),
                                           t.text_tokens_est, profile.parameter_count);
  t.savings_pct = cost::relative_savings(t.flops_native_est, t.flops_est);
  return out;
}

RouteResult Gateway::handle_query(const RouteRequest& request) {
  Routed routed = route(request.image_bytes, request.query, request.mode.value_or(config_.mode));
  vlm::VlmRequest vr;
  vr.image_bytes = std::move(routed.payload);
  vr.query = request.query;
  vr.sample_id = request.sample_id;
  const auto start = Clock::now();
  auto response = vlm_->chat(vr);
  routed.telemetry.latency.vlm_ms = ms_since(start);
  return {std::move(response.answer), std::move(routed.telemetry)};
}

Health Gateway::healthz() const { return {feature_ok_.load(), vlm_ok_.load()}; }

void Gateway::probe_once() {
  feature_ok_ = features_ ? features_->probe() : false;
  vlm_ok_ = vlm_->probe();
}

void Gateway::run_probe_loop() {
  std::unique_lock lock(probe_mutex_);
  while (!stopping_) {
    lock.unlock();
    probe_once();
    lock.lock();
    probe_cv_.wait_for(lock, std::chrono::duration<double>(config_.probe_interval_s),
                       [this] { return stopping_; });
  }
}

void Gateway::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  const std::size_t threads = config_.concurrency;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const auto h = healthz();
    res.set_content(json{{"status", h.status()}}.dump(), "application/json");
  });

  auto guarded = [](httplib::Response& res, auto&& body) {
    try {
      body();
    } catch (const FeatureServiceUnavailable& e) {
      send_error(res, 503, e.code(), "feature", e.what());
    } catch (const VlmError& e) {
      send_error(res, 502, e.code(), "target_vlm", e.what());
    } catch (const UnknownSample& e) {
      send_error(res, 502, e.code(), "target_vlm", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.code(), "request", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "BadJson", "request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", "gateway", e.what());
    }
  };

  server_->Post("/v1/route", [this, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      RouteRequest r;
      if (body.contains("image_b64")) {
        try {
          r.image_bytes = codec::base64_decode(body["image_b64"].get<std::string>());
        } catch (const InvalidArgument& e) {
          throw DecodeError(std::string("image_b64: ") + e.what());
        }
      } else if (body.contains("image_url")) {
        r.image_bytes = fetch_image(body["image_url"].get<std::string>());
      } else {
        throw InvalidArgument("request needs image_b64 or image_url");
      }
      r.query = body.value("query", std::string{});
      if (body.contains("mode")) r.mode = Mode::parse(body["mode"].get<std::string>());
      r.sample_id = body.value("sample_id", std::string{});
      const auto result = handle_query(r);
      res.set_content(json{{"answer", result.answer}, {"telemetry", result.telemetry.to_json()}}.dump(),
                      "application/json");
    });
  });

  server_->Post("/v1/chat/completions", [this, guarded](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body = json::parse(req.body);
      const Mode mode = req.has_header("X-Ressel-Mode") ? Mode::parse(req.get_header_value("X-Ressel-Mode"))
                                                        : config_.mode;
      auto& messages = body.at("messages");
      json* user = nullptr;
      for (auto& m : messages)
        if (m.value("role", "") == "user" && m.contains("content") && m["content"].is_array()) user = &m;
      json telemetry = json::array();
      std::string first_payload;
      std::string query;
      if (user) {
        for (const auto& part : (*user)["content"])
          if (part.value("type", "") == "text") query += (query.empty() ? "" : " ") + part.value("text", "");
        for (auto& part : (*user)["content"]) {
          if (part.value("type", "") != "image_url") continue;
          auto& url = part.at("image_url").at("url");
          Routed routed = route(fetch_image(url.get<std::string>()), query, mode);
          url = "data:" + std::string(vlm::sniff_mime(routed.payload)) + ";base64," +
                codec::base64_encode(routed.payload);
          telemetry.push_back(routed.telemetry.to_json());
          if (first_payload.empty()) first_payload = std::move(routed.payload);
        }
      }
      json response;
      if (auto* http = dynamic_cast<vlm::HttpVlmClient*>(vlm_.get())) {
        if (!http->endpoint().model.empty()) body["model"] = http->endpoint().model;
        response = http->forward(body);
      } else {
        if (first_payload.empty()) throw InvalidArgument("request carries no image");
        vlm::VlmRequest vr;
        vr.image_bytes = first_payload;
        vr.query = query;
        vr.sample_id = req.get_header_value("X-Ressel-Sample-Id");
        const auto answer = vlm_->chat(vr);
        response = {{"object", "chat.completion"},
                    {"model", body.value("model", "")},
                    {"choices", json::array({{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", answer.answer}}},
                                              {"finish_reason", "stop"}}})}};
      }
      res.set_header("X-Ressel-Telemetry", telemetry.dump());
      res.set_content(response.dump(), "application/json");
    });
  });
}

int Gateway::start() {
  // Advisory only: requests still check each vector against the head.
  if (features_) {
    try {
      const auto hs = features_->handshake();
      if (hs.dim != head()->dim())
        log::warn("feature_dim_mismatch", {{"adapter_dim", hs.dim}, {"head_dim", head()->dim()}});
    } catch (const FeatureServiceUnavailable& e) {
      log::warn("feature_handshake_failed", {{"reason", e.what()}});
    }
  }
  install_routes();
  if (config_.port == 0) {
    bound_port_ = server_->bind_to_any_port(config_.host);
  } else {
    bound_port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (bound_port_ < 0) throw RuntimeFailure("BindError", "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  {
    std::lock_guard lock(probe_mutex_);
    stopping_ = false;
  }
  probe_thread_ = std::thread([this] { run_probe_loop(); });
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("gateway_listening", {{"host", config_.host}, {"port", bound_port_}, {"mode", config_.mode.to_string()}});
  return bound_port_;
}

void Gateway::serve_forever() {
  start();
  if (server_thread_.joinable()) server_thread_.join();
}

void Gateway::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  {
    std::lock_guard lock(probe_mutex_);
    stopping_ = true;
  }
  probe_cv_.notify_all();
  if (probe_thread_.joinable()) probe_thread_.join();
}

}  // namespace ressel::gateway
