// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "ressel/vlm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"
#include "ressel/log.hpp"

namespace ressel::vlm {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SlotGuard {
  explicit SlotGuard(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
  std::counting_semaphore<1024>& sem;
};

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url, double timeout_s) {
  auto client = std::make_unique<httplib::Client>(url.origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client->set_connection_timeout(secs, usecs);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  return client;
}

}  // namespace

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL '" + url + "' lacks a scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("URL '" + url + "' must use http or https");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl parsed;
  parsed.origin = url.substr(0, path_start);
  parsed.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!parsed.path.empty() && parsed.path.back() == '/') parsed.path.pop_back();
  return parsed;
}

VlmEndpoint endpoint_from_json(const json& j) {
  try {
    VlmEndpoint e;
    e.base_url = j.at("base_url").get<std::string>();
    e.model = j.value("model", std::string{});
    e.api_key_env = j.value("api_key_env", std::string{});
    e.timeout_s = j.value("timeout_s", 120.0);
    e.retry.max_attempts = j.value("max_retries", 3);
    e.retry.base_delay = std::chrono::milliseconds(
        static_cast<std::int64_t>(1000.0 * j.value("backoff_base_s", 1.0)));
    e.decode.temperature = j.value("temperature", 0.0);
    e.decode.max_tokens = j.value("max_tokens", 128);
    e.max_connections = j.value("max_connections", 16);
    if (e.retry.max_attempts < 1) throw ConfigError("max_retries must be >= 1");
    if (e.timeout_s <= 0) throw ConfigError("timeout_s must be > 0");
    if (e.max_connections < 1 || e.max_connections > 1024)
      throw ConfigError("max_connections must be in [1, 1024]");
    parse_url(e.base_url);
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed VLM endpoint: ") + ex.what());
  }
}

std::string_view sniff_mime(std::string_view bytes) {
  if (bytes.size() >= 4 && bytes.substr(0, 4) == "\x89PNG") return "image/png";
  return "image/jpeg";
}

json build_chat_body(const std::string& model, const VlmRequest& request) {
  const std::string data_url = "data:" + std::string(sniff_mime(request.image_bytes)) + ";base64," +
                               codec::base64_encode(request.image_bytes);
  json content = json::array({
      {{"type", "image_url"}, {"image_url", {{"url", data_url}}}},
      {{"type", "text"}, {"text", request.query}},
  });
  return {{"model", model},
          {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})},
          {"temperature", request.decode ? request.decode->temperature : 0.0},
          {"max_tokens", request.decode ? request.decode->max_tokens : 128},
          {"stream", false}};
}

std::string extract_answer(const json& response) {
  try {
    const auto& message = response.at("choices").at(0).at("message");
    const auto& content = message.at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      for (const auto& part : content)
        if (part.value("type", "") == "text") return part.at("text").get<std::string>();
    }
  } catch (const json::exception&) {
  }
  throw VlmError(VlmError::Kind::Protocol, "response has no choices[0].message text content");
}

HttpVlmClient::HttpVlmClient(VlmEndpoint endpoint)
    : endpoint_(std::move(endpoint)), url_(parse_url(endpoint_.base_url)),
      slots_(endpoint_.max_connections) {
  if (!endpoint_.api_key_env.empty()) {
    if (const char* token = std::getenv(endpoint_.api_key_env.c_str())) token_ = token;
  }
}

json HttpVlmClient::post_once(const std::string& body) {
  SlotGuard slot(slots_);
  auto client = make_client(url_, endpoint_.timeout_s);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = client->Post(url_.path + "/chat/completions", headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw VlmError(VlmError::Kind::Timeout, "VLM request timed out (" + httplib::to_string(err) + ")");
    throw VlmError(VlmError::Kind::Transport, "VLM transport failure: " + httplib::to_string(err));
  }
  if (res->status == 401 || res->status == 403)
    throw VlmError(VlmError::Kind::AuthRejected, "VLM rejected credentials (HTTP " +
                                                     std::to_string(res->status) + ")");
  if (res->status == 408 || res->status == 429 || res->status >= 500)
    throw VlmError(VlmError::Kind::Transport, "VLM returned HTTP " + std::to_string(res->status));
  if (res->status >= 400)
    throw VlmError(VlmError::Kind::Protocol, "VLM returned HTTP " + std::to_string(res->status) +
                                                 ": " + res->body.substr(0, 200));
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw VlmError(VlmError::Kind::Protocol, "VLM response body is not JSON");
  }
}

json HttpVlmClient::forward(const json& body, int* attempts_out) {
  const std::string payload = body.dump();
  auto delay = endpoint_.retry.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      json out = post_once(payload);
      if (attempts_out) *attempts_out = attempt;
      return out;
    } catch (const VlmError& e) {
      const bool transient =
          e.kind() == VlmError::Kind::Transport || e.kind() == VlmError::Kind::Timeout;
      if (!transient || attempt >= endpoint_.retry.max_attempts) {
        if (attempts_out) *attempts_out = attempt;
        throw VlmError(e.kind(), e.what(), attempt);
      }
      log::warn("vlm_retry", {{"attempt", attempt}, {"error", e.what()},
                              {"delay_ms", delay.count()}});
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) * endpoint_.retry.multiplier));
    }
  }
}

VlmResponse HttpVlmClient::chat(const VlmRequest& request) {
  const auto start = Clock::now();
  VlmRequest effective = request;
  if (!effective.decode) effective.decode = endpoint_.decode;
  VlmResponse out;
  const json response = forward(build_chat_body(endpoint_.model, effective), &out.attempts);
  out.answer = extract_answer(response);
  if (response.contains("usage") && response["usage"].is_object()) {
    const auto& u = response["usage"];
    out.usage = Usage{u.value("prompt_tokens", std::int64_t{0}),
                      u.value("completion_tokens", std::int64_t{0})};
  }
  out.latency_ms = elapsed_ms(start);
  return out;
}

bool HttpVlmClient::probe() {
  auto client = make_client(url_, std::min(endpoint_.timeout_s, 2.0));
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = client->Get(url_.path + "/models", headers);
  return res && res->status < 500;
}

}  // namespace ressel::vlm
