// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ressel::vlm {

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 128;
};

struct VlmRequest {
  std::string image_bytes;  // encoded JPEG or PNG
  std::string query;
  /// Unset means "use the endpoint's defaults".
  std::optional<DecodeParams> decode;
  /// Dataset identity of the sample; only simulators look at it.
  std::string sample_id;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct VlmResponse {
  std::string answer;
  std::optional<Usage> usage;
  double latency_ms = 0.0;
  int attempts = 1;
};

/// One transport to a downstream VLM. Implementations are shareable across
/// threads.
class VlmClient {
 public:
  virtual ~VlmClient() = default;
  /// Throws VlmError (HTTP) or UnknownSample (simulator).
  virtual VlmResponse chat(const VlmRequest& request) = 0;
  /// Reachability check used by health probes.
  virtual bool probe() { return true; }
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{1000};
  double multiplier = 2.0;
};

/// OpenAI-compatible endpoint. `base_url` is everything before
/// "/chat/completions", e.g. "http://127.0.0.1:8000/v1".
struct VlmEndpoint {
  std::string base_url;
  std::string model;
  /// Name of the environment variable holding the bearer token; empty = none.
  std::string api_key_env;
  double timeout_s = 120.0;
  RetryPolicy retry;
  DecodeParams decode;
  int max_connections = 16;
};

VlmEndpoint endpoint_from_json(const nlohmann::json& j);

/// Splits "http://host:port/prefix" into origin and path prefix.
struct ParsedUrl {
  std::string origin;
  std::string path;
};
ParsedUrl parse_url(const std::string& url);

class HttpVlmClient : public VlmClient {
 public:
  explicit HttpVlmClient(VlmEndpoint endpoint);

  VlmResponse chat(const VlmRequest& request) override;

  /// Posts an already-built chat-completions body with the retry policy.
  /// Returns the parsed response document.
  nlohmann::json forward(const nlohmann::json& body, int* attempts_out = nullptr);

  /// True when the endpoint answers `GET {base_url}/models` with a non-5xx status.
  bool probe() override;

  const VlmEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  nlohmann::json post_once(const std::string& body);

  VlmEndpoint endpoint_;
  ParsedUrl url_;
  std::string token_;
  std::counting_semaphore<1024> slots_;
};

/// The OpenAI message body for one image + query, image inlined as a data URL.
nlohmann::json build_chat_body(const std::string& model, const VlmRequest& request);

/// First text answer of a chat-completions response. Throws VlmError::Protocol.
std::string extract_answer(const nlohmann::json& response);

std::string_view sniff_mime(std::string_view image_bytes);

}  // namespace ressel::vlm
