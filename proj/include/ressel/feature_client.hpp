// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ressel/vlm_client.hpp"

namespace ressel::features {

/// Identity of the feature adapter service, reported by `GET /handshake`.
struct Handshake {
  std::string backbone;
  int layer = 0;
  std::size_t dim = 0;
  int max_side = 0;

  nlohmann::json to_json() const;
};

struct FeatureEndpoint {
  std::string base_url;
  double timeout_s = 10.0;
};

FeatureEndpoint endpoint_from_json(const nlohmann::json& j);

class FeatureClient {
 public:
  virtual ~FeatureClient() = default;
  /// Throws FeatureServiceUnavailable on transport, status or schema failure.
  virtual std::vector<double> features(const std::string& image_bytes, const std::string& query) = 0;
  virtual Handshake handshake() = 0;
  virtual bool probe() = 0;
};

/// Client for the adapter's `POST /features`, `GET /handshake`, `GET /healthz`.
class HttpFeatureClient : public FeatureClient {
 public:
  explicit HttpFeatureClient(FeatureEndpoint endpoint);

  std::vector<double> features(const std::string& image_bytes, const std::string& query) override;
  Handshake handshake() override;
  bool probe() override;

 private:
  FeatureEndpoint endpoint_;
  vlm::ParsedUrl url_;
};

}  // namespace ressel::features
