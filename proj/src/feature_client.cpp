// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "ressel/feature_client.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"

namespace ressel::features {

using nlohmann::json;

namespace {

httplib::Client make_client(const vlm::ParsedUrl& url, double timeout_s) {
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  return client;
}

json checked_json(const httplib::Result& res, const std::string& what) {
  if (!res) throw FeatureServiceUnavailable(what + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw FeatureServiceUnavailable(what + ": HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw FeatureServiceUnavailable(what + ": body is not JSON");
  }
}

}  // namespace

json Handshake::to_json() const {
  return {{"backbone", backbone}, {"layer", layer}, {"dim", dim}, {"max_side", max_side}};
}

FeatureEndpoint endpoint_from_json(const json& j) {
  try {
    FeatureEndpoint e;
    e.base_url = j.at("base_url").get<std::string>();
    e.timeout_s = j.value("timeout_s", 10.0);
    if (e.timeout_s <= 0) throw ConfigError("timeout_s must be > 0");
    vlm::parse_url(e.base_url);
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed feature endpoint: ") + ex.what());
  }
}

HttpFeatureClient::HttpFeatureClient(FeatureEndpoint endpoint)
    : endpoint_(std::move(endpoint)), url_(vlm::parse_url(endpoint_.base_url)) {}

std::vector<double> HttpFeatureClient::features(const std::string& image_bytes, const std::string& query) {
  auto client = make_client(url_, endpoint_.timeout_s);
  const json body = {{"image_b64", codec::base64_encode(image_bytes)}, {"query", query}};
  const json doc = checked_json(client.Post(url_.path + "/features", body.dump(), "application/json"),
                                "feature request");
  try {
    auto vector = doc.at("vector").get<std::vector<double>>();
    for (double v : vector)
      if (!std::isfinite(v)) throw FeatureServiceUnavailable("feature vector has non-finite entries");
    if (vector.empty()) throw FeatureServiceUnavailable("feature vector is empty");
    return vector;
  } catch (const json::exception& e) {
    throw FeatureServiceUnavailable(std::string("feature response: ") + e.what());
  }
}

Handshake HttpFeatureClient::handshake() {
  auto client = make_client(url_, endpoint_.timeout_s);
  const json doc = checked_json(client.Get(url_.path + "/handshake"), "handshake");
  try {
    return {doc.value("backbone", std::string{}), doc.value("layer", 0), doc.at("dim").get<std::size_t>(),
            doc.value("max_side", 0)};
  } catch (const json::exception& e) {
    throw FeatureServiceUnavailable(std::string("handshake response: ") + e.what());
  }
}

bool HttpFeatureClient::probe() {
  auto client = make_client(url_, std::min(endpoint_.timeout_s, 2.0));
  auto res = client.Get(url_.path + "/healthz");
  return res && res->status == 200;
}

}  // namespace ressel::features
