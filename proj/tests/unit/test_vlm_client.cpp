// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>

#include <nlohmann/json.hpp>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"
#include "ressel/vlm_client.hpp"
#include "test_support.hpp"

using namespace ressel;
using nlohmann::json;

namespace {

vlm::VlmEndpoint endpoint_for(const testing::StubServer& stub) {
  vlm::VlmEndpoint e;
  e.base_url = stub.origin() + "/v1";
  e.model = "stub-model";
  e.timeout_s = 2.0;
  e.retry.base_delay = std::chrono::milliseconds(5);
  return e;
}

std::string completion(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
              {"usage", {{"prompt_tokens", 321}, {"completion_tokens", 4}}}}
      .dump();
}

vlm::VlmRequest request_of(const std::string& image) {
  vlm::VlmRequest r;
  r.image_bytes = image;
  r.query = "What is the date?";
  return r;
}

}  // namespace

TEST_CASE("chat body carries the image as a data url and decode params") {
  const auto png = testing::png_of(40, 30);
  auto req = request_of(png);
  req.decode = vlm::DecodeParams{0.0, 64};
  const auto body = vlm::build_chat_body("m", req);
  CHECK(body["model"] == "m");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["max_tokens"] == 64);
  const auto& content = body["messages"][0]["content"];
  const auto url = content[0]["image_url"]["url"].get<std::string>();
  CHECK(url.rfind("data:image/png;base64,", 0) == 0);
  CHECK(codec::base64_decode(url.substr(url.find(',') + 1)) == png);
  CHECK(content[1]["text"] == "What is the date?");
  CHECK(vlm::sniff_mime(testing::jpeg_of(8, 8)) == "image/jpeg");
}

TEST_CASE("answer extraction") {
  CHECK(vlm::extract_answer(json::parse(completion("Jan 5"))) == "Jan 5");
  const auto parts = json::parse(R"({"choices":[{"message":{"content":[{"type":"text","text":"x"}]}}]})");
  CHECK(vlm::extract_answer(parts) == "x");
  try {
    vlm::extract_answer(json::parse(R"({"choices":[]})"));
    FAIL("expected protocol error");
  } catch (const VlmError& e) {
    CHECK(e.kind() == VlmError::Kind::Protocol);
  }
}

TEST_CASE("url parsing") {
  const auto u = vlm::parse_url("http://127.0.0.1:8000/v1");
  CHECK(u.origin == "http://127.0.0.1:8000");
  CHECK(u.path == "/v1");
  CHECK(vlm::parse_url("https://example.com").path == "");
  CHECK_THROWS(vlm::parse_url("not a url"));
}

TEST_CASE("successful call reports answer, usage and attempts") {
  testing::StubServer stub;
  json seen;
  std::string auth;
  std::mutex m;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(m);
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion("INV-1"), "application/json");
  });
  stub.server().Get("/v1/models", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[]})", "application/json");
  });
  stub.start();

  ::setenv("RESSEL_TEST_VLM_KEY", "sekrit", 1);
  auto e = endpoint_for(stub);
  e.api_key_env = "RESSEL_TEST_VLM_KEY";
  vlm::HttpVlmClient client(e);
  const auto resp = client.chat(request_of(testing::jpeg_of(64, 48)));
  CHECK(resp.answer == "INV-1");
  REQUIRE(resp.usage.has_value());
  CHECK(resp.usage->prompt_tokens == 321);
  CHECK(resp.attempts == 1);
  CHECK(auth == "Bearer sekrit");
  CHECK(seen["model"] == "stub-model");
  CHECK(seen["temperature"] == 0.0);
  CHECK(seen["messages"][0]["role"] == "user");
  CHECK(client.probe());
}

TEST_CASE("transient failures are retried with backoff") {
  testing::StubServer stub;
  std::atomic<int> calls{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  stub.start();
  vlm::HttpVlmClient client(endpoint_for(stub));
  const auto resp = client.chat(request_of(testing::jpeg_of(16, 16)));
  CHECK(resp.answer == "ok");
  CHECK(resp.attempts == 3);
  CHECK(calls == 3);

  calls = -10;
  try {
    client.chat(request_of(testing::jpeg_of(16, 16)));
    FAIL("expected exhaustion");
  } catch (const VlmError& e) {
    CHECK(e.kind() == VlmError::Kind::Transport);
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("auth rejection is not retried") {
  testing::StubServer stub;
  std::atomic<int> calls{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  stub.start();
  vlm::HttpVlmClient client(endpoint_for(stub));
  try {
    client.chat(request_of(testing::jpeg_of(16, 16)));
    FAIL("expected auth error");
  } catch (const VlmError& e) {
    CHECK(e.kind() == VlmError::Kind::AuthRejected);
    CHECK(e.exit_code() == 2);
  }
  CHECK(calls == 1);
}

TEST_CASE("slow endpoints time out") {
  testing::StubServer stub;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content(completion("late"), "application/json");
  });
  stub.start();
  auto e = endpoint_for(stub);
  e.timeout_s = 0.2;
  e.retry.max_attempts = 1;
  vlm::HttpVlmClient client(e);
  try {
    client.chat(request_of(testing::jpeg_of(16, 16)));
    FAIL("expected timeout");
  } catch (const VlmError& e2) {
    CHECK(e2.kind() == VlmError::Kind::Timeout);
  }
}

TEST_CASE("unreachable endpoint") {
  vlm::VlmEndpoint e;
  e.base_url = "http://127.0.0.1:" + std::to_string(testing::closed_port()) + "/v1";
  e.retry.max_attempts = 2;
  e.retry.base_delay = std::chrono::milliseconds(1);
  e.timeout_s = 1.0;
  vlm::HttpVlmClient client(e);
  CHECK_THROWS_AS(client.chat(request_of(testing::jpeg_of(16, 16))), VlmError);
  CHECK_FALSE(client.probe());
}

TEST_CASE("endpoint configuration") {
  const auto e = vlm::endpoint_from_json(json::parse(
      R"({"base_url":"http://h:1/v1","model":"m","max_retries":5,"backoff_base_s":0.5,"temperature":0.2})"));
  CHECK(e.retry.max_attempts == 5);
  CHECK(e.retry.base_delay == std::chrono::milliseconds(500));
  CHECK(e.decode.temperature == doctest::Approx(0.2));
  CHECK_THROWS_AS(vlm::endpoint_from_json(json::parse(R"({"model":"m"})")), ConfigError);
  CHECK_THROWS_AS(vlm::endpoint_from_json(json::parse(R"({"base_url":"http://h:1","max_retries":0})")), ConfigError);
}
