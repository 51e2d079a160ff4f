// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/log.hpp"

#include <mutex>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "ressel/error.hpp"

namespace ressel::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> instance;
  std::call_once(once, [] {
    instance = spdlog::stderr_logger_mt("ressel");
    // The message body is a pre-rendered JSON fragment.
    instance->set_pattern(R"({"ts":"%Y-%m-%dT%H:%M:%S.%e","level":"%l",%v})");
    instance->set_level(spdlog::level::warn);
  });
  return instance;
}

void emit(spdlog::level::level_enum level, std::string_view event, const nlohmann::json& fields) {
  auto sink = logger();
  if (!sink->should_log(level)) return;
  std::string body = "\"event\":" + nlohmann::json(std::string(event)).dump();
  if (fields.is_object()) {
    for (const auto& [key, value] : fields.items())
      body += "," + nlohmann::json(key).dump() + ":" +
              value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  }
  sink->log(level, body);
}

}  // namespace

void init(std::string_view level) {
  const auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off")
    throw InvalidArgument("unknown log level '" + std::string(level) + "'");
  logger()->set_level(parsed);
}

void info(std::string_view event, const nlohmann::json& fields) { emit(spdlog::level::info, event, fields); }
void warn(std::string_view event, const nlohmann::json& fields) { emit(spdlog::level::warn, event, fields); }
void error(std::string_view event, const nlohmann::json& fields) { emit(spdlog::level::err, event, fields); }
void debug(std::string_view event, const nlohmann::json& fields) { emit(spdlog::level::debug, event, fields); }

}  // namespace ressel::log
