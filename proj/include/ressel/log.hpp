// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace ressel::log {

/// Routes library logs to stderr as one JSON object per line.
/// Levels: trace, debug, info, warn, error, off.
void init(std::string_view level = "info");

void info(std::string_view event, const nlohmann::json& fields = nlohmann::json::object());
void warn(std::string_view event, const nlohmann::json& fields = nlohmann::json::object());
void error(std::string_view event, const nlohmann::json& fields = nlohmann::json::object());
void debug(std::string_view event, const nlohmann::json& fields = nlohmann::json::object());

}  // namespace ressel::log
