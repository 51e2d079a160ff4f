// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ressel::codec {

std::string base64_encode(std::string_view bytes);
/// Throws InvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Little-endian IEEE-754 packing used by the dataset and head files.
std::string pack_f32_le(std::span<const double> values);
std::vector<double> unpack_f32_le(std::string_view bytes);
std::string pack_f64_le(std::span<const double> values);
std::vector<double> unpack_f64_le(std::string_view bytes);

}  // namespace ressel::codec
