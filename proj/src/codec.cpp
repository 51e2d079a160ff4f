// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/codec.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "ressel/error.hpp"

namespace ressel::codec {

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
  if (clean.size() % 4 != 0) throw InvalidArgument("base64 length must be a multiple of 4");
  std::string out(3 * (clean.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw InvalidArgument("malformed base64");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

namespace {

template <typename Float, typename Bits>
std::string pack(std::span<const double> values) {
  std::string out(values.size() * sizeof(Bits), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<Bits>(static_cast<Float>(values[i]));
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      out[i * sizeof(Bits) + b] = static_cast<char>(bits & 0xFF);
      bits >>= 8;
    }
  }
  return out;
}

template <typename Float, typename Bits>
std::vector<double> unpack(std::string_view bytes) {
  if (bytes.size() % sizeof(Bits) != 0)
    throw InvalidArgument("packed float payload has a partial element");
  std::vector<double> out(bytes.size() / sizeof(Bits));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Bits bits = 0;
    for (std::size_t b = sizeof(Bits); b-- > 0;)
      bits = (bits << 8) | static_cast<unsigned char>(bytes[i * sizeof(Bits) + b]);
    out[i] = static_cast<double>(std::bit_cast<Float>(bits));
  }
  return out;
}

}  // namespace

std::string pack_f32_le(std::span<const double> values) { return pack<float, std::uint32_t>(values); }
std::vector<double> unpack_f32_le(std::string_view bytes) { return unpack<float, std::uint32_t>(bytes); }
std::string pack_f64_le(std::span<const double> values) { return pack<double, std::uint64_t>(values); }
std::vector<double> unpack_f64_le(std::string_view bytes) { return unpack<double, std::uint64_t>(bytes); }

}  // namespace ressel::codec
