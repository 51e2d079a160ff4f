// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ressel/error.hpp"

namespace ressel::imageops {

void validate(const ImageDims& dims) {
  if (dims.width < 1 || dims.height < 1)
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(dims.width) +
                          "x" + std::to_string(dims.height));
}

ImageDims target_dims(const ImageDims& native, int r) {
  validate(native);
  if (r < 1) throw InvalidArgument("target resolution must be >= 1");
  const int longest = native.long_side();
  if (longest <= r) return native;
  const double scale = static_cast<double>(r) / static_cast<double>(longest);
  auto scale_short = [&](int side) {
    // std::lround rounds half away from zero.
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(side) * scale)));
  };
  if (native.width >= native.height) return {r, scale_short(native.height)};
  return {scale_short(native.width), r};
}

Filter parse_filter(std::string_view name) {
  if (name == "bilinear") return Filter::kBilinear;
  if (name == "bicubic") return Filter::kBicubic;
  if (name == "lanczos") return Filter::kLanczos;
  throw InvalidArgument("unknown resampling filter '" + std::string(name) + "'");
}

std::string_view to_string(Filter filter) {
  switch (filter) {
    case Filter::kBilinear: return "bilinear";
    case Filter::kBicubic: return "bicubic";
    case Filter::kLanczos: return "lanczos";
  }
  return "bicubic";
}

Raster::Raster(cv::Mat pixels) : pixels_(std::move(pixels)) {
  if (!pixels_.empty() && pixels_.type() != CV_8UC3)
    throw InvalidArgument("rasters must be 8-bit, 3-channel");
}

Raster decode(std::string_view bytes) {
  if (bytes.empty()) throw DecodeError("empty image payload");
  const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                       const_cast<char*>(bytes.data()));
  cv::Mat pixels;
  try {
    pixels = cv::imdecode(buffer, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DecodeError(std::string("image decode failed: ") + e.what());
  }
  if (pixels.empty()) throw DecodeError("image bytes are not a decodable PNG or JPEG");
  return Raster(std::move(pixels));
}

namespace {

unsigned be16(std::string_view b, std::size_t at) {
  return (static_cast<unsigned char>(b[at]) << 8) | static_cast<unsigned char>(b[at + 1]);
}

std::uint32_t be32(std::string_view b, std::size_t at) {
  return (std::uint32_t{be16(b, at)} << 16) | be16(b, at + 2);
}

ImageDims png_dims(std::string_view b) {
  // Signature (8) + IHDR length (4) + "IHDR" (4) + width (4) + height (4).
  if (b.size() < 24 || b.substr(12, 4) != "IHDR") throw DecodeError("truncated PNG header");
  const auto w = be32(b, 16);
  const auto h = be32(b, 20);
  if (w == 0 || h == 0 || w > 1u << 30 || h > 1u << 30) throw DecodeError("invalid PNG dimensions");
  return {static_cast<int>(w), static_cast<int>(h)};
}

ImageDims jpeg_dims(std::string_view b) {
  std::size_t i = 2;
  while (i + 4 <= b.size()) {
    if (static_cast<unsigned char>(b[i]) != 0xFF) throw DecodeError("corrupt JPEG marker stream");
    const auto marker = static_cast<unsigned char>(b[i + 1]);
    if (marker == 0xFF) {
      ++i;
      continue;
    }
    if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
      i += 2;
      continue;
    }
    const std::size_t length = be16(b, i + 2);
    if (length < 2) throw DecodeError("corrupt JPEG segment length");
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                     marker != 0xCC;
    if (sof) {
      if (i + 9 > b.size()) break;
      const int h = static_cast<int>(be16(b, i + 5));
      const int w = static_cast<int>(be16(b, i + 7));
      if (w == 0 || h == 0) throw DecodeError("invalid JPEG dimensions");
      return {w, h};
    }
    i += 2 + length;
  }
  throw DecodeError("JPEG frame header not found");
}

}  // namespace

ImageDims probe_dims(std::string_view bytes) {
  static constexpr std::string_view kPng = "\x89PNG\r\n\x1a\n";
  if (bytes.size() >= 8 && bytes.substr(0, 8) == kPng) return png_dims(bytes);
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8)
    return jpeg_dims(bytes);
  throw DecodeError("unrecognized image format (expected PNG or JPEG)");
}

namespace {

std::string encode(const Raster& image, const std::string& ext, const std::vector<int>& params) {
  if (image.empty()) throw InvalidArgument("cannot encode an empty raster");
  std::vector<uchar> out;
  if (!cv::imencode(ext, image.pixels(), out, params)) throw DecodeError("image encode failed");
  return std::string(out.begin(), out.end());
}

}  // namespace

std::string encode_jpeg(const Raster& image, int quality) {
  if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must be in [1, 100]");
  return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

std::string encode_png(const Raster& image) { return encode(image, ".png", {}); }

Raster resize(const Raster& image, const ImageDims& dims, Filter filter) {
  validate(dims);
  if (image.empty()) throw InvalidArgument("cannot resize an empty raster");
  if (image.dims() == dims) return Raster(image.pixels().clone());
  int interpolation = cv::INTER_CUBIC;
  if (filter == Filter::kBilinear) interpolation = cv::INTER_LINEAR;
  if (filter == Filter::kLanczos) interpolation = cv::INTER_LANCZOS4;
  cv::Mat out;
  cv::resize(image.pixels(), out, cv::Size(dims.width, dims.height), 0, 0, interpolation);
  return Raster(std::move(out));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Raster synthetic_page(const ImageDims& dims, std::uint64_t seed) {
  validate(dims);
  cv::Mat page(dims.height, dims.width, CV_8UC3, cv::Scalar(255, 255, 255));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shade(0, 90);
  const int margin = std::max(1, dims.width / 16);
  const int line_h = std::max(2, dims.height / 48);
  for (int y = margin; y + line_h < dims.height - margin; y += 2 * line_h) {
    int x = margin;
    std::uniform_int_distribution<int> word(line_h, std::max(line_h + 1, 6 * line_h));
    while (x < dims.width - margin) {
      const int w = std::min(word(rng), dims.width - margin - x);
      const int g = shade(rng);
      cv::rectangle(page, cv::Rect(x, y, w, line_h), cv::Scalar(g, g, g), cv::FILLED);
      x += w + line_h;
    }
  }
  return Raster(std::move(page));
}

RenderCache::RenderCache(RenderOptions options, std::size_t max_entries)
    : options_(options), max_entries_(std::max<std::size_t>(1, max_entries)) {}

Raster RenderCache::source(const std::string& image_ref) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = sources_.find(image_ref); it != sources_.end()) return it->second;
  }
  std::filesystem::path path(image_ref);
  if (path.is_relative() && !options_.base_dir.empty()) path = options_.base_dir / path;
  Raster decoded = decode(read_file(path));
  std::lock_guard lock(mutex_);
  if (sources_.size() >= max_entries_) sources_.clear();
  return sources_.emplace(image_ref, std::move(decoded)).first->second;
}

ImageDims RenderCache::native_dims(const std::string& image_ref) { return source(image_ref).dims(); }

std::string RenderCache::render(const std::string& image_ref, int r) {
  const Raster src = source(image_ref);
  const ImageDims dims = r > 0 ? target_dims(src.dims(), r) : src.dims();
  const std::string key =
      image_ref + '@' + std::to_string(dims.width) + 'x' + std::to_string(dims.height);
  {
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->bytes;
    }
  }
  std::string bytes = encode_jpeg(resize(src, dims, options_.filter), options_.jpeg_quality);
  remember(key, bytes);
  return bytes;
}

void RenderCache::remember(const std::string& key, std::string bytes) {
  std::lock_guard lock(mutex_);
  if (index_.contains(key)) return;
  lru_.push_front(Entry{key, std::move(bytes)});
  index_[key] = lru_.begin();
  while (lru_.size() > max_entries_) {
    index_.erase(lru_.back().key);
    lru_.pop_back();
  }
}

}  // namespace ressel::imageops
