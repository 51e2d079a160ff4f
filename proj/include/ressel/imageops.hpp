// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <list>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include <opencv2/core.hpp>

namespace ressel::imageops {

struct ImageDims {
  int width = 1;
  int height = 1;

  int long_side() const noexcept { return width > height ? width : height; }
  bool operator==(const ImageDims&) const = default;
};

/// Throws InvalidArgument unless both sides are >= 1.
void validate(const ImageDims& dims);

/// Dimensions whose longest side equals `r`, preserving aspect ratio. Images
/// already within `r` are returned unchanged; the short side is rounded half
/// away from zero with a floor of one pixel.
ImageDims target_dims(const ImageDims& native, int r);

enum class Filter { kBilinear, kBicubic, kLanczos };

Filter parse_filter(std::string_view name);
std::string_view to_string(Filter filter);

/// Decoded 8-bit BGR raster.
class Raster {
 public:
  Raster() = default;
  explicit Raster(cv::Mat pixels);

  ImageDims dims() const noexcept { return {pixels_.cols, pixels_.rows}; }
  const cv::Mat& pixels() const noexcept { return pixels_; }
  bool empty() const noexcept { return pixels_.empty(); }

 private:
  cv::Mat pixels_;
};

/// Decodes PNG or JPEG bytes. Throws DecodeError.
Raster decode(std::string_view bytes);

/// Reads dimensions from a PNG or JPEG header without decoding pixels.
/// Throws DecodeError on anything else.
ImageDims probe_dims(std::string_view bytes);

std::string encode_jpeg(const Raster& image, int quality = 90);
std::string encode_png(const Raster& image);

/// Resamples to exactly `dims`. Identity when the size already matches.
Raster resize(const Raster& image, const ImageDims& dims, Filter filter = Filter::kBicubic);

std::string read_file(const std::filesystem::path& path);

/// Document-like test page: white background with dark text-line blocks laid
/// out deterministically from `seed`.
Raster synthetic_page(const ImageDims& dims, std::uint64_t seed);

struct RenderOptions {
  Filter filter = Filter::kBicubic;
  int jpeg_quality = 90;
  /// Relative image references are resolved against this directory.
  std::filesystem::path base_dir;
};

/// Loads images by reference and renders resized JPEG payloads, memoizing
/// both decoded sources and rendered variants. Thread-safe.
class RenderCache {
 public:
  explicit RenderCache(RenderOptions options = {}, std::size_t max_entries = 256);

  ImageDims native_dims(const std::string& image_ref);

  /// JPEG bytes of `image_ref` at `target_dims(native, r)`; `r <= 0` means native.
  std::string render(const std::string& image_ref, int r);

  const RenderOptions& options() const noexcept { return options_; }

 private:
  struct Entry {
    std::string key;
    std::string bytes;
  };

  Raster source(const std::string& image_ref);
  void remember(const std::string& key, std::string bytes);

  RenderOptions options_;
  std::size_t max_entries_;
  std::mutex mutex_;
  std::unordered_map<std::string, Raster> sources_;
  std::list<Entry> lru_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

}  // namespace ressel::imageops
