// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ressel {

/// The valid resolution range, the discrete annotation menu inside it, and the
/// side lengths a deployment is allowed to send. All values are pixels of the
/// longest image side.
///
/// Immutable after construction. Construction validates every invariant and
/// throws MenuError naming the violated rule.
class ResolutionMenu {
 public:
  ResolutionMenu(std::vector<int> entries, int range_min, int range_max,
                 std::optional<std::vector<int>> supported_sizes = std::nullopt);

  /// {384, 768, 1024} over [384, 1024].
  static ResolutionMenu default_menu();
  /// {384, 1024} over [384, 1024].
  static ResolutionMenu binary_menu();

  std::span<const int> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  int entry(std::size_t k) const { return entries_.at(k); }
  int front() const noexcept { return entries_.front(); }
  int back() const noexcept { return entries_.back(); }
  int range_min() const noexcept { return range_min_; }
  int range_max() const noexcept { return range_max_; }

  /// Falls back to the entries when no deployment constraint was declared.
  std::span<const int> supported_sizes() const noexcept {
    return supported_ ? std::span<const int>(*supported_) : std::span<const int>(entries_);
  }
  bool has_declared_supported_sizes() const noexcept { return supported_.has_value(); }

  std::optional<std::size_t> index_of(int resolution) const noexcept;

  /// Same entries and range; supported sizes are deployment detail and ignored.
  bool same_classes(const ResolutionMenu& other) const noexcept;

  bool operator==(const ResolutionMenu&) const = default;

 private:
  std::vector<int> entries_;
  int range_min_;
  int range_max_;
  std::optional<std::vector<int>> supported_;
};

void to_json(nlohmann::json& j, const ResolutionMenu& menu);
/// Reads {"entries": [...], "range": [min, max], "supported_sizes": [...]}. The
/// range defaults to [entries.front, entries.back].
ResolutionMenu menu_from_json(const nlohmann::json& j);

}  // namespace ressel
