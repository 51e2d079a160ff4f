// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/menu.hpp"

#include <algorithm>
#include <string>

#include <nlohmann/json.hpp>

#include "ressel/error.hpp"

namespace ressel {

namespace {

bool strictly_increasing(const std::vector<int>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return a >= b; }) == v.end();
}

}  // namespace

ResolutionMenu::ResolutionMenu(std::vector<int> entries, int range_min, int range_max,
                               std::optional<std::vector<int>> supported_sizes)
    : entries_(std::move(entries)),
      range_min_(range_min),
      range_max_(range_max),
      supported_(std::move(supported_sizes)) {
  if (entries_.size() < 2) throw MenuError("menu needs at least 2 entries");
  if (entries_.front() <= 0) throw MenuError("menu entries must be positive");
  if (!strictly_increasing(entries_)) throw MenuError("menu entries must be strictly increasing");
  if (range_min_ <= 0 || range_min_ > range_max_)
    throw MenuError("range must satisfy 0 < range_min <= range_max");
  if (range_min_ > entries_.front() || entries_.back() > range_max_)
    throw MenuError("menu entries must lie inside [range_min, range_max]");
  if (supported_) {
    if (supported_->empty()) throw MenuError("supported_sizes must not be empty when declared");
    if (supported_->front() <= 0) throw MenuError("supported_sizes must be positive");
    if (!strictly_increasing(*supported_))
      throw MenuError("supported_sizes must be strictly increasing");
    if (supported_->back() < entries_.back())
      throw MenuError("supported_sizes must contain a value >= the largest menu entry");
  }
}

ResolutionMenu ResolutionMenu::default_menu() { return ResolutionMenu({384, 768, 1024}, 384, 1024); }

ResolutionMenu ResolutionMenu::binary_menu() { return ResolutionMenu({384, 1024}, 384, 1024); }

std::optional<std::size_t> ResolutionMenu::index_of(int resolution) const noexcept {
  const auto it = std::find(entries_.begin(), entries_.end(), resolution);
  if (it == entries_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

bool ResolutionMenu::same_classes(const ResolutionMenu& other) const noexcept {
  return entries_ == other.entries_ && range_min_ == other.range_min_ &&
         range_max_ == other.range_max_;
}

void to_json(nlohmann::json& j, const ResolutionMenu& menu) {
  j = nlohmann::json{{"entries", std::vector<int>(menu.entries().begin(), menu.entries().end())},
                     {"range", {menu.range_min(), menu.range_max()}}};
  if (menu.has_declared_supported_sizes()) {
    const auto s = menu.supported_sizes();
    j["supported_sizes"] = std::vector<int>(s.begin(), s.end());
  }
}

ResolutionMenu menu_from_json(const nlohmann::json& j) {
  try {
    auto entries = j.at("entries").get<std::vector<int>>();
    if (entries.empty()) throw MenuError("menu needs at least 2 entries");
    int lo = entries.front();
    int hi = entries.back();
    if (j.contains("range")) {
      const auto& r = j.at("range");
      if (!r.is_array() || r.size() != 2) throw MenuError("range must be [min, max]");
      lo = r[0].get<int>();
      hi = r[1].get<int>();
    }
    std::optional<std::vector<int>> supported;
    if (j.contains("supported_sizes") && !j.at("supported_sizes").is_null())
      supported = j.at("supported_sizes").get<std::vector<int>>();
    return ResolutionMenu(std::move(entries), lo, hi, std::move(supported));
  } catch (const nlohmann::json::exception& e) {
    throw MenuError(std::string("malformed menu: ") + e.what());
  }
}

}  // namespace ressel
