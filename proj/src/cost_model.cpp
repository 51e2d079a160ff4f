// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ressel/error.hpp"

namespace ressel::cost {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Multiples of the token cell inside (lo, hi), plus the given anchors.
std::vector<int> patch_aligned_sizes(int cell, int lo, int hi, std::vector<int> anchors) {
  std::vector<int> sizes = std::move(anchors);
  for (int s = (lo / cell + 1) * cell; s < hi; s += cell) sizes.push_back(s);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

}  // namespace

CostScheme CostScheme::patch_grid(int patch_size, int merge_factor) {
  CostScheme s;
  s.kind = Kind::kPatchGrid;
  s.patch_size = patch_size;
  s.merge_factor = merge_factor;
  s.validate();
  return s;
}

CostScheme CostScheme::tiled(int tile_size, int tokens_per_tile, int base_tokens) {
  CostScheme s;
  s.kind = Kind::kTiled;
  s.tile_size = tile_size;
  s.tokens_per_tile = tokens_per_tile;
  s.base_tokens = base_tokens;
  s.validate();
  return s;
}

CostScheme CostScheme::fixed(int tokens) {
  CostScheme s;
  s.kind = Kind::kFixed;
  s.fixed_tokens = tokens;
  s.validate();
  return s;
}

void CostScheme::validate() const {
  switch (kind) {
    case Kind::kPatchGrid:
      if (patch_size <= 0 || merge_factor <= 0)
        throw ConfigError("patch_grid scheme needs positive patch_size and merge_factor");
      break;
    case Kind::kTiled:
      if (tile_size <= 0 || tokens_per_tile <= 0 || base_tokens < 0)
        throw ConfigError("tiled scheme needs positive tile_size, tokens_per_tile and base_tokens >= 0");
      break;
    case Kind::kFixed:
      if (fixed_tokens <= 0) throw ConfigError("fixed scheme needs positive fixed_tokens");
      break;
  }
}

void ModelProfile::validate() const {
  if (parameter_count <= 0) throw ConfigError("profile '" + name + "': parameter_count must be > 0");
  scheme.validate();
  if (!std::is_sorted(supported_sizes.begin(), supported_sizes.end()) ||
      std::adjacent_find(supported_sizes.begin(), supported_sizes.end()) != supported_sizes.end())
    throw ConfigError("profile '" + name + "': supported_sizes must be strictly increasing");
  if (!supported_sizes.empty() && supported_sizes.front() <= 0)
    throw ConfigError("profile '" + name + "': supported_sizes must be positive");
}

std::int64_t visual_tokens(const CostScheme& scheme, const ImageDims& dims) {
  imageops::validate(dims);
  switch (scheme.kind) {
    case CostScheme::Kind::kPatchGrid: {
      const std::int64_t cell = std::int64_t{scheme.patch_size} * scheme.merge_factor;
      return ceil_div(dims.width, cell) * ceil_div(dims.height, cell);
    }
    case CostScheme::Kind::kTiled:
      return scheme.base_tokens + ceil_div(dims.width, scheme.tile_size) *
                                      ceil_div(dims.height, scheme.tile_size) *
                                      scheme.tokens_per_tile;
    case CostScheme::Kind::kFixed:
      return scheme.fixed_tokens;
  }
  return 0;
}

double prefill_flops(std::int64_t visual, std::int64_t text, std::int64_t parameter_count) {
  if (visual < 0 || text < 0 || parameter_count < 0)
    throw InvalidArgument("token and parameter counts must be non-negative");
  return 2.0 * static_cast<double>(parameter_count) * static_cast<double>(visual + text);
}

double relative_savings(double baseline, double adaptive) {
  if (!(baseline > 0.0)) throw NonpositiveBaseline("savings baseline must be > 0");
  return 100.0 * (adaptive - baseline) / baseline;
}

std::int64_t estimate_text_tokens(std::string_view text) {
  return ceil_div(static_cast<std::int64_t>(text.size()), 4);
}

std::vector<std::string> builtin_profile_names() {
  return {"patch-grid-2b", "tiled-8b", "fixed-7b"};
}

ModelProfile builtin_profile(std::string_view name) {
  if (name == "patch-grid-2b") {
    // 14-pixel patches merged 2x2; token count grows quadratically with side.
    ModelProfile p{"patch-grid-2b", 2'000'000'000, CostScheme::patch_grid(14, 2),
                   patch_aligned_sizes(28, 384, 1024, {384, 768, 1024}), std::nullopt};
    return p;
  }
  if (name == "tiled-8b") {
    return {"tiled-8b", 8'000'000'000, CostScheme::tiled(448, 256, 256), {}, std::nullopt};
  }
  if (name == "fixed-7b") {
    return {"fixed-7b", 7'000'000'000, CostScheme::fixed(729), {}, std::nullopt};
  }
  throw ConfigError("unknown built-in profile '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const CostScheme& s) {
  switch (s.kind) {
    case CostScheme::Kind::kPatchGrid:
      j = {{"kind", "patch_grid"}, {"patch_size", s.patch_size}, {"merge_factor", s.merge_factor}};
      break;
    case CostScheme::Kind::kTiled:
      j = {{"kind", "tiled"}, {"tile_size", s.tile_size}, {"tokens_per_tile", s.tokens_per_tile},
           {"base_tokens", s.base_tokens}};
      break;
    case CostScheme::Kind::kFixed:
      j = {{"kind", "fixed"}, {"fixed_tokens", s.fixed_tokens}};
      break;
  }
}

void to_json(nlohmann::json& j, const ModelProfile& p) {
  j = {{"name", p.name}, {"parameter_count", p.parameter_count}, {"scheme", p.scheme}};
  if (!p.supported_sizes.empty()) j["supported_sizes"] = p.supported_sizes;
  if (p.usd_per_mtok) j["usd_per_mtok"] = *p.usd_per_mtok;
}

ModelProfile profile_from_json(const nlohmann::json& j) {
  try {
    ModelProfile p;
    p.name = j.value("name", std::string("custom"));
    p.parameter_count = j.at("parameter_count").get<std::int64_t>();
    const auto& s = j.at("scheme");
    const auto kind = s.at("kind").get<std::string>();
    if (kind == "patch_grid") {
      p.scheme.kind = CostScheme::Kind::kPatchGrid;
      p.scheme.patch_size = s.at("patch_size").get<int>();
      p.scheme.merge_factor = s.value("merge_factor", 1);
    } else if (kind == "tiled") {
      p.scheme.kind = CostScheme::Kind::kTiled;
      p.scheme.tile_size = s.at("tile_size").get<int>();
      p.scheme.tokens_per_tile = s.at("tokens_per_tile").get<int>();
      p.scheme.base_tokens = s.value("base_tokens", 0);
    } else if (kind == "fixed") {
      p.scheme.kind = CostScheme::Kind::kFixed;
      p.scheme.fixed_tokens = s.at("fixed_tokens").get<int>();
    } else {
      throw ConfigError("profile.scheme.kind: unknown kind '" + kind + "'");
    }
    if (j.contains("supported_sizes")) p.supported_sizes = j.at("supported_sizes").get<std::vector<int>>();
    if (j.contains("usd_per_mtok")) p.usd_per_mtok = j.at("usd_per_mtok").get<double>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed profile: ") + e.what());
  }
}

ModelProfile resolve_profile(const std::string& name_or_path) {
  const auto names = builtin_profile_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return builtin_profile(name_or_path);
  if (!std::filesystem::exists(name_or_path))
    throw ConfigError("profile '" + name_or_path + "' is neither a built-in nor a file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(imageops::read_file(name_or_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("profile file '" + name_or_path + "': " + e.what());
  }
  return profile_from_json(j);
}

Report run_report(const std::vector<EvalRecord>& records, const ModelProfile& profile) {
  if (records.empty()) throw EmptyEvaluation("report needs at least one evaluated sample");
  profile.validate();
  Report report;
  report.profile_name = profile.name;
  report.samples = records.size();
  std::map<std::string, std::pair<double, std::size_t>> per_tag;
  double utility_sum = 0.0;
  std::int64_t text_total = 0;
  for (const auto& r : records) {
    ReportRow row{r};
    row.visual_tokens = visual_tokens(profile.scheme, r.dims_used);
    row.native_visual_tokens = visual_tokens(profile.scheme, r.dims_native);
    row.flops = prefill_flops(row.visual_tokens, r.text_tokens, profile.parameter_count);
    row.native_flops = prefill_flops(row.native_visual_tokens, r.text_tokens, profile.parameter_count);
    report.total_visual_tokens += row.visual_tokens;
    report.total_native_visual_tokens += row.native_visual_tokens;
    report.total_flops += row.flops;
    report.total_native_flops += row.native_flops;
    text_total += r.text_tokens;
    utility_sum += r.utility;
    auto& [sum, count] = per_tag[r.tag];
    sum += r.utility;
    ++count;
    report.rows.push_back(std::move(row));
  }
  const auto n = static_cast<double>(records.size());
  report.mean_utility = utility_sum / n;
  report.mean_visual_tokens = static_cast<double>(report.total_visual_tokens) / n;
  report.mean_flops = report.total_flops / n;
  double macro = 0.0;
  for (const auto& [tag, acc] : per_tag) {
    report.tag_utility[tag] = acc.first / static_cast<double>(acc.second);
    macro += report.tag_utility[tag];
  }
  report.macro_utility = macro / static_cast<double>(per_tag.size());
  report.savings_pct = relative_savings(report.total_native_flops, report.total_flops);
  if (profile.usd_per_mtok) {
    const double price = *profile.usd_per_mtok / 1e6;
    report.cost_savings_pct = relative_savings(
        price * static_cast<double>(report.total_native_visual_tokens + text_total),
        price * static_cast<double>(report.total_visual_tokens + text_total));
  }
  return report;
}

nlohmann::json Report::to_json() const {
  nlohmann::json j = {
      {"flops_formula", "2 * parameter_count * (visual_tokens + text_tokens), prefill only"},
      {"profile", profile_name},
      {"samples", samples},
      {"mean_utility", mean_utility},
      {"macro_utility", macro_utility},
      {"tag_utility", tag_utility},
      {"mean_visual_tokens", mean_visual_tokens},
      {"mean_flops", mean_flops},
      {"total_visual_tokens", total_visual_tokens},
      {"total_native_visual_tokens", total_native_visual_tokens},
      {"total_flops", total_flops},
      {"total_native_flops", total_native_flops},
      {"savings_pct", savings_pct},
  };
  if (cost_savings_pct) j["cost_savings_pct"] = *cost_savings_pct;
  auto& out = j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    out.push_back({{"id", row.record.id},
                   {"tag", row.record.tag},
                   {"dims_used", {row.record.dims_used.width, row.record.dims_used.height}},
                   {"dims_native", {row.record.dims_native.width, row.record.dims_native.height}},
                   {"text_tokens", row.record.text_tokens},
                   {"utility", row.record.utility},
                   {"visual_tokens", row.visual_tokens},
                   {"native_visual_tokens", row.native_visual_tokens},
                   {"flops", row.flops},
                   {"native_flops", row.native_flops}});
  }
  return j;
}

std::string Report::to_table(std::size_t max_rows) const {
  std::ostringstream out;
  out << "# prefill FLOPs estimate: 2 * P * (visual + text tokens); profile " << profile_name << "\n";
  out << fmt::format("{:<14}{:>12}{:>12}{:>16}{:>10}\n", "score", "macro", "tokens/img",
                     "FLOPs/sample", "FLOPs d");
  out << fmt::format("{:<14.4f}{:>12.4f}{:>12.1f}{:>16.4e}{:>9.1f}%\n", mean_utility, macro_utility,
                     mean_visual_tokens, mean_flops, savings_pct);
  for (const auto& [tag, u] : tag_utility) out << fmt::format("  {:<24}{:>8.4f}\n", tag, u);
  if (cost_savings_pct) out << fmt::format("  $ cost delta {:>+.1f}%\n", *cost_savings_pct);
  out << "\n"
      << fmt::format("{:<20}{:>12}{:>12}{:>8}{:>10}{:>12}\n", "id", "sent", "native", "text",
                     "visual", "utility");
  for (std::size_t i = 0; i < rows.size() && i < max_rows; ++i) {
    const auto& r = rows[i];
    out << fmt::format("{:<20}{:>12}{:>12}{:>8}{:>10}{:>12.4f}\n", r.record.id,
                       fmt::format("{}x{}", r.record.dims_used.width, r.record.dims_used.height),
                       fmt::format("{}x{}", r.record.dims_native.width, r.record.dims_native.height),
                       r.record.text_tokens, r.visual_tokens, r.record.utility);
  }
  if (rows.size() > max_rows) out << "... " << rows.size() - max_rows << " more rows\n";
  return out.str();
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<ScatterPoint>& points, std::string_view title) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  double fmax = 0.0;
  for (const auto& p : points) fmax = std::max(fmax, p.flops);
  if (fmax <= 0.0) fmax = 1.0;
  auto x = [&](double f) { return kLeft + (kW - kLeft - kRight) * f / (fmax * 1.05); };
  auto y = [&](double u) { return kH - kBottom - (kH - kTop - kBottom) * std::clamp(u, 0.0, 1.0); };
  std::ostringstream s;
  s << fmt::format(R"svg(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)svg",
                   kW, kH)
    << "\n";
  s << fmt::format(R"svg(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)svg", kW / 2, xml_escape(title))
    << "\n";
  s << fmt::format(R"svg(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>)svg", kLeft, kH - kBottom,
                   kW - kRight)
    << "\n";
  s << fmt::format(R"svg(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)svg", kLeft, kTop,
                   kH - kBottom)
    << "\n";
  s << fmt::format(R"svg(<text x="{}" y="{}" text-anchor="middle">estimated prefill FLOPs per sample</text>)svg",
                   (kLeft + kW - kRight) / 2, kH - 12)
    << "\n";
  s << fmt::format(R"svg(<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">score</text>)svg",
                   (kTop + kH - kBottom) / 2, (kTop + kH - kBottom) / 2)
    << "\n";
  for (int t = 0; t <= 4; ++t) {
    const double u = t / 4.0;
    s << fmt::format(R"svg(<text x="{}" y="{}" text-anchor="end">{:.2f}</text>)svg", kLeft - 6, y(u) + 4, u)
      << "\n";
  }
  for (const auto& p : points) {
    s << fmt::format(R"svg(<circle cx="{:.1f}" cy="{:.1f}" r="5" fill="steelblue"/>)svg", x(p.flops), y(p.utility))
      << "\n";
    s << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}">{} ({:.2e})</text>)svg", x(p.flops) + 8,
                     y(p.utility) - 6, xml_escape(p.label), p.flops)
      << "\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace ressel::cost
