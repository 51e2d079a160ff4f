// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "ressel/cost_model.hpp"
#include "ressel/error.hpp"
#include "test_support.hpp"

using namespace ressel;
using cost::CostScheme;

TEST_CASE("visual token examples") {
  CHECK(cost::visual_tokens(CostScheme::patch_grid(14, 2), {1024, 512}) == 703);
  CHECK(cost::visual_tokens(CostScheme::tiled(384, 576, 576), {768, 768}) == 2880);
  CHECK(cost::visual_tokens(CostScheme::fixed(729), {1, 1}) == 729);
  CHECK(cost::visual_tokens(CostScheme::fixed(729), {4000, 3000}) == 729);
  CHECK_THROWS(cost::visual_tokens(CostScheme::fixed(729), {0, 10}));
}

TEST_CASE("prefill flops and savings examples") {
  CHECK(cost::prefill_flops(0, 0, 2'000'000'000) == 0.0);
  CHECK(cost::prefill_flops(703, 50, 2'000'000'000) == doctest::Approx(3.012e12));
  CHECK(cost::prefill_flops(1406, 100, 2'000'000'000) == doctest::Approx(2 * 3.012e12));
  CHECK(cost::relative_savings(100, 37) == doctest::Approx(-63.0));
  CHECK(cost::relative_savings(100, 100) == 0.0);
  CHECK(cost::relative_savings(8, 2) == doctest::Approx(-75.0));
  CHECK_THROWS_AS(cost::relative_savings(0, 1), NonpositiveBaseline);
  CHECK_THROWS_AS(cost::relative_savings(-1, 1), NonpositiveBaseline);
  CHECK_THROWS_AS(cost::prefill_flops(-1, 0, 1), InvalidArgument);
  for (double x : {1e-9, 1.0, 3e12}) CHECK(cost::relative_savings(x, x) == 0.0);
  CHECK(cost::estimate_text_tokens("") == 0);
  CHECK(cost::estimate_text_tokens("abcde") == 2);
}

TEST_CASE("token count is monotone and quadratic for patch grids") {
  const auto grid = CostScheme::patch_grid(14, 2);
  const auto tiled = CostScheme::tiled(448, 256, 256);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> side(1, 3000);
  for (int i = 0; i < 20000; ++i) {
    const int w = side(rng), h = side(rng);
    for (const auto& s : {grid, tiled}) {
      REQUIRE(cost::visual_tokens(s, {w + 1, h}) >= cost::visual_tokens(s, {w, h}));
      REQUIRE(cost::visual_tokens(s, {w, h + 1}) >= cost::visual_tokens(s, {w, h}));
    }
  }
  const double ratio = static_cast<double>(cost::visual_tokens(grid, {28000, 28000})) /
                       static_cast<double>(cost::visual_tokens(grid, {14000, 14000}));
  CHECK(ratio == doctest::Approx(4.0));
  CHECK(static_cast<double>(cost::visual_tokens(grid, {2000, 2000})) / cost::visual_tokens(grid, {1000, 1000}) ==
        doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("scheme and profile validation") {
  CHECK_THROWS_AS(CostScheme::patch_grid(0, 2).validate(), ConfigError);
  CHECK_THROWS_AS(CostScheme::tiled(0, 1, 0).validate(), ConfigError);
  CHECK_THROWS_AS(CostScheme::fixed(0).validate(), ConfigError);
  cost::ModelProfile p{"x", 0, CostScheme::fixed(1), {}, std::nullopt};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.parameter_count = 1;
  p.supported_sizes = {768, 384};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.supported_sizes = {384, 768};
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("built-in and file profiles") {
  for (const auto& name : cost::builtin_profile_names()) {
    const auto p = cost::builtin_profile(name);
    CHECK(p.name == name);
    CHECK_NOTHROW(p.validate());
    nlohmann::json j;
    cost::to_json(j, p);
    const auto back = cost::profile_from_json(j);
    CHECK(back.name == p.name);
    CHECK(back.parameter_count == p.parameter_count);
    CHECK(cost::visual_tokens(back.scheme, {1000, 700}) == cost::visual_tokens(p.scheme, {1000, 700}));
  }
  CHECK_THROWS(cost::builtin_profile("nope"));

  testing::TempDir dir;
  testing::write_file(dir / "p.json", R"({"name":"custom","parameter_count":1000,
    "scheme":{"kind":"tiled","tile_size":384,"tokens_per_tile":576,"base_tokens":576}})");
  const auto custom = cost::resolve_profile((dir / "p.json").string());
  CHECK(custom.name == "custom");
  CHECK(cost::visual_tokens(custom.scheme, {768, 768}) == 2880);
  CHECK(cost::resolve_profile("fixed-7b").scheme.fixed_tokens == 729);
  CHECK_THROWS(cost::resolve_profile((dir / "missing.json").string()));
}

TEST_CASE("report aggregates equal the sum of rows") {
  const auto profile = cost::builtin_profile("patch-grid-2b");
  std::vector<cost::EvalRecord> records;
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> side(100, 1024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const cost::ImageDims native{side(rng), side(rng)};
    const cost::ImageDims used{std::max(1, native.width / 2), std::max(1, native.height / 2)};
    records.push_back({"s" + std::to_string(i), i % 2 ? "a" : "b", used, native, 20 + i, u(rng)});
  }
  const auto report = cost::run_report(records, profile);
  REQUIRE(report.rows.size() == 50);
  std::int64_t vt = 0, nvt = 0;
  double flops = 0.0, nflops = 0.0, util = 0.0;
  for (const auto& row : report.rows) {
    vt += row.visual_tokens;
    nvt += row.native_visual_tokens;
    flops += row.flops;
    nflops += row.native_flops;
    util += row.record.utility;
    REQUIRE(row.visual_tokens == cost::visual_tokens(profile.scheme, row.record.dims_used));
  }
  CHECK(report.total_visual_tokens == vt);
  CHECK(report.total_native_visual_tokens == nvt);
  CHECK(report.total_flops == flops);
  CHECK(report.total_native_flops == nflops);
  CHECK(report.mean_utility == doctest::Approx(util / 50));
  CHECK(report.savings_pct == doctest::Approx(cost::relative_savings(nflops, flops)));
  CHECK(report.savings_pct < 0.0);
  CHECK(report.tag_utility.size() == 2);
  CHECK(report.macro_utility == doctest::Approx((report.tag_utility.at("a") + report.tag_utility.at("b")) / 2));
  const auto j = report.to_json();
  CHECK(j.contains("savings_pct"));
  CHECK(report.to_table().find("FLOPs d") != std::string::npos);
  CHECK_THROWS_AS(cost::run_report({}, profile), EmptyEvaluation);
}

TEST_CASE("native routing saves nothing and fixed schemes save nothing") {
  const cost::EvalRecord native{"a", "t", {1024, 768}, {1024, 768}, 30, 0.9};
  CHECK(cost::run_report({native}, cost::builtin_profile("patch-grid-2b")).savings_pct == 0.0);
  const cost::EvalRecord shrunk{"a", "t", {384, 288}, {1024, 768}, 30, 0.9};
  CHECK(cost::run_report({shrunk}, cost::builtin_profile("fixed-7b")).savings_pct == 0.0);
  CHECK(cost::run_report({shrunk}, cost::builtin_profile("patch-grid-2b")).savings_pct < 0.0);
}

TEST_CASE("closed-form savings for a 70/20/10 mix under a patch grid") {
  const auto profile = cost::builtin_profile("patch-grid-2b");
  std::vector<cost::EvalRecord> records;
  const std::vector<std::pair<int, int>> mix = {{384, 70}, {768, 20}, {1024, 10}};
  for (const auto& [r, count] : mix)
    for (int i = 0; i < count; ++i) records.push_back({"x", "t", {r, r}, {1024, 1024}, 0, 1.0});
  const auto report = cost::run_report(records, profile);
  auto t = [&](int r) { return static_cast<double>(cost::visual_tokens(profile.scheme, {r, r})); };
  const double expected = 100.0 * ((0.7 * t(384) + 0.2 * t(768) + 0.1 * t(1024)) / t(1024) - 1.0);
  const double quadratic = 100.0 * (0.7 * 384.0 * 384 + 0.2 * 768.0 * 768 + 0.1 * 1024.0 * 1024) / (1024.0 * 1024) - 100.0;
  CHECK(report.savings_pct == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(report.savings_pct - quadratic) < 2.0);
}

TEST_CASE("svg scatter escapes labels") {
  const auto svg = cost::render_svg({{"a<b & \"c\"", 1e12, 0.9}, {"native", 2e12, 0.95}}, "Utility <vs> FLOPs");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("a&lt;b &amp; &quot;c&quot;") != std::string::npos);
  CHECK(svg.find("Utility &lt;vs&gt; FLOPs") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
