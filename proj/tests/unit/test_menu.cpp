// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "ressel/error.hpp"
#include "ressel/menu.hpp"

using namespace ressel;

TEST_CASE("default and binary menus") {
  const auto d = ResolutionMenu::default_menu();
  CHECK(std::vector<int>(d.entries().begin(), d.entries().end()) == std::vector<int>{384, 768, 1024});
  CHECK(d.range_min() == 384);
  CHECK(d.range_max() == 1024);
  CHECK(d.front() == 384);

  const auto b = ResolutionMenu::binary_menu();
  CHECK(b.size() == 2);
  CHECK(std::vector<int>(b.entries().begin(), b.entries().end()) == std::vector<int>{384, 1024});
  for (int r : b.entries()) CHECK(d.index_of(r).has_value());
}

TEST_CASE("construction rejects each broken invariant") {
  CHECK_THROWS_AS(ResolutionMenu({384}, 384, 1024), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({768, 384}, 384, 1024), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 384}, 384, 1024), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({0, 384}, 0, 1024), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 512, 1024), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 384, 768), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 1024, 384), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 384, 1024, std::vector<int>{}), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 384, 1024, std::vector<int>{384, 768}), MenuError);
  CHECK_THROWS_AS(ResolutionMenu({384, 1024}, 384, 1024, std::vector<int>{1024, 384}), MenuError);
  CHECK_NOTHROW(ResolutionMenu({384, 1024}, 384, 1024, std::vector<int>{392, 1036}));
}

TEST_CASE("supported sizes fall back to the entries") {
  const auto d = ResolutionMenu::default_menu();
  CHECK_FALSE(d.has_declared_supported_sizes());
  CHECK(std::ranges::equal(d.supported_sizes(), d.entries()));
  const ResolutionMenu m({384, 1024}, 384, 1024, std::vector<int>{384, 512, 1024});
  CHECK(m.has_declared_supported_sizes());
  CHECK(m.supported_sizes().size() == 3);
}

TEST_CASE("index lookup and class equality") {
  const auto d = ResolutionMenu::default_menu();
  CHECK(d.index_of(768) == 1u);
  CHECK_FALSE(d.index_of(500).has_value());
  const ResolutionMenu with_sizes({384, 768, 1024}, 384, 1024, std::vector<int>{384, 512, 768, 1024});
  CHECK(d.same_classes(with_sizes));
  CHECK_FALSE(d == with_sizes);
  CHECK_FALSE(d.same_classes(ResolutionMenu::binary_menu()));
}

TEST_CASE("json round trip") {
  const ResolutionMenu m({256, 512, 1024}, 200, 1200, std::vector<int>{256, 512, 800, 1024, 1200});
  nlohmann::json j;
  to_json(j, m);
  CHECK(menu_from_json(j) == m);
  CHECK(menu_from_json(nlohmann::json{{"entries", {384, 1024}}}) == ResolutionMenu::binary_menu());
  CHECK_THROWS_AS(menu_from_json(nlohmann::json{{"entries", {1024, 384}}}), MenuError);
}
