// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ressel/anls.hpp"
#include "ressel/error.hpp"

using namespace ressel;

namespace {

// Plain recursion over suffixes with memoization; no shared code with the
// two-row implementation.
std::size_t oracle_distance(const std::u32string& a, const std::u32string& b, std::size_t i, std::size_t j,
                            std::vector<std::vector<long>>& memo) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  auto& slot = memo[i][j];
  if (slot >= 0) return static_cast<std::size_t>(slot);
  std::size_t best = oracle_distance(a, b, i + 1, j + 1, memo) + (a[i] == b[j] ? 0 : 1);
  best = std::min(best, oracle_distance(a, b, i + 1, j, memo) + 1);
  best = std::min(best, oracle_distance(a, b, i, j + 1, memo) + 1);
  slot = static_cast<long>(best);
  return best;
}

std::size_t oracle_distance(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  return oracle_distance(a, b, 0, 0, memo);
}

std::u32string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::u32string alphabet = U"abcAB éÉαΑ中\U0001F600";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::u32string out(len(rng), U' ');
  for (auto& c : out) c = alphabet[pick(rng)];
  return out;
}

}  // namespace

TEST_CASE("worked examples from the data pipeline table") {
  CHECK(anls::nls("T.F. Rosel", "T.F. Riehl") == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(anls::nls("P. Carter", "P. Carter") == 1.0);
}

TEST_CASE("levenshtein matches the recursive oracle on random unicode strings") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_text(rng, 12);
    const auto b = random_text(rng, 12);
    REQUIRE(anls::levenshtein(a, b) == oracle_distance(a, b));
    REQUIRE(anls::levenshtein(anls::encode_utf8(a), anls::encode_utf8(b)) == oracle_distance(a, b));
  }
}

TEST_CASE("levenshtein basics") {
  CHECK(anls::levenshtein(std::string_view(""), std::string_view("")) == 0);
  CHECK(anls::levenshtein(std::string_view("abc"), std::string_view("abc")) == 0);
  CHECK(anls::levenshtein(std::string_view("T.F. Rosel"), std::string_view("T.F. Riehl")) == 3);
  CHECK(anls::levenshtein(std::string_view("kitten"), std::string_view("sitting")) == 3);
  CHECK(anls::levenshtein(std::string_view(""), std::string_view("abc")) == 3);
  CHECK(anls::levenshtein(std::string_view("abc"), std::string_view("")) == 3);
  // Distances count code points, not bytes.
  CHECK(anls::levenshtein(std::string_view("café"), std::string_view("cafe")) == 1);
  CHECK(anls::levenshtein(std::string_view("\U0001F600"), std::string_view("x")) == 1);
}

TEST_CASE("normalization trims, collapses whitespace and folds case") {
  CHECK(anls::default_normalize("  Hello \t  World \n") == U"hello world");
  CHECK(anls::default_normalize("ÉCOLE") == U"école");
  CHECK(anls::default_normalize("ΑΒΓ") == U"αβγ");
  CHECK(anls::default_normalize("Ж") == U"ж");
  CHECK(anls::default_normalize("Ÿ") == U"ÿ");
  CHECK(anls::nls("  p. CARTER ", "P. Carter") == 1.0);
  CHECK(anls::nls("P. CARTER", "P. Carter", anls::no_normalize) < 1.0);
}

TEST_CASE("similarities below one half are zeroed") {
  // distance 3 over length 6 gives exactly 0.5, which is kept
  CHECK(anls::nls("abcxyz", "abcdef") == doctest::Approx(0.5));
  // distance 4 over length 6 gives 1/3, which is zeroed
  CHECK(anls::nls("abwxyz", "abcdef") == 0.0);
  CHECK(anls::nls("xyz", "abcdef") == 0.0);
}

TEST_CASE("both empty counts as a match, one empty as a miss") {
  CHECK(anls::nls("", "") == 1.0);
  CHECK(anls::nls("   ", "") == 1.0);
  CHECK(anls::nls("", "answer") == 0.0);
  CHECK(anls::nls("answer", "") == 0.0);
}

TEST_CASE("anls takes the best ground truth") {
  const std::vector<std::string> gts = {"Riehl", "T.F. Riehl"};
  CHECK(anls::anls("T.F. Rosel", gts) == doctest::Approx(0.7));
  CHECK(anls::anls("Riehl", gts) == 1.0);
  CHECK(anls::anls("x", std::vector<std::string>{"x", "completely different"}) == 1.0);
  CHECK_THROWS_AS(anls::anls("x", std::vector<std::string>{}), EmptyGroundTruth);
}

TEST_CASE("exact match after normalization") {
  const std::vector<std::string> gts = {"Forty two", "42"};
  CHECK(anls::exact_match(" forty   TWO ", gts) == 1.0);
  CHECK(anls::exact_match("41", gts) == 0.0);
  CHECK(anls::exact_match("b ", std::vector<std::string>{"B"}) == 1.0);
  CHECK(anls::exact_match("C", std::vector<std::string>{"B"}) == 0.0);
  CHECK_THROWS_AS(anls::exact_match("x", std::vector<std::string>{}), EmptyGroundTruth);
}

TEST_CASE("metric names round trip") {
  CHECK(anls::parse_metric("anls") == anls::Metric::kAnls);
  CHECK(anls::parse_metric("exact_match") == anls::Metric::kExactMatch);
  CHECK(anls::to_string(anls::Metric::kExactMatch) == "exact_match");
  CHECK_THROWS_AS(anls::parse_metric("bleu"), InvalidArgument);
  const std::vector<std::string> gts = {"abcdef"};
  CHECK(anls::score(anls::Metric::kAnls, "abcdeX", gts) == doctest::Approx(5.0 / 6.0));
  CHECK(anls::score(anls::Metric::kExactMatch, "abcdeX", gts) == 0.0);
}

TEST_CASE("malformed utf-8 decodes to replacement characters") {
  const std::string bad = "a\xff" "b";
  CHECK(anls::decode_utf8(bad) == U"a�b");
  CHECK(anls::encode_utf8(anls::decode_utf8("中文")) == "中文");
}

TEST_CASE("similarity properties on random pairs") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    const auto a = anls::encode_utf8(random_text(rng, 10));
    const auto b = anls::encode_utf8(random_text(rng, 10));
    const double s = anls::nls(a, b);
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
    REQUIRE(s == anls::nls(b, a));
    REQUIRE(anls::nls(a, a) == 1.0);
  }
}
