// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace ressel::anls {

/// Similarity in [0, 1] produced by the task metrics.
using UtilityScore = double;

/// Answers below this similarity count as wrong (DocVQA convention).
inline constexpr double kNlsThreshold = 0.5;

/// Maps raw text to the sequence of code points that is compared.
using Normalizer = std::function<std::u32string(std::string_view)>;

/// Decodes UTF-8 into Unicode scalar values. Malformed sequences become U+FFFD.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view text);

/// Trims, collapses whitespace runs to one space and case-folds.
std::u32string default_normalize(std::string_view text);

/// Identity normalization (code points only).
std::u32string no_normalize(std::string_view text);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Edit distance over Unicode scalar values of two UTF-8 strings.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Normalized Levenshtein similarity of one prediction/answer pair,
/// zeroed below `kNlsThreshold`.
UtilityScore nls(std::string_view prediction, std::string_view ground_truth,
                 const Normalizer& normalize = default_normalize);

/// Best `nls` over the admissible answers. Throws EmptyGroundTruth.
UtilityScore anls(std::string_view prediction, std::span<const std::string> ground_truths,
                  const Normalizer& normalize = default_normalize);

/// 1 when the normalized prediction equals any normalized answer.
UtilityScore exact_match(std::string_view prediction, std::span<const std::string> ground_truths,
                         const Normalizer& normalize = default_normalize);

enum class Metric { kAnls, kExactMatch };

std::string_view to_string(Metric metric);
/// Accepts "anls" and "exact_match"; throws InvalidArgument otherwise.
Metric parse_metric(std::string_view name);

UtilityScore score(Metric metric, std::string_view prediction,
                   std::span<const std::string> ground_truths);

}  // namespace ressel::anls
