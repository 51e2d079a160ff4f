// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/anls.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "ressel/error.hpp"

namespace ressel::anls {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Simple (one-to-one) case folding for the Latin, Greek and Cyrillic blocks.
char32_t fold_case(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
  if (c == 0x178) return 0xFF;
  if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138 && c != 0x149 && c != 0x17F) {
    // Latin Extended-A alternates upper/lower, with a parity shift at U+0139..U+0148
    // and U+0179..U+017E.
    const bool shifted = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    const bool upper = shifted ? (c % 2 == 1) : (c % 2 == 0);
    return upper ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

std::u32string normalize_with(std::string_view text, bool fold) {
  const std::u32string decoded = decode_utf8(text);
  std::u32string out;
  out.reserve(decoded.size());
  bool pending_space = false;
  for (char32_t c : decoded) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(fold ? fold_case(c) : c);
  }
  return out;
}

void require_answers(std::span<const std::string> ground_truths) {
  if (ground_truths.empty()) throw EmptyGroundTruth("at least one ground-truth answer is required");
}

}  // namespace

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      out.push_back(lead);
      ++i;
      continue;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4;
      cp = lead & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > text.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (!ok || overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::u32string default_normalize(std::string_view text) { return normalize_with(text, true); }

std::u32string no_normalize(std::string_view text) { return decode_utf8(text); }

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // Two-row DP over the shorter string.
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

UtilityScore nls(std::string_view prediction, std::string_view ground_truth,
                 const Normalizer& normalize) {
  const std::u32string p = normalize(prediction);
  const std::u32string g = normalize(ground_truth);
  const std::size_t longest = std::max(p.size(), g.size());
  if (longest == 0) return 1.0;
  const double s = 1.0 - static_cast<double>(levenshtein(p, g)) / static_cast<double>(longest);
  return s < kNlsThreshold ? 0.0 : s;
}

UtilityScore anls(std::string_view prediction, std::span<const std::string> ground_truths,
                  const Normalizer& normalize) {
  require_answers(ground_truths);
  UtilityScore best = 0.0;
  for (const auto& g : ground_truths) best = std::max(best, nls(prediction, g, normalize));
  return best;
}

UtilityScore exact_match(std::string_view prediction, std::span<const std::string> ground_truths,
                         const Normalizer& normalize) {
  require_answers(ground_truths);
  const std::u32string p = normalize(prediction);
  const bool hit = std::any_of(ground_truths.begin(), ground_truths.end(),
                               [&](const std::string& g) { return normalize(g) == p; });
  return hit ? 1.0 : 0.0;
}

std::string_view to_string(Metric metric) {
  return metric == Metric::kAnls ? "anls" : "exact_match";
}

Metric parse_metric(std::string_view name) {
  if (name == "anls") return Metric::kAnls;
  if (name == "exact_match") return Metric::kExactMatch;
  throw InvalidArgument("unknown metric '" + std::string(name) + "' (expected anls|exact_match)");
}

UtilityScore score(Metric metric, std::string_view prediction,
                   std::span<const std::string> ground_truths) {
  return metric == Metric::kAnls ? anls(prediction, ground_truths)
                                 : exact_match(prediction, ground_truths);
}

}  // namespace ressel::anls
