// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/simulated_vlm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ressel/anls.hpp"
#include "ressel/error.hpp"
#include "ressel/imageops.hpp"

namespace ressel::vlm {

using nlohmann::json;

namespace {

char32_t absent_char(const std::u32string& normalized) {
  static constexpr char32_t kCandidates[] = {U'#', U'~', U'^', U'|', U'`', U'@', U'%', U'_', U'*'};
  for (char32_t c : kCandidates)
    if (normalized.find(c) == std::u32string::npos) return c;
  // Falls outside anything case folding or answer text plausibly produces.
  char32_t c = 0xE000;
  while (normalized.find(c) != std::u32string::npos) ++c;
  return c;
}

}  // namespace

std::string corrupt_answer(std::string_view correct) {
  const auto normalized = anls::default_normalize(correct);
  const std::size_t n = std::max<std::size_t>(1, anls::decode_utf8(correct).size());
  return anls::encode_utf8(std::u32string(n, absent_char(normalized)));
}

std::string degrade_answer(std::string_view correct, double similarity) {
  if (similarity < 0.0 || similarity > 1.0) throw InvalidArgument("similarity must be in [0, 1]");
  std::u32string text = anls::decode_utf8(correct);
  const auto replace = static_cast<std::size_t>(
      std::lround((1.0 - similarity) * static_cast<double>(text.size())));
  const char32_t fill = absent_char(anls::default_normalize(correct));
  for (std::size_t i = 0; i < replace && i < text.size(); ++i) text[text.size() - 1 - i] = fill;
  return anls::encode_utf8(text);
}

void SimulatedVlmSpec::add_step(const std::string& sample_id, int sufficient_resolution,
                                std::string correct_answer) {
  add_ramp(sample_id, {AnswerLevel{sufficient_resolution, std::move(correct_answer)}});
}

void SimulatedVlmSpec::add_ramp(const std::string& sample_id, std::vector<AnswerLevel> levels) {
  if (levels.empty()) throw InvalidArgument("simulated sample '" + sample_id + "' needs a level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].min_resolution < 1)
      throw InvalidArgument("simulated sample '" + sample_id + "': resolutions must be positive");
    if (i > 0 && levels[i].min_resolution <= levels[i - 1].min_resolution)
      throw InvalidArgument("simulated sample '" + sample_id + "': levels must be ascending");
  }
  if (!samples_.contains(sample_id)) order_.push_back(sample_id);
  SimulatedSample s;
  s.sufficient_resolution = levels.back().min_resolution;
  s.correct_answer = levels.back().answer;
  s.levels = std::move(levels);
  samples_[sample_id] = std::move(s);
}

const SimulatedSample& SimulatedVlmSpec::sample(const std::string& sample_id) const {
  const auto it = samples_.find(sample_id);
  if (it == samples_.end()) throw UnknownSample("simulator has no sample '" + sample_id + "'");
  return it->second;
}

std::string SimulatedVlmSpec::answer_at(const std::string& sample_id, int r_effective) const {
  const auto& s = sample(sample_id);
  for (auto it = s.levels.rbegin(); it != s.levels.rend(); ++it)
    if (r_effective >= it->min_resolution) return it->answer;
  return corrupt_answer(s.correct_answer);
}

json SimulatedVlmSpec::to_json() const {
  json samples = json::object();
  for (const auto& id : order_) {
    const auto& s = samples_.at(id);
    json entry = {{"sufficient_resolution", s.sufficient_resolution}, {"answer", s.correct_answer}};
    if (s.levels.size() > 1) {
      entry["levels"] = json::array();
      for (const auto& l : s.levels)
        entry["levels"].push_back({{"min_resolution", l.min_resolution}, {"answer", l.answer}});
    }
    samples[id] = std::move(entry);
  }
  return {{"format", "ressel-simulated-vlm/1"},
          {"corruption", "same-length string of characters absent from the answer"},
          {"sub_threshold_utility", 0.0},
          {"samples", std::move(samples)}};
}

SimulatedVlmSpec SimulatedVlmSpec::from_json(const json& j) {
  SimulatedVlmSpec spec;
  try {
    for (const auto& [id, entry] : j.at("samples").items()) {
      if (entry.contains("levels")) {
        std::vector<AnswerLevel> levels;
        for (const auto& l : entry.at("levels"))
          levels.push_back({l.at("min_resolution").get<int>(), l.at("answer").get<std::string>()});
        spec.add_ramp(id, std::move(levels));
      } else {
        spec.add_step(id, entry.at("sufficient_resolution").get<int>(),
                      entry.at("answer").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed simulated VLM spec: ") + e.what());
  }
  return spec;
}

SimulatedVlmSpec SimulatedVlmSpec::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(imageops::read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("simulated VLM spec '" + path.string() + "': " + e.what());
  }
}

void SimulatedVlmSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write '" + path.string() + "'");
  out << to_json().dump(1) << '\n';
}

VlmResponse SimulatedVlm::chat(const VlmRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  const int r_effective = imageops::probe_dims(request.image_bytes).long_side();
  VlmResponse out;
  out.answer = spec_.answer_at(request.sample_id, r_effective);
  out.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace ressel::vlm
