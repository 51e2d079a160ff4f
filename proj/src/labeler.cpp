// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/labeler.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_set>

#include "ressel/anls.hpp"
#include "ressel/error.hpp"
#include "ressel/log.hpp"

namespace ressel::labeler {

void LabelingConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must be in (0, 1]");
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("delta must be in [0, 1)");
}

namespace {

void check_utilities(std::span<const double> u) {
  for (double v : u)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("utilities must lie in [0, 1]");
}

// Eq.-style sufficiency test of index k against the utilities seen so far.
enum class Verdict { kFails, kQualifies, kUndetermined };

Verdict judge(std::span<const double> seen, std::size_t k, bool complete,
              const LabelingConfig& cfg) {
  if (seen[k] < cfg.tau) return Verdict::kFails;
  for (std::size_t l = k + 1; l < seen.size(); ++l)
    if (seen[l] - seen[k] > cfg.delta) return Verdict::kFails;
  if (complete) return Verdict::kQualifies;
  // Unseen utilities are at most 1.
  return 1.0 - seen[k] <= cfg.delta ? Verdict::kQualifies : Verdict::kUndetermined;
}

}  // namespace

SufficiencyLabel label_from_utilities(std::span<const double> utilities,
                                      const ResolutionMenu& menu, const LabelingConfig& cfg) {
  if (utilities.size() != menu.size())
    throw LengthMismatch("expected " + std::to_string(menu.size()) + " utilities, got " +
                         std::to_string(utilities.size()));
  check_utilities(utilities);
  for (std::size_t k = 0; k < utilities.size(); ++k)
    if (judge(utilities, k, true, cfg) == Verdict::kQualifies) return {menu.entry(k), k};
  return {menu.back(), menu.size() - 1};
}

ScanResult sequential_scan(std::size_t menu_size, const LabelingConfig& cfg,
                           const std::function<double(std::size_t)>& evaluate) {
  if (menu_size == 0) throw InvalidArgument("menu must not be empty");
  std::vector<double> seen;
  seen.reserve(menu_size);
  for (std::size_t k = 0; k < menu_size; ++k) {
    seen.push_back(evaluate(k));
    check_utilities(std::span<const double>(&seen.back(), 1));
    const bool complete = seen.size() == menu_size;
    if (!cfg.early_exit && !complete) continue;
    for (std::size_t j = 0; j < seen.size(); ++j) {
      const Verdict v = judge(seen, j, complete, cfg);
      if (v == Verdict::kQualifies) return {j, seen.size()};
      if (v == Verdict::kUndetermined) break;
    }
  }
  return {menu_size - 1, menu_size};
}

RolloutOutcome rollout_and_label(const LabelingInput& sample, const ResolutionMenu& menu,
                                 const LabelingConfig& cfg, vlm::VlmClient& vlm,
                                 const UtilityFn& metric, imageops::RenderCache& images) {
  RolloutOutcome out;
  const auto scan = sequential_scan(menu.size(), cfg, [&](std::size_t k) {
    const int r = menu.entry(k);
    vlm::VlmRequest request;
    request.image_bytes = images.render(sample.image_ref, r);
    request.query = sample.query;
    request.sample_id = sample.sample_id;
    const auto response = vlm.chat(request);
    const double u = metric(response.answer, sample.ground_truths);
    out.record.steps.push_back({r, response.answer, u});
    return u;
  });
  out.label = {menu.entry(scan.class_index), scan.class_index};
  return out;
}

nlohmann::json LabelingSummary::to_json() const {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [r, n] : histogram) hist[std::to_string(r)] = n;
  return {{"labeled", labeled},   {"failed", failed},
          {"skipped", skipped},   {"vlm_calls", vlm_calls},
          {"histogram", hist},    {"mean_utility_at_label", mean_utility_at_label}};
}

namespace {

struct Completed {
  store::SampleRecord record;
  std::size_t calls = 0;
};

Completed label_one(const store::SampleRecord& input, const ResolutionMenu& menu,
                    const LabelingConfig& cfg, vlm::VlmClient& vlm, imageops::RenderCache& images) {
  Completed done{input};
  auto& rec = done.record;
  rec.rollout.reset();
  rec.label.reset();
  rec.error.reset();
  const anls::Metric metric = input.metric;
  const UtilityFn utility = [metric](const std::string& response, std::span<const std::string> gts) {
    return anls::score(metric, response, gts);
  };
  // Counting wrapper so the record keeps partial responses on failure.
  struct Counting : vlm::VlmClient {
    vlm::VlmClient& inner;
    std::size_t calls = 0;
    explicit Counting(vlm::VlmClient& c) : inner(c) {}
    vlm::VlmResponse chat(const vlm::VlmRequest& r) override {
      ++calls;
      return inner.chat(r);
    }
  } counting(vlm);
  try {
    if (input.ground_truths.empty()) throw EmptyGroundTruth("sample has no ground truths");
    auto outcome = rollout_and_label({input.id, input.image, input.query, input.ground_truths}, menu,
                                     cfg, counting, utility, images);
    rec.rollout = std::move(outcome.record);
    rec.label = outcome.label;
    rec.status = store::Status::kLabeled;
  } catch (const StoreError&) {
    throw;
  } catch (const Error& e) {
    rec.status = store::Status::kFailed;
    rec.error = std::string(e.code()) + ": " + e.what();
    log::warn("label_failed", {{"id", input.id}, {"error", *rec.error}});
  }
  done.calls = counting.calls;
  return done;
}

}  // namespace

LabelingSummary label_dataset(const std::vector<store::SampleRecord>& samples,
                              const ResolutionMenu& menu, const LabelingConfig& cfg,
                              vlm::VlmClient& vlm, imageops::RenderCache& images,
                              store::DatasetWriter& out, std::size_t parallelism) {
  cfg.validate();
  if (parallelism == 0) throw InvalidArgument("parallelism must be >= 1");
  LabelingSummary summary;
  std::vector<const store::SampleRecord*> todo;
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw DuplicateId("input repeats sample id '" + s.id + "'");
    if (out.contains(s.id)) {
      ++summary.skipped;
      continue;
    }
    todo.push_back(&s);
  }

  double utility_sum = 0.0;
  auto tally = [&](const store::SampleRecord& r) {
    if (r.status == store::Status::kLabeled && r.label) {
      ++summary.labeled;
      ++summary.histogram[r.label->resolution];
      for (const auto& step : r.rollout->steps)
        if (step.resolution == r.label->resolution) utility_sum += step.utility;
    } else if (r.status == store::Status::kFailed) {
      ++summary.failed;
    }
  };
  for (const auto& r : out.existing()) tally(r);

  std::mutex mutex;
  std::vector<std::optional<Completed>> results(todo.size());
  std::size_t next_to_write = 0;
  std::atomic<std::size_t> next_to_claim{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next_to_claim.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        Completed done = label_one(*todo[i], menu, cfg, vlm, images);
        std::lock_guard lock(mutex);
        summary.vlm_calls += done.calls;
        results[i] = std::move(done);
        // Flush the contiguous completed prefix so the file stays in input order.
        while (next_to_write < results.size() && results[next_to_write]) {
          out.append(results[next_to_write]->record);
          tally(results[next_to_write]->record);
          results[next_to_write].reset();
          ++next_to_write;
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
        return;
      }
    }
  };

  const std::size_t threads = std::min(parallelism, std::max<std::size_t>(1, todo.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  if (summary.labeled > 0) summary.mean_utility_at_label = utility_sum / static_cast<double>(summary.labeled);
  log::info("labeling_done", summary.to_json());
  return summary;
}

}  // namespace ressel::labeler
