// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ressel/anls.hpp"
#include "ressel/labels.hpp"

namespace ressel::store {

enum class Status { kPending, kLabeled, kFailed };

std::string_view to_string(Status status);
Status parse_status(std::string_view name);

/// One line of a dataset file.
///
/// JSONL keys: id, image, query, gts, metric, tag, rollout[{r, response,
/// utility}], label{r, k}, features{dim, b64}, status, error. Features are
/// base64 of little-endian float32. Keys this version does not know are kept
/// in `extra` and written back unchanged.
struct SampleRecord {
  std::string id;
  std::string image;
  std::string query;
  std::vector<std::string> ground_truths;
  anls::Metric metric = anls::Metric::kAnls;
  /// Dataset name used for macro averaging; defaults to the metric name.
  std::string tag;
  std::optional<RolloutRecord> rollout;
  std::optional<SufficiencyLabel> label;
  std::optional<std::vector<double>> features;
  Status status = Status::kPending;
  std::optional<std::string> error;
  nlohmann::json extra = nlohmann::json::object();

  const std::string& effective_tag() const;
};

nlohmann::json to_json(const SampleRecord& record);
/// Throws SchemaError (line number attached by the caller) on invalid input.
SampleRecord from_json(const nlohmann::json& j, std::size_t line = 0);

/// Streaming reader. A final line without a trailing newline that fails to
/// parse is treated as a torn write: skipped with a warning.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  std::optional<SampleRecord> next();

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::vector<std::string> warnings_;
};

struct LoadResult {
  std::vector<SampleRecord> records;
  std::unordered_set<std::string> ids;
  std::vector<std::string> warnings;
};

/// Reads a whole file. A missing file is an error; use `exists` first when
/// resuming.
LoadResult load(const std::filesystem::path& path);

/// Append-only writer. Opening an existing file indexes its ids and drops a
/// torn final line so later appends start on a clean line boundary.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::filesystem::path& path);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  /// Throws DuplicateId or StoreError. Each record is flushed before return.
  void append(const SampleRecord& record);

  bool contains(const std::string& id) const { return ids_.contains(id); }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<SampleRecord>& existing() const noexcept { return existing_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::unordered_set<std::string> ids_;
  std::vector<SampleRecord> existing_;
  std::vector<std::string> warnings_;
};

/// Writes all records to a fresh file (truncating).
void write_all(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

}  // namespace ressel::store
