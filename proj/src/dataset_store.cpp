// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/dataset_store.hpp"

#include <cerrno>
#include <cstring>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"
#include "ressel/log.hpp"

namespace ressel::store {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& known_keys() {
  static const std::unordered_set<std::string> keys = {
      "id", "image", "query", "gts", "metric", "tag", "rollout",
      "label", "features", "status", "error"};
  return keys;
}

}  // namespace

std::string_view to_string(Status status) {
  switch (status) {
    case Status::kPending: return "pending";
    case Status::kLabeled: return "labeled";
    case Status::kFailed: return "failed";
  }
  return "pending";
}

Status parse_status(std::string_view name) {
  if (name == "pending") return Status::kPending;
  if (name == "labeled") return Status::kLabeled;
  if (name == "failed") return Status::kFailed;
  throw InvalidArgument("unknown status '" + std::string(name) + "'");
}

const std::string& SampleRecord::effective_tag() const {
  static const std::string kAnls = "anls";
  static const std::string kExact = "exact_match";
  if (!tag.empty()) return tag;
  return metric == anls::Metric::kAnls ? kAnls : kExact;
}

json to_json(const SampleRecord& r) {
  json j = r.extra.is_object() ? r.extra : json::object();
  j["id"] = r.id;
  j["image"] = r.image;
  j["query"] = r.query;
  j["gts"] = r.ground_truths;
  j["metric"] = std::string(anls::to_string(r.metric));
  if (!r.tag.empty()) j["tag"] = r.tag;
  if (r.rollout) {
    json steps = json::array();
    for (const auto& s : r.rollout->steps)
      steps.push_back({{"r", s.resolution}, {"response", s.response}, {"utility", s.utility}});
    j["rollout"] = std::move(steps);
  }
  if (r.label) j["label"] = {{"r", r.label->resolution}, {"k", r.label->class_index}};
  if (r.features)
    j["features"] = {{"dim", r.features->size()},
                     {"b64", codec::base64_encode(codec::pack_f32_le(*r.features))}};
  j["status"] = std::string(to_string(r.status));
  if (r.error) j["error"] = *r.error;
  return j;
}

SampleRecord from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError(line, "record must be a JSON object");
  SampleRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    if (r.id.empty()) throw SchemaError(line, "id must be non-empty");
    r.image = j.value("image", std::string{});
    r.query = j.value("query", std::string{});
    r.ground_truths = j.value("gts", std::vector<std::string>{});
    r.metric = anls::parse_metric(j.value("metric", std::string("anls")));
    r.tag = j.value("tag", std::string{});
    if (j.contains("rollout") && !j["rollout"].is_null()) {
      RolloutRecord rollout;
      for (const auto& s : j["rollout"]) {
        RolloutStep step{s.at("r").get<int>(), s.at("response").get<std::string>(),
                         s.at("utility").get<double>()};
        if (!(step.utility >= 0.0 && step.utility <= 1.0))
          throw SchemaError(line, "rollout utility outside [0, 1]");
        rollout.steps.push_back(std::move(step));
      }
      r.rollout = std::move(rollout);
    }
    if (j.contains("label") && !j["label"].is_null())
      r.label = SufficiencyLabel{j["label"].at("r").get<int>(), j["label"].at("k").get<std::size_t>()};
    if (j.contains("features") && !j["features"].is_null()) {
      const auto dim = j["features"].at("dim").get<std::size_t>();
      auto values = codec::unpack_f32_le(codec::base64_decode(j["features"].at("b64").get<std::string>()));
      if (values.size() != dim)
        throw SchemaError(line, "features.dim does not match the encoded vector length");
      r.features = std::move(values);
    }
    r.status = parse_status(j.value("status", std::string("pending")));
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
  } catch (const SchemaError&) {
    throw;
  } catch (const json::exception& e) {
    throw SchemaError(line, e.what());
  } catch (const ValidationError& e) {
    throw SchemaError(line, e.what());
  }
  if (r.status == Status::kLabeled && (!r.rollout || !r.label))
    throw SchemaError(line, "labeled record must carry rollout and label");
  if (r.status == Status::kFailed && !r.error)
    throw SchemaError(line, "failed record must carry an error");
  for (const auto& [key, value] : j.items())
    if (!known_keys().contains(key)) r.extra[key] = value;
  return r;
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw StoreError("cannot open dataset '" + path.string() + "'");
}

std::optional<SampleRecord> DatasetReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    const bool terminated = !in_.eof();
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      if (!terminated) {
        warnings_.push_back(path_.string() + ": skipped truncated final line " + std::to_string(line_));
        log::warn("store_truncated_line", {{"path", path_.string()}, {"line", line_}});
        return std::nullopt;
      }
      throw SchemaError(line_, std::string("invalid JSON: ") + e.what());
    }
    return from_json(j, line_);
  }
  if (in_.bad()) throw StoreError("read error on '" + path_.string() + "'");
  return std::nullopt;
}

LoadResult load(const std::filesystem::path& path) {
  DatasetReader reader(path);
  LoadResult out;
  while (auto record = reader.next()) {
    if (!out.ids.insert(record->id).second)
      throw SchemaError(reader.line(), "duplicate sample id '" + record->id + "'");
    out.records.push_back(std::move(*record));
  }
  out.warnings = reader.warnings();
  return out;
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw StoreError("cannot stat '" + path.string() + "': " + ec.message());
    if (size > 0) {
      // Cut a torn tail back to the last newline before appending.
      std::ifstream in(path, std::ios::binary);
      std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (content.back() != '\n') {
        auto result = load(path);
        warnings_ = result.warnings;
        const auto keep = content.find_last_of('\n');
        std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1, ec);
        if (ec) throw StoreError("cannot truncate '" + path.string() + "': " + ec.message());
      }
      auto result = load(path);
      for (auto& r : result.records) {
        ids_.insert(r.id);
        existing_.push_back(std::move(r));
      }
    }
  }
  file_ = std::fopen(path.string().c_str(), "ab");
  if (!file_) throw StoreError("cannot open '" + path.string() + "' for append: " + std::strerror(errno));
}

DatasetWriter::~DatasetWriter() {
  if (file_) std::fclose(file_);
}

void DatasetWriter::append(const SampleRecord& record) {
  if (ids_.contains(record.id)) throw DuplicateId("sample id '" + record.id + "' already stored");
  std::string line = to_json(record).dump(-1, ' ', false, json::error_handler_t::replace);
  line.push_back('\n');
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
    throw StoreError("write to '" + path_.string() + "' failed: " + std::strerror(errno));
  ids_.insert(record.id);
}

void write_all(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write '" + path.string() + "'");
  for (const auto& r : records) out << to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  if (!out) throw StoreError("write to '" + path.string() + "' failed");
}

}  // namespace ressel::store
