// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/core.h>

#include "ressel/codec.hpp"
#include "ressel/cost_model.hpp"
#include "ressel/dataset_store.hpp"
#include "ressel/error.hpp"
#include "ressel/feature_client.hpp"
#include "ressel/gateway.hpp"
#include "ressel/imageops.hpp"
#include "ressel/log.hpp"
#include "ressel/simulated_vlm.hpp"

namespace ressel::cli {

using nlohmann::json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

json RunManifest::to_json() const {
  return {{"command", command},
          {"argv", argv},
          {"config_hash", config_hash},
          {"inputs", inputs},
          {"outputs", outputs},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"tool_version", kToolVersion},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"extra", extra}};
}

void RunManifest::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StoreError("cannot write manifest '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
}

std::map<int, double> parse_mix(const std::string& text, const ResolutionMenu& menu) {
  std::map<int, double> mix;
  std::vector<std::string> parts;
  const bool positional = text.find(':') == std::string::npos;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, positional ? '/' : ',')) parts.push_back(part);
  if (parts.empty()) throw BadMix("mix is empty");
  if (positional && parts.size() != menu.size())
    throw BadMix(fmt::format("positional mix needs {} shares, got {}", menu.size(), parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    int r = 0;
    std::string share = parts[i];
    if (positional) {
      r = menu.entry(i);
    } else {
      const auto colon = parts[i].find(':');
      if (colon == std::string::npos) throw BadMix("mix entry '" + parts[i] + "' is not <resolution>:<share>");
      try {
        r = std::stoi(parts[i].substr(0, colon));
      } catch (const std::exception&) {
        throw BadMix("mix entry '" + parts[i] + "' has no resolution");
      }
      share = parts[i].substr(colon + 1);
    }
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(share, &used);
      if (used != share.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw BadMix("mix share '" + share + "' is not a number");
    }
    if (!menu.index_of(r)) throw BadMix(fmt::format("mix resolution {} is not a menu entry", r));
    if (!(p >= 0.0) || !std::isfinite(p)) throw BadMix(fmt::format("mix share for {} must be non-negative", r));
    if (mix.contains(r)) throw BadMix(fmt::format("mix lists {} twice", r));
    mix[r] = p;
  }
  double total = 0.0;
  for (const auto& [r, p] : mix) total += p;
  if (std::abs(total - 1.0) > 1e-6) throw BadMix(fmt::format("mix shares sum to {}, not 1", total));
  return mix;
}

namespace {

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write '" + path.string() + "'");
  for (const auto& line : lines) out << line << '\n';
  if (!out.flush()) throw StoreError("write failed for '" + path.string() + "'");
}

std::string random_answer(std::mt19937_64& rng, std::size_t kind) {
  static constexpr const char* kSurnames[] = {"Rosel", "Carter", "Okafor", "Lindqvist", "Moreau",
                                             "Tanaka", "Alvarez", "Novak", "Ibrahim", "Keller"};
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_int_distribution<int> letter(0, 25);
  std::string out;
  switch (kind) {
    case 0:
      out = "INV-";
      for (int i = 0; i < 5; ++i) out += static_cast<char>('0' + digit(rng));
      break;
    case 1:
      out = fmt::format("{}.{:02d}", 100 + (rng() % 9900), static_cast<int>(rng() % 100));
      break;
    case 2:
      out = fmt::format("{}. {}", static_cast<char>('A' + letter(rng)), kSurnames[rng() % std::size(kSurnames)]);
      break;
    default:
      out = fmt::format("{:02d}/{:02d}/{}", 1 + rng() % 28, 1 + rng() % 12, 1990 + rng() % 35);
      break;
  }
  return out;
}

constexpr const char* kQueries[] = {"What is the invoice number?", "What is the total amount due?",
                                    "Who signed the letter?", "What date is printed on the form?"};

// Centres with pairwise distance at least `separation`, unit noise around them.
std::vector<std::vector<double>> class_centres(std::size_t k, std::size_t dim, double separation,
                                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> centres(k, std::vector<double>(dim));
  for (auto& c : centres)
    for (auto& v : c) v = normal(rng);
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d2 += (centres[a][i] - centres[b][i]) * (centres[a][i] - centres[b][i]);
      closest = std::min(closest, std::sqrt(d2));
    }
  if (std::isfinite(closest) && closest > 0.0) {
    const double scale = separation / closest;
    for (auto& c : centres)
      for (auto& v : c) v *= scale;
  }
  return centres;
}

}  // namespace

SimulateOutputs simulate(const SimulateOptions& options) {
  if (options.n < 1) throw InvalidArgument("n must be at least 1");
  if (options.dim < 1) throw InvalidArgument("dim must be at least 1");
  if (options.image_pool < 1) throw InvalidArgument("image pool must hold at least one image");
  if (!(options.separation >= 6.0)) throw InvalidArgument("class separation must be at least 6 sigma");
  std::vector<double> weights;
  double total = 0.0;
  for (std::size_t k = 0; k < options.menu.size(); ++k) {
    const auto it = options.mix.find(options.menu.entry(k));
    weights.push_back(it == options.mix.end() ? 0.0 : it->second);
    total += weights.back();
  }
  for (const auto& [r, p] : options.mix)
    if (!options.menu.index_of(r)) throw BadMix(fmt::format("mix resolution {} is not a menu entry", r));
  if (std::abs(total - 1.0) > 1e-6) throw BadMix(fmt::format("mix shares sum to {}, not 1", total));

  const fs::path dir = options.out_dir;
  fs::create_directories(dir / "images");
  std::mt19937_64 rng(options.seed);

  static constexpr imageops::ImageDims kShapes[] = {{1024, 768}, {768, 1024}, {1024, 1024},
                                                    {1024, 724}, {724, 1024}, {1024, 576}};
  // Aspect ratios from the table, longest side at the menu maximum.
  const int native_max = options.menu.back();
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < options.image_pool; ++i) {
    auto dims = kShapes[i % std::size(kShapes)];
    dims = imageops::target_dims({dims.width * native_max, dims.height * native_max}, native_max);
    const auto name = fmt::format("images/page_{:02d}.png", i);
    const auto png = imageops::encode_png(imageops::synthetic_page(dims, options.seed * 1000 + i));
    std::ofstream image(dir / name, std::ios::binary | std::ios::trunc);
    if (!image.write(png.data(), static_cast<std::streamsize>(png.size())))
      throw StoreError("cannot write '" + (dir / name).string() + "'");
    pool.push_back(name);
  }

  const auto centres = class_centres(options.menu.size(), options.dim, options.separation, rng);
  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  std::bernoulli_distribution pick_exact(options.exact_match_share);
  std::normal_distribution<double> noise(0.0, 1.0);

  SimulateOutputs out{dir / "samples.jsonl", dir / "vlm_spec.json", dir / "features.jsonl",
                      dir / "config.json", {}};
  std::vector<store::SampleRecord> records;
  std::vector<std::string> feature_lines;
  vlm::SimulatedVlmSpec spec;
  for (std::size_t i = 0; i < options.n; ++i) {
    const std::size_t k = pick_class(rng);
    const std::size_t kind = rng() % std::size(kQueries);
    store::SampleRecord rec;
    rec.id = fmt::format("s{:05d}", i);
    rec.image = pool[rng() % pool.size()];
    rec.query = kQueries[kind];
    const std::string answer = random_answer(rng, kind);
    rec.ground_truths = {answer};
    rec.metric = pick_exact(rng) ? anls::Metric::kExactMatch : anls::Metric::kAnls;
    int threshold = options.menu.entry(k);
    if (options.interval_thresholds) {
      const int lo = k == 0 ? options.menu.entry(0) / 2 : options.menu.entry(k - 1);
      threshold = std::uniform_int_distribution<int>(lo + 1, options.menu.entry(k))(rng);
    }
    spec.add_step(rec.id, threshold, answer);
    ++out.planted[options.menu.entry(k)];

    std::vector<double> z(options.dim);
    for (std::size_t d = 0; d < options.dim; ++d) z[d] = centres[k][d] + noise(rng);
    feature_lines.push_back(
        json{{"id", rec.id}, {"features", {{"dim", options.dim}, {"b64", codec::base64_encode(codec::pack_f32_le(z))}}}}
            .dump());
    records.push_back(std::move(rec));
  }
  store::write_all(out.samples, records);
  spec.save(out.spec);
  write_lines(out.features, feature_lines);

  json menu_json;
  to_json(menu_json, options.menu);
  const json config = {{"menu", menu_json},
                       {"labeling", {{"tau", 0.85}, {"delta", 0.1}, {"early_exit", true}}},
                       {"vlm", {{"kind", "simulated"}, {"spec", "vlm_spec.json"}}},
                       {"profile", "patch-grid-2b"},
                       {"gateway", {{"listen", "127.0.0.1:8080"}, {"head", "head.json"}, {"mode", "continuous"}}}};
  write_lines(out.config, {config.dump(2)});
  return out;
}

std::map<std::string, std::vector<double>> load_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open features file '" + path.string() + "'");
  std::map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const bool torn = in.eof();
    try {
      const json j = json::parse(line);
      const auto& f = j.at("features");
      auto v = codec::unpack_f32_le(codec::base64_decode(f.at("b64").get<std::string>()));
      if (v.size() != f.at("dim").get<std::size_t>())
        throw SchemaError(n, fmt::format("features.dim is {} but the vector has {} entries",
                                         f.at("dim").get<std::size_t>(), v.size()));
      out[j.at("id").get<std::string>()] = std::move(v);
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception& e) {
      if (torn) {
        log::warn("torn_line_skipped", {{"path", path.string()}, {"line", n}});
        break;
      }
      throw SchemaError(n, e.what());
    }
  }
  return out;
}

void join_features(std::vector<store::SampleRecord>& records,
                   const std::map<std::string, std::vector<double>>& features) {
  for (auto& rec : records) {
    if (rec.features) continue;
    if (auto it = features.find(rec.id); it != features.end()) rec.features = it->second;
  }
}

bool in_holdout(const std::string& id, double fraction) {
  if (fraction <= 0.0) return false;
  const auto digest = codec::sha256_hex(id);
  const auto bucket = std::stoull(digest.substr(0, 8), nullptr, 16);
  return static_cast<double>(bucket) / 4294967296.0 < fraction;
}

json TrainOutcome::to_json() const {
  return {{"train_size", train_size},
          {"holdout_size", holdout_size},
          {"train_accuracy", train_accuracy},
          {"holdout_accuracy", holdout_accuracy ? json(*holdout_accuracy) : json(nullptr)},
          {"dim", head.dim()},
          {"classes", head.classes()}};
}

TrainOutcome train(const TrainOptions& options, const ResolutionMenu& menu) {
  if (options.holdout < 0.0 || options.holdout >= 1.0) throw InvalidArgument("holdout must lie in [0, 1)");
  auto loaded = store::load(options.data);
  std::string checksum_input = imageops::read_file(options.data);
  if (options.features) {
    join_features(loaded.records, load_features(*options.features));
    checksum_input += imageops::read_file(*options.features);
  }
  std::vector<selector::TrainingExample> fit;
  std::vector<selector::TrainingExample> held;
  for (const auto& rec : loaded.records) {
    if (rec.status != store::Status::kLabeled || !rec.label) continue;
    if (!rec.features) throw InvalidArgument("sample '" + rec.id + "' has no features");
    if (rec.label->class_index >= menu.size() || menu.entry(rec.label->class_index) != rec.label->resolution)
      throw MenuError(fmt::format("sample '{}' is labeled {} which is not class {} of the menu", rec.id,
                                  rec.label->resolution, rec.label->class_index));
    auto& bucket = in_holdout(rec.id, options.holdout) ? held : fit;
    bucket.push_back({*rec.features, rec.label->class_index});
  }
  if (fit.empty()) throw EmptyDataset("no labeled samples with features to train on");

  auto result = selector::train_head(fit, menu, options.train);
  TrainOutcome out{std::move(result.head), fit.size(), held.size(), result.report.train_accuracy, std::nullopt};
  if (!held.empty()) out.holdout_accuracy = selector::accuracy(out.head, held);
  out.head.metadata = {{"train_config", options.train.to_json()},
                       {"data_checksum", codec::sha256_hex(checksum_input)},
                       {"holdout_fraction", options.holdout},
                       {"epoch_loss", result.report.epoch_loss},
                       {"steps", result.report.steps},
                       {"summary", out.to_json()}};
  selector::save_head(out.head, options.out);
  return out;
}

json EvalSummary::to_json() const {
  json routed_json = json::object();
  for (const auto& [r, count] : routed) routed_json[std::to_string(r)] = count;
  return {{"mode", mode},
          {"samples", samples},
          {"mean_utility", mean_utility},
          {"macro_utility", macro_utility},
          {"tag_utility", tag_utility},
          {"routed", routed_json},
          {"errors", errors},
          {"total_flops", total_flops},
          {"total_native_flops", total_native_flops},
          {"savings_pct", savings_pct}};
}

namespace {

json dims_json(const imageops::ImageDims& d) { return json::array({d.width, d.height}); }

imageops::ImageDims dims_from_json(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

EvalSummary eval(const EvalOptions& options, const AppConfig& config) {
  if (!config.vlm) throw ConfigError("vlm: eval needs a target VLM");
  auto vlm = make_vlm_client(*config.vlm);
  auto records = store::load(options.dataset).records;
  if (records.empty()) throw EmptyDataset("dataset '" + options.dataset.string() + "' has no samples");
  if (options.features) join_features(records, load_features(*options.features));

  const Mode mode = options.mode;
  std::optional<selector::ClassifierHead> head;
  std::unique_ptr<features::FeatureClient> feature_client;
  if (mode.needs_features()) {
    if (!options.head) throw InvalidArgument("mode " + mode.to_string() + " needs --head");
    head = selector::load_head(*options.head);
    if (!head->menu().same_classes(config.menu)) throw ConfigError("menu: head menu does not match the configured menu");
    const bool missing = std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.features; });
    if (missing) {
      if (!config.features) throw InvalidArgument("some samples have no features and no feature endpoint is configured");
      feature_client = std::make_unique<features::HttpFeatureClient>(*config.features);
    }
  }
  if (mode.kind == Mode::Kind::kFixed) {
    const auto sizes = config.supported_sizes();
    if (std::find(sizes.begin(), sizes.end(), mode.fixed_resolution) == sizes.end())
      throw InvalidArgument(fmt::format("fixed resolution {} is not a supported size", mode.fixed_resolution));
  }

  auto render_options = config.image;
  render_options.base_dir = fs::absolute(options.dataset).parent_path();
  imageops::RenderCache images(render_options);
  const auto supported = config.supported_sizes();
  const auto& profile = config.profile;

  struct Row {
    json line;
    cost::EvalRecord record;
    int r = 0;
    bool error = false;
  };
  std::vector<Row> rows(records.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        const auto& rec = records[i];
        const auto native = images.native_dims(rec.image);
        Row& row = rows[i];
        json line = {{"id", rec.id}, {"tag", rec.effective_tag()}, {"mode", mode.to_string()}};
        int r = 0;
        switch (mode.kind) {
          case Mode::Kind::kPassthrough: r = native.long_side(); break;
          case Mode::Kind::kFixed: r = mode.fixed_resolution; break;
          case Mode::Kind::kContinuous:
          case Mode::Kind::kDiscrete: {
            const auto z = rec.features ? *rec.features
                                        : feature_client->features(images.render(rec.image, config.menu.front()), rec.query);
            if (mode.kind == Mode::Kind::kContinuous) {
              const auto sel = selector::select_continuous(*head, z, supported);
              r = sel.r_rounded;
              line["r_continuous"] = sel.r_continuous;
              line["probabilities"] = sel.probabilities;
            } else {
              const auto label = selector::select_discrete(*head, z);
              r = selector::round_to_supported(label.resolution, supported);
              line["probabilities"] = selector::softmax(head->logits(z));
            }
            break;
          }
        }
        const auto used = imageops::target_dims(native, r);
        vlm::VlmRequest request;
        request.image_bytes = images.render(rec.image, r);
        request.query = rec.query;
        request.sample_id = rec.id;
        std::string answer;
        try {
          answer = vlm->chat(request).answer;
        } catch (const VlmError& e) {
          row.error = true;
          line["error"] = std::string(e.code()) + ": " + e.what();
        }
        const double utility = row.error ? 0.0 : anls::score(rec.metric, answer, rec.ground_truths);
        const auto text_tokens = cost::estimate_text_tokens(rec.query);
        const auto visual = cost::visual_tokens(profile.scheme, used);
        line["r"] = r;
        line["dims_native"] = dims_json(native);
        line["dims_used"] = dims_json(used);
        line["text_tokens"] = text_tokens;
        line["visual_tokens"] = visual;
        line["flops"] = cost::prefill_flops(visual, text_tokens, profile.parameter_count);
        line["utility"] = utility;
        line["answer"] = answer;
        row.line = std::move(line);
        row.record = {rec.id, rec.effective_tag(), used, native, text_tokens, utility};
        row.r = r;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = records.size();
      }
    }
  };
  {
    std::vector<std::jthread> workers;
    const auto threads = std::clamp<std::size_t>(options.parallelism, 1, records.size());
    for (std::size_t t = 0; t < threads; ++t) workers.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::string> lines;
  std::vector<cost::EvalRecord> eval_records;
  EvalSummary summary;
  summary.mode = mode.to_string();
  for (const auto& row : rows) {
    lines.push_back(row.line.dump());
    eval_records.push_back(row.record);
    ++summary.routed[row.r];
    if (row.error) ++summary.errors;
  }
  write_lines(options.out, lines);

  const auto report = cost::run_report(eval_records, profile);
  summary.samples = report.samples;
  summary.mean_utility = report.mean_utility;
  summary.macro_utility = report.macro_utility;
  summary.tag_utility = report.tag_utility;
  summary.total_flops = report.total_flops;
  summary.total_native_flops = report.total_native_flops;
  summary.savings_pct = report.savings_pct;
  write_lines(fs::path(options.out.string() + ".summary.json"), {summary.to_json().dump(2)});
  log::info("eval_done", summary.to_json());
  return summary;
}

namespace {

std::vector<cost::EvalRecord> load_run(const fs::path& path, std::string* mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open run file '" + path.string() + "'");
  std::vector<cost::EvalRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (mode && mode->empty()) *mode = j.value("mode", "");
      out.push_back({j.at("id").get<std::string>(), j.value("tag", ""), dims_from_json(j.at("dims_used")),
                     dims_from_json(j.at("dims_native")), j.at("text_tokens").get<std::int64_t>(),
                     j.at("utility").get<double>()});
    } catch (const std::exception& e) {
      throw SchemaError(n, std::string("run file '") + path.string() + "': " + e.what());
    }
  }
  return out;
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      while (used < part.size() && std::isspace(static_cast<unsigned char>(part[used]))) ++used;
      if (used != part.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InvalidArgument("'" + part + "' is not a number");
    }
  }
  if (out.empty()) throw InvalidArgument("feature vector is empty");
  return out;
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string log_level = "warn";
  std::vector<std::string> argv;
};

AppConfig require_config(const Globals& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required for this command");
  return load_config(g.config_path);
}

RunManifest start_manifest(const std::string& command, const Globals& g, const AppConfig* config) {
  RunManifest m;
  m.command = command;
  m.argv = g.argv;
  if (config) m.config_hash = codec::sha256_hex(config->raw.dump());
  if (g.seed_set) m.seed = g.seed;
  m.started_at = utc_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path) {
  m.finished_at = utc_now();
  m.write(path);
}

fs::path manifest_for(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

// Blocks SIGINT/SIGTERM on every thread started afterwards and waits for one.
int serve(const Globals& g) {
  const AppConfig config = require_config(g);
  if (!config.vlm) throw ConfigError("vlm: serve needs a target VLM");
  std::optional<selector::ClassifierHead> head;
  if (!config.gateway.head_path.empty()) {
    head = selector::load_head(config.gateway.head_path);
  } else if (config.gateway.mode.needs_features()) {
    throw ConfigError("gateway.head: mode " + config.gateway.mode.to_string() + " needs a trained head");
  } else {
    head.emplace(config.menu, 1);
  }
  std::shared_ptr<vlm::VlmClient> vlm_client = make_vlm_client(*config.vlm);
  std::shared_ptr<features::FeatureClient> feature_client;
  if (config.features) feature_client = std::make_shared<features::HttpFeatureClient>(*config.features);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  gateway::Gateway gw(gateway::GatewayConfig::from_app(config), std::move(*head), vlm_client, feature_client);
  const int port = gw.start();
  print_json({{"listening", fmt::format("{}:{}", config.gateway.host, port)}, {"mode", config.gateway.mode.to_string()}});
  int sig = 0;
  sigwait(&signals, &sig);
  log::info("shutdown", {{"signal", sig}});
  gw.stop();
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Resolution selection for vision-language models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  app.add_option("--config", g.config_path, "Configuration file (JSON)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset, simulator spec and features");
  SimulateOptions sim_opts;
  std::string mix_text = "384:0.7,768:0.2,1024:0.1";
  sim->add_option("--n", sim_opts.n, "Number of samples")->capture_default_str();
  sim->add_option("--mix", mix_text, "Planted label distribution")->capture_default_str();
  sim->add_option("--out-dir", sim_opts.out_dir)->required();
  sim->add_option("--dim", sim_opts.dim, "Feature dimension")->capture_default_str();
  sim->add_option("--separation", sim_opts.separation, "Class separation in sigma")->capture_default_str();
  std::string thresholds = "interval";
  sim->add_option("--thresholds", thresholds, "interval: anywhere in the label's interval; menu: on the entry")
      ->check(CLI::IsMember({"interval", "menu"}))
      ->capture_default_str();

  // label
  auto* lab = app.add_subcommand("label", "Roll out the menu and write sufficiency labels (resumable)");
  fs::path lab_in, lab_out;
  std::size_t lab_par = 4;
  bool no_early_exit = false;
  lab->add_option("--input", lab_in)->required();
  lab->add_option("--output", lab_out)->required();
  lab->add_option("--parallelism", lab_par)->capture_default_str()->check(CLI::PositiveNumber);
  lab->add_flag("--no-early-exit", no_early_exit);

  // train
  auto* tr = app.add_subcommand("train", "Train the resolution classifier head");
  TrainOptions tr_opts;
  std::string optimizer = "adam";
  fs::path tr_features;
  tr->add_option("--data", tr_opts.data)->required();
  tr->add_option("--features", tr_features, "Features JSONL joined by id");
  tr->add_option("--out", tr_opts.out)->required();
  tr->add_option("--lr", tr_opts.train.learning_rate)->capture_default_str();
  tr->add_option("--batch", tr_opts.train.batch_size)->capture_default_str();
  tr->add_option("--epochs", tr_opts.train.epochs)->capture_default_str();
  tr->add_option("--smoothing", tr_opts.train.label_smoothing)->capture_default_str();
  tr->add_option("--holdout", tr_opts.holdout)->capture_default_str();
  tr->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();

  // select
  auto* sel = app.add_subcommand("select", "Pick a resolution for one feature vector or image");
  fs::path sel_head, sel_image;
  std::string sel_features, sel_query;
  sel->add_option("--head", sel_head)->required();
  auto* sel_f = sel->add_option("--features", sel_features, "Comma-separated feature vector");
  auto* sel_i = sel->add_option("--image", sel_image);
  sel->add_option("--query", sel_query);
  sel_f->excludes(sel_i);

  // eval
  auto* ev = app.add_subcommand("eval", "Route a dataset through one mode and score it");
  EvalOptions ev_opts;
  fs::path ev_features, ev_head;
  std::string ev_mode = "continuous";
  ev->add_option("--dataset", ev_opts.dataset)->required();
  ev->add_option("--features", ev_features);
  ev->add_option("--head", ev_head);
  ev->add_option("--mode", ev_mode, "continuous|discrete|passthrough|fixed:<r>")->capture_default_str();
  ev->add_option("--out", ev_opts.out)->required();
  ev->add_option("--parallelism", ev_opts.parallelism)->capture_default_str()->check(CLI::PositiveNumber);

  // report
  auto* rep = app.add_subcommand("report", "Price eval runs and compare against native resolution");
  std::vector<fs::path> runs;
  std::string rep_profile;
  fs::path rep_svg, rep_json;
  rep->add_option("--run", runs)->required();
  rep->add_option("--profile", rep_profile, "Built-in profile name or JSON file");
  rep->add_option("--svg", rep_svg);
  rep->add_option("--json", rep_json);

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP gateway");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    log::init(g.log_level);
    g.seed_set = seed_opt->count() > 0;

    if (sim->parsed()) {
      sim_opts.seed = g.seed_set ? g.seed : 7;
      sim_opts.interval_thresholds = thresholds == "interval";
      g.seed = sim_opts.seed;
      g.seed_set = true;
      std::optional<AppConfig> config;
      if (!g.config_path.empty()) {
        config = load_config(g.config_path);
        sim_opts.menu = config->menu;
      }
      auto manifest = start_manifest("simulate", g, config ? &*config : nullptr);
      sim_opts.mix = parse_mix(mix_text, sim_opts.menu);
      const auto out = simulate(sim_opts);
      manifest.outputs = {out.samples.string(), out.spec.string(), out.features.string(), out.config.string()};
      json planted = json::object();
      for (const auto& [r, c] : out.planted) planted[std::to_string(r)] = c;
      manifest.extra = {{"n", sim_opts.n}, {"mix", mix_text}, {"thresholds", thresholds}, {"planted", planted}};
      finish_manifest(manifest, sim_opts.out_dir / "manifest.json");
      print_json({{"samples", out.samples.string()},
                  {"spec", out.spec.string()},
                  {"features", out.features.string()},
                  {"config", out.config.string()},
                  {"planted", planted}});
      return 0;
    }

    if (lab->parsed()) {
      const AppConfig config = require_config(g);
      if (!config.vlm) throw ConfigError("vlm: label needs a target VLM");
      auto manifest = start_manifest("label", g, &config);
      auto cfg = config.labeling;
      if (no_early_exit) cfg.early_exit = false;
      auto samples = store::load(lab_in).records;
      // Keep relative image paths valid from the output's directory.
      const auto in_dir = fs::absolute(lab_in).parent_path();
      const auto out_dir = fs::absolute(lab_out).parent_path();
      if (in_dir != out_dir)
        for (auto& s : samples)
          if (fs::path(s.image).is_relative()) s.image = fs::relative(in_dir / s.image, out_dir).string();
      auto render_options = config.image;
      render_options.base_dir = out_dir;
      imageops::RenderCache images(render_options);
      auto vlm_client = make_vlm_client(*config.vlm);
      store::DatasetWriter writer(lab_out);
      const auto summary = labeler::label_dataset(samples, config.menu, cfg, *vlm_client, images, writer, lab_par);
      manifest.inputs = {lab_in.string()};
      manifest.outputs = {lab_out.string()};
      manifest.extra = summary.to_json();
      finish_manifest(manifest, manifest_for(lab_out));
      print_json(summary.to_json());
      return summary.failed > 0 ? 2 : 0;
    }

    if (tr->parsed()) {
      std::optional<AppConfig> config;
      if (!g.config_path.empty()) config = load_config(g.config_path);
      auto manifest = start_manifest("train", g, config ? &*config : nullptr);
      tr_opts.train.seed = g.seed;
      tr_opts.train.optimizer = optimizer == "sgd" ? selector::Optimizer::kSgd : selector::Optimizer::kAdam;
      if (!tr_features.empty()) tr_opts.features = tr_features;
      const auto menu = config ? config->menu : ResolutionMenu::default_menu();
      const auto outcome = train(tr_opts, menu);
      manifest.inputs = {tr_opts.data.string()};
      if (tr_opts.features) manifest.inputs.push_back(tr_opts.features->string());
      manifest.outputs = {tr_opts.out.string()};
      manifest.extra = outcome.to_json();
      finish_manifest(manifest, manifest_for(tr_opts.out));
      print_json(outcome.to_json());
      return 0;
    }

    if (sel->parsed()) {
      std::optional<AppConfig> config;
      if (!g.config_path.empty()) config = load_config(g.config_path);
      const auto head = selector::load_head(sel_head);
      std::vector<double> z;
      if (!sel_features.empty()) {
        z = parse_vector(sel_features);
      } else if (!sel_image.empty()) {
        if (sel_query.empty()) throw InvalidArgument("--image needs --query");
        if (!config || !config->features) throw ConfigError("features: --image needs a configured feature endpoint");
        const auto raw = imageops::read_file(sel_image);
        const auto img = imageops::decode(raw);
        const auto low = imageops::encode_jpeg(
            imageops::resize(img, imageops::target_dims(img.dims(), head.menu().front()), config->image.filter),
            config->image.jpeg_quality);
        features::HttpFeatureClient client(*config->features);
        z = client.features(low, sel_query);
      } else {
        throw InvalidArgument("select needs --features or --image with --query");
      }
      std::vector<int> supported;
      if (config) {
        supported = config->supported_sizes();
      } else {
        const auto sizes = head.menu().supported_sizes();
        supported.assign(sizes.begin(), sizes.end());
      }
      const auto cont = selector::select_continuous(head, z, supported);
      const auto disc = selector::select_discrete(head, z);
      print_json({{"r_continuous", cont.r_continuous},
                  {"r_rounded", cont.r_rounded},
                  {"probabilities", cont.probabilities},
                  {"discrete", disc.resolution}});
      return 0;
    }

    if (ev->parsed()) {
      const AppConfig config = require_config(g);
      auto manifest = start_manifest("eval", g, &config);
      ev_opts.mode = Mode::parse(ev_mode);
      if (!ev_features.empty()) ev_opts.features = ev_features;
      if (!ev_head.empty()) ev_opts.head = ev_head;
      const auto summary = eval(ev_opts, config);
      manifest.inputs = {ev_opts.dataset.string()};
      if (ev_opts.features) manifest.inputs.push_back(ev_opts.features->string());
      if (ev_opts.head) manifest.inputs.push_back(ev_opts.head->string());
      manifest.outputs = {ev_opts.out.string(), ev_opts.out.string() + ".summary.json"};
      manifest.extra = summary.to_json();
      finish_manifest(manifest, manifest_for(ev_opts.out));
      print_json(summary.to_json());
      return summary.errors > 0 ? 2 : 0;
    }

    if (rep->parsed()) {
      std::optional<AppConfig> config;
      if (!g.config_path.empty()) config = load_config(g.config_path);
      auto manifest = start_manifest("report", g, config ? &*config : nullptr);
      const auto profile = !rep_profile.empty() ? cost::resolve_profile(rep_profile)
                           : config             ? config->profile
                                                : cost::builtin_profile("patch-grid-2b");
      json reports = json::array();
      std::vector<cost::ScatterPoint> points;
      for (const auto& path : runs) {
        std::string mode;
        const auto report = cost::run_report(load_run(path, &mode), profile);
        std::cout << "# " << path.string() << (mode.empty() ? "" : " (" + mode + ")") << "\n"
                  << report.to_table() << "\n";
        auto j = report.to_json();
        j["run"] = path.string();
        j["mode"] = mode;
        j.erase("rows");
        reports.push_back(j);
        points.push_back({mode.empty() ? path.filename().string() : mode, report.mean_flops, report.macro_utility});
      }
      manifest.inputs.assign(runs.size(), "");
      std::transform(runs.begin(), runs.end(), manifest.inputs.begin(), [](const fs::path& p) { return p.string(); });
      if (!rep_json.empty()) {
        write_lines(rep_json, {json{{"profile", profile.name}, {"runs", reports}}.dump(2)});
        manifest.outputs.push_back(rep_json.string());
      }
      if (!rep_svg.empty()) {
        write_lines(rep_svg, {cost::render_svg(points, "Score vs estimated prefill FLOPs (" + profile.name + ")")});
        manifest.outputs.push_back(rep_svg.string());
      }
      if (!manifest.outputs.empty()) finish_manifest(manifest, manifest_for(manifest.outputs.front()));
      return 0;
    }

    if (srv->parsed()) return serve(g);
  } catch (const Error& e) {
    log::error("command_failed", {{"code", e.code()}, {"message", e.what()}});
    std::cerr << "error: " << e.code() << ": " << e.what() << std::endl;
    return e.exit_code();
  } catch (const std::exception& e) {
    log::error("command_failed", {{"code", "Internal"}, {"message", e.what()}});
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}

}  // namespace ressel::cli
