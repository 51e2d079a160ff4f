// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include "ressel/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ressel/codec.hpp"
#include "ressel/error.hpp"
#include "ressel/imageops.hpp"

namespace ressel::selector {

using nlohmann::json;

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " contains a non-finite value");
}

ClassifierHead::ClassifierHead(ResolutionMenu menu, std::size_t dim)
    : menu_(std::move(menu)), dim_(dim), weights_(menu_.size() * dim, 0.0), bias_(menu_.size(), 0.0) {
  if (dim_ == 0) throw InvalidArgument("feature dimension must be positive");
}

ClassifierHead::ClassifierHead(ResolutionMenu menu, std::size_t dim, std::vector<double> weights,
                               std::vector<double> bias)
    : menu_(std::move(menu)), dim_(dim), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (dim_ == 0) throw InvalidArgument("feature dimension must be positive");
  if (weights_.size() != menu_.size() * dim_)
    throw DimensionMismatch("weights must hold K*D = " + std::to_string(menu_.size() * dim_) + " values");
  if (bias_.size() != menu_.size())
    throw DimensionMismatch("bias must hold K = " + std::to_string(menu_.size()) + " values");
  check_finite(weights_, "weights");
  check_finite(bias_, "bias");
}

std::vector<double> ClassifierHead::logits(std::span<const double> z) const {
  if (z.size() != dim_)
    throw DimensionMismatch("feature vector has dimension " + std::to_string(z.size()) +
                            ", head expects " + std::to_string(dim_));
  std::vector<double> out(bias_);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double* row = weights_.data() + k * dim_;
    out[k] += std::inner_product(z.begin(), z.end(), row, 0.0);
  }
  return out;
}

bool ClassifierHead::operator==(const ClassifierHead& other) const {
  return menu_.same_classes(other.menu_) && dim_ == other.dim_ && weights_ == other.weights_ &&
         bias_ == other.bias_;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += p[k] = std::exp(logits[k] - top);
  for (double& v : p) v /= sum;
  return p;
}

double expected_resolution(std::span<const double> probabilities, const ResolutionMenu& menu) {
  if (probabilities.size() != menu.size())
    throw DimensionMismatch("probability vector length must equal the menu size");
  double r = 0.0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) r += probabilities[k] * menu.entry(k);
  // Rounding can leave the sum a few ulps outside the hull.
  return std::clamp(r, static_cast<double>(menu.front()), static_cast<double>(menu.back()));
}

int round_to_supported(double r, std::span<const int> supported) {
  if (supported.empty()) throw EmptySupportedSet("no supported sizes to round to");
  const auto it = std::find_if(supported.begin(), supported.end(),
                               [r](int s) { return static_cast<double>(s) >= r; });
  return it == supported.end() ? supported.back() : *it;
}

SufficiencyLabel select_discrete(const ClassifierHead& head, std::span<const double> z) {
  const auto l = head.logits(z);
  // max_element returns the first maximum: the lowest resolution wins ties.
  const auto k = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
  return {head.menu().entry(k), k};
}

ContinuousSelection select_continuous(const ClassifierHead& head, std::span<const double> z,
                                      std::span<const int> supported) {
  ContinuousSelection out;
  out.probabilities = softmax(head.logits(z));
  out.r_continuous = expected_resolution(out.probabilities, head.menu());
  out.r_rounded = round_to_supported(out.r_continuous, supported);
  return out;
}

LossAndGradient smoothed_ce_loss(std::span<const double> logits, std::size_t label, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("label smoothing must be in [0, 1)");
  if (label >= logits.size()) throw InvalidArgument("label index outside the logit vector");
  const auto k = static_cast<double>(logits.size());
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - top);
  const double log_z = top + std::log(sum);
  LossAndGradient out;
  out.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double q = (i == label ? 1.0 - epsilon : 0.0) + epsilon / k;
    const double log_p = logits[i] - log_z;
    out.loss -= q * log_p;
    out.grad_logits[i] = std::exp(log_p) - q;
  }
  return out;
}

void TrainConfig::validate(std::size_t classes) const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("learning_rate must be finite and >= 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (epochs == 0) throw InvalidArgument("epochs must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw InvalidArgument("label_smoothing must be in [0, 1)");
  if (!class_weights.empty()) {
    if (class_weights.size() != classes) throw InvalidArgument("class_weights must have one entry per class");
    for (double w : class_weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("class weights must be finite and >= 0");
  }
}

json TrainConfig::to_json() const {
  json j = {{"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"label_smoothing", label_smoothing},
            {"seed", seed},
            {"optimizer", optimizer == Optimizer::kAdam ? "adam" : "sgd"}};
  if (optimizer == Optimizer::kAdam) {
    j["beta1"] = beta1;
    j["beta2"] = beta2;
  }
  if (!class_weights.empty()) j["class_weights"] = class_weights;
  return j;
}

namespace {

void check_data(std::span<const TrainingExample> data, std::size_t dim, std::size_t classes) {
  if (data.empty()) throw EmptyDataset("training needs at least one example");
  for (const auto& ex : data) {
    if (ex.features.size() != dim)
      throw InconsistentDimensions("training examples disagree on feature dimension (" +
                                   std::to_string(ex.features.size()) + " vs " + std::to_string(dim) + ")");
    if (ex.label >= classes) throw InvalidArgument("training label outside the menu");
    check_finite(ex.features, "training features");
  }
}

}  // namespace

TrainReport train_in_place(ClassifierHead& head, std::span<const TrainingExample> data,
                           const TrainConfig& cfg) {
  const std::size_t dim = head.dim();
  const std::size_t classes = head.classes();
  cfg.validate(classes);
  check_data(data, dim, classes);

  auto weights = head.mutable_weights();
  auto bias = head.mutable_bias();
  const std::size_t n_params = weights.size() + bias.size();
  std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
  auto param = [&](std::size_t i) -> double& {
    return i < weights.size() ? weights[i] : bias[i - weights.size()];
  };

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  TrainReport report;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      // Fixed summation order keeps runs bit-reproducible.
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        auto lg = smoothed_ce_loss(head.logits(ex.features), ex.label, cfg.label_smoothing);
        const double w = cfg.class_weights.empty() ? 1.0 : cfg.class_weights[ex.label];
        epoch_loss += w * lg.loss;
        for (std::size_t k = 0; k < classes; ++k) {
          const double g = w * lg.grad_logits[k] / batch;
          double* row = grad.data() + k * dim;
          for (std::size_t d = 0; d < dim; ++d) row[d] += g * ex.features[d];
          grad[weights.size() + k] += g;
        }
      }
      ++t;
      if (cfg.optimizer == Optimizer::kSgd) {
        for (std::size_t i = 0; i < n_params; ++i) param(i) -= cfg.learning_rate * grad[i];
      } else {
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < n_params; ++i) {
          m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
          v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
          param(i) -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
        }
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  report.steps = t;
  report.train_accuracy = accuracy(head, data);
  return report;
}

TrainResult train_head(std::span<const TrainingExample> data, const ResolutionMenu& menu,
                       const TrainConfig& cfg) {
  if (data.empty()) throw EmptyDataset("training needs at least one example");
  ClassifierHead head(menu, data.front().features.size());
  auto report = train_in_place(head, data, cfg);
  head.metadata["train_config"] = cfg.to_json();
  return {std::move(head), std::move(report)};
}

double accuracy(const ClassifierHead& head, std::span<const TrainingExample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data)
    if (select_discrete(head, ex.features).class_index == ex.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

json head_to_json(const ClassifierHead& head) {
  return {{"format", "ressel-head/1"},
          {"dim", head.dim()},
          {"classes", head.classes()},
          {"menu", head.menu()},
          {"weights_f64le_b64", codec::base64_encode(codec::pack_f64_le(head.weights()))},
          {"bias_f64le_b64", codec::base64_encode(codec::pack_f64_le(head.bias()))},
          {"metadata", head.metadata}};
}

ClassifierHead head_from_json(const json& j) {
  try {
    if (j.value("format", "") != "ressel-head/1") throw ConfigError("not a ressel head file");
    const auto dim = j.at("dim").get<std::size_t>();
    const auto classes = j.at("classes").get<std::size_t>();
    auto menu = menu_from_json(j.at("menu"));
    if (menu.size() != classes) throw ConfigError("head file: classes does not match the menu size");
    auto weights = codec::unpack_f64_le(codec::base64_decode(j.at("weights_f64le_b64").get<std::string>()));
    auto bias = codec::unpack_f64_le(codec::base64_decode(j.at("bias_f64le_b64").get<std::string>()));
    ClassifierHead head(std::move(menu), dim, std::move(weights), std::move(bias));
    head.metadata = j.value("metadata", json::object());
    return head;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed head file: ") + e.what());
  }
}

void save_head(const ClassifierHead& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write head file '" + path.string() + "'");
  out << head_to_json(head).dump(1) << '\n';
  if (!out) throw StoreError("write to '" + path.string() + "' failed");
}

ClassifierHead load_head(const std::filesystem::path& path) {
  try {
    return head_from_json(json::parse(imageops::read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("head file '" + path.string() + "': " + e.what());
  }
}

}  // namespace ressel::selector
