// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ressel/labels.hpp"
#include "ressel/menu.hpp"

namespace ressel::selector {

/// Joint image-query feature vector from the feature adapter.
using FeatureVector = std::vector<double>;

/// Throws InvalidArgument on any non-finite entry.
void check_finite(std::span<const double> values, const char* what);

/// K-way linear classifier over D-dimensional features. Weights are stored
/// row-major, one row of D per menu class.
class ClassifierHead {
 public:
  ClassifierHead(ResolutionMenu menu, std::size_t dim);
  ClassifierHead(ResolutionMenu menu, std::size_t dim, std::vector<double> weights,
                 std::vector<double> bias);

  /// weights * z + bias. Throws DimensionMismatch.
  std::vector<double> logits(std::span<const double> z) const;

  const ResolutionMenu& menu() const noexcept { return menu_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t classes() const noexcept { return menu_.size(); }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }
  std::span<double> mutable_weights() noexcept { return weights_; }
  std::span<double> mutable_bias() noexcept { return bias_; }

  /// Free-form provenance carried into the head file (training config, data
  /// checksum, adapter handshake, ...).
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const ClassifierHead& other) const;

 private:
  ResolutionMenu menu_;
  std::size_t dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Probability-weighted mean of the menu entries.
double expected_resolution(std::span<const double> probabilities, const ResolutionMenu& menu);

/// Smallest supported size >= r, clamped to the largest. Throws EmptySupportedSet.
int round_to_supported(double r, std::span<const int> supported);

/// Argmax class; ties go to the lower resolution.
SufficiencyLabel select_discrete(const ClassifierHead& head, std::span<const double> z);

struct ContinuousSelection {
  double r_continuous = 0.0;
  int r_rounded = 0;
  std::vector<double> probabilities;
};

ContinuousSelection select_continuous(const ClassifierHead& head, std::span<const double> z,
                                      std::span<const int> supported);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

/// Cross-entropy against the smoothed target (1 - eps) * onehot + eps / K,
/// with its gradient p - q.
LossAndGradient smoothed_ce_loss(std::span<const double> logits, std::size_t label, double epsilon);

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 6;
  double label_smoothing = 0.05;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Per-class loss weights; empty means uniform.
  std::vector<double> class_weights;

  void validate(std::size_t classes) const;
  nlohmann::json to_json() const;
};

struct TrainingExample {
  FeatureVector features;
  std::size_t label = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  std::size_t steps = 0;
};

struct TrainResult {
  ClassifierHead head;
  TrainReport report;
};

/// Mini-batch training over shuffled data from a zero-initialized head.
/// Deterministic for a fixed seed. Throws EmptyDataset, InconsistentDimensions.
TrainResult train_head(std::span<const TrainingExample> data, const ResolutionMenu& menu,
                       const TrainConfig& cfg);

/// Continues training an existing head.
TrainReport train_in_place(ClassifierHead& head, std::span<const TrainingExample> data,
                           const TrainConfig& cfg);

double accuracy(const ClassifierHead& head, std::span<const TrainingExample> data);

/// Head file: JSON with dim, classes, menu, weights and bias as base64 of
/// little-endian float64 (row-major), plus metadata.
void save_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead load_head(const std::filesystem::path& path);
nlohmann::json head_to_json(const ClassifierHead& head);
ClassifierHead head_from_json(const nlohmann::json& j);

}  // namespace ressel::selector
