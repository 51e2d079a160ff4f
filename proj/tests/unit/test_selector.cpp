// Copyright 2026 The Ressel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ressel/error.hpp"
#include "ressel/selector.hpp"
#include "test_support.hpp"

using namespace ressel;
using selector::ClassifierHead;

namespace {

const std::vector<int> kMenuSizes = {384, 768, 1024};

double smoothed_loss_only(const std::vector<double>& logits, std::size_t label, double eps) {
  // Written out from the definition with log-sum-exp.
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  const double k = static_cast<double>(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double q = (i == label ? 1.0 - eps : 0.0) + eps / k;
    loss -= q * (logits[i] - log_z);
  }
  return loss;
}

// Gaussian clusters, one per class, `separation` apart.
std::vector<selector::TrainingExample> clusters(std::size_t n, std::size_t dim, double separation,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> centres(3, std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < 3; ++k) centres[k][k] = separation;
  std::vector<selector::TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % 3;
    std::vector<double> z(dim);
    for (std::size_t d = 0; d < dim; ++d) z[d] = centres[k][d] + normal(rng);
    out.push_back({z, k});
  }
  return out;
}

}  // namespace

TEST_CASE("logits examples and the naive matrix product oracle") {
  const auto menu = ResolutionMenu::default_menu();
  ClassifierHead zero(menu, 4);
  CHECK(zero.logits(std::vector<double>{1, 2, 3, 4}) == std::vector<double>{0, 0, 0});

  const ResolutionMenu two({384, 1024}, 384, 1024);
  ClassifierHead ident(two, 1, {1.0, 0.0}, {0.0, 0.0});
  CHECK(ident.logits(std::vector<double>{2.5}) == std::vector<double>{2.5, 0.0});

  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + rng() % 40;
    std::vector<double> w(3 * dim), b(3), z(dim);
    for (auto& v : w) v = normal(rng);
    for (auto& v : b) v = normal(rng);
    for (auto& v : z) v = normal(rng);
    ClassifierHead head(menu, dim, w, b);
    const auto got = head.logits(z);
    for (std::size_t k = 0; k < 3; ++k) {
      double expect = b[k];
      for (std::size_t d = 0; d < dim; ++d) expect += w[k * dim + d] * z[d];
      REQUIRE(std::abs(got[k] - expect) <= 1e-12 * (1.0 + std::abs(expect)));
    }
  }
  CHECK_THROWS_AS(zero.logits(std::vector<double>{1, 2}), DimensionMismatch);
  CHECK_THROWS_AS(ClassifierHead(menu, 2, {1, 2, 3}, {0, 0, 0}), DimensionMismatch);
  CHECK_THROWS_AS(ClassifierHead(menu, 1, {1, 2, 3}, {0, 0}), DimensionMismatch);
}

TEST_CASE("softmax examples") {
  const auto p = selector::softmax(std::vector<double>{0, 0, 0});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));
  for (double c : {-1e6, 0.0, 1e6}) {
    const auto s = selector::softmax(std::vector<double>{c, c + 1000, c});
    CHECK(s[1] == doctest::Approx(1.0));
    CHECK(s[0] == doctest::Approx(0.0));
  }
  const auto q = selector::softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(q[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("expected resolution and rounding") {
  const auto menu = ResolutionMenu::default_menu();
  CHECK(selector::expected_resolution(std::vector<double>{1, 0, 0}, menu) == 384.0);
  CHECK(selector::expected_resolution(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, menu) ==
        doctest::Approx(2176.0 / 3.0).epsilon(1e-12));
  CHECK(selector::expected_resolution(std::vector<double>{0.2, 0.5, 0.3}, menu) == doctest::Approx(768.0));
  CHECK_THROWS_AS(selector::expected_resolution(std::vector<double>{0.5, 0.5}, menu), DimensionMismatch);

  CHECK(selector::round_to_supported(725.3, kMenuSizes) == 768);
  CHECK(selector::round_to_supported(384.0, kMenuSizes) == 384);
  CHECK(selector::round_to_supported(1100.0, kMenuSizes) == 1024);
  CHECK(selector::round_to_supported(1.0, kMenuSizes) == 384);
  CHECK_THROWS_AS(selector::round_to_supported(500.0, std::vector<int>{}), EmptySupportedSet);
}

TEST_CASE("discrete selection with low-resolution tie-break") {
  const auto menu = ResolutionMenu::default_menu();
  auto head_with_bias = [&](std::vector<double> bias) { return ClassifierHead(menu, 1, {0, 0, 0}, bias); };
  const std::vector<double> z = {1.0};
  CHECK(selector::select_discrete(head_with_bias({5, 1, 1}), z).resolution == 384);
  CHECK(selector::select_discrete(head_with_bias({1, 1, 1}), z).resolution == 384);
  CHECK(selector::select_discrete(head_with_bias({0, 9, 9}), z).resolution == 768);
  CHECK(selector::select_discrete(head_with_bias({0, 0, 9}), z).resolution == 1024);
}

TEST_CASE("continuous selection examples and bounds") {
  const auto menu = ResolutionMenu::default_menu();
  const std::vector<double> z = {1.0};
  const ClassifierHead uniform(menu, 1, {0, 0, 0}, {0, 0, 0});
  auto sel = selector::select_continuous(uniform, z, kMenuSizes);
  CHECK(sel.r_continuous == doctest::Approx(725.3333333333).epsilon(1e-12));
  CHECK(sel.r_rounded == 768);

  std::vector<int> every;
  for (int r = 384; r <= 1024; ++r) every.push_back(r);
  CHECK(selector::select_continuous(uniform, z, every).r_rounded == 726);

  const ClassifierHead lowest(menu, 1, {0, 0, 0}, {50, 0, 0});
  CHECK(selector::select_continuous(lowest, z, kMenuSizes).r_rounded == 384);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int i = 0; i < 5000; ++i) {
    const ClassifierHead h(menu, 1, {normal(rng), normal(rng), normal(rng)}, {normal(rng), normal(rng), normal(rng)});
    const auto s = selector::select_continuous(h, std::vector<double>{normal(rng)}, every);
    REQUIRE(s.r_continuous >= 384.0);
    REQUIRE(s.r_continuous <= 1024.0);
    REQUIRE(s.r_rounded >= s.r_continuous);
    REQUIRE(s.r_rounded - s.r_continuous < 1.0);
  }
}

TEST_CASE("smoothed cross-entropy examples") {
  const auto a = selector::smoothed_ce_loss(std::vector<double>{0, 0, 0}, 0, 0.0);
  CHECK(a.loss == doctest::Approx(std::log(3.0)));
  CHECK(a.grad_logits[0] == doctest::Approx(-2.0 / 3.0));
  CHECK(a.grad_logits[1] == doctest::Approx(1.0 / 3.0));
  CHECK(a.grad_logits[2] == doctest::Approx(1.0 / 3.0));

  // With p uniform, grad = p - q, so q = p - grad.
  const auto b = selector::smoothed_ce_loss(std::vector<double>{0, 0, 0}, 0, 0.05);
  CHECK(1.0 / 3.0 - b.grad_logits[0] == doctest::Approx(0.95 + 0.05 / 3.0));
  CHECK(1.0 / 3.0 - b.grad_logits[1] == doctest::Approx(0.05 / 3.0));

  CHECK_THROWS_AS(selector::smoothed_ce_loss(std::vector<double>{0, 0, 0}, 3, 0.05), InvalidArgument);
  CHECK_THROWS_AS(selector::smoothed_ce_loss(std::vector<double>{0, 0, 0}, 0, 1.0), InvalidArgument);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_real_distribution<double> eps_dist(0.0, 0.5);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 5;
    std::vector<double> logits(k);
    for (auto& v : logits) v = normal(rng);
    const std::size_t label = rng() % k;
    const double eps = eps_dist(rng);
    const auto lg = selector::smoothed_ce_loss(logits, label, eps);
    REQUIRE(lg.loss == doctest::Approx(smoothed_loss_only(logits, label, eps)).epsilon(1e-12));
    for (std::size_t i = 0; i < k; ++i) {
      auto up = logits, down = logits;
      up[i] += h;
      down[i] -= h;
      const double fd = (smoothed_loss_only(up, label, eps) - smoothed_loss_only(down, label, eps)) / (2 * h);
      const double rel = std::abs(fd - lg.grad_logits[i]) / std::max(1e-8, std::abs(fd) + std::abs(lg.grad_logits[i]));
      REQUIRE(rel < 1e-6);
    }
  }
}

TEST_CASE("training on separable clusters") {
  const auto menu = ResolutionMenu::default_menu();
  const auto train = clusters(600, 16, 8.0, 1);
  const auto held = clusters(300, 16, 8.0, 2);
  selector::TrainConfig cfg;
  cfg.seed = 4;
  const auto result = selector::train_head(train, menu, cfg);
  CHECK(selector::accuracy(result.head, held) >= 0.95);
  CHECK(result.report.epoch_loss.size() == cfg.epochs);
  CHECK(result.report.epoch_loss.back() < result.report.epoch_loss.front());
  CHECK(result.report.steps == cfg.epochs * ((train.size() + cfg.batch_size - 1) / cfg.batch_size));

  const auto again = selector::train_head(train, menu, cfg);
  CHECK(again.head == result.head);

  cfg.optimizer = selector::Optimizer::kSgd;
  cfg.learning_rate = 0.05;
  CHECK(selector::accuracy(selector::train_head(train, menu, cfg).head, held) >= 0.95);
}

TEST_CASE("label smoothing lowers the peak confidence") {
  const auto menu = ResolutionMenu::default_menu();
  const auto train = clusters(600, 16, 8.0, 5);
  const auto held = clusters(150, 16, 8.0, 6);
  selector::TrainConfig smooth;
  smooth.epochs = 30;
  selector::TrainConfig hard = smooth;
  hard.label_smoothing = 0.0;
  const auto hs = selector::train_head(train, menu, smooth).head;
  const auto hh = selector::train_head(train, menu, hard).head;
  double max_smooth = 0.0, max_hard = 0.0;
  for (const auto& ex : held) {
    const auto ps = selector::softmax(hs.logits(ex.features));
    const auto ph = selector::softmax(hh.logits(ex.features));
    max_smooth = std::max(max_smooth, *std::max_element(ps.begin(), ps.end()));
    max_hard = std::max(max_hard, *std::max_element(ph.begin(), ph.end()));
  }
  CHECK(max_smooth < max_hard);
}

TEST_CASE("zero learning rate leaves the head unchanged") {
  const auto menu = ResolutionMenu::default_menu();
  selector::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  const std::vector<selector::TrainingExample> one = {{{1.0, -2.0}, 2}};
  CHECK(selector::train_head(one, menu, cfg).head == ClassifierHead(menu, 2));
  cfg.optimizer = selector::Optimizer::kSgd;
  ClassifierHead head(menu, 2, {1, 2, 3, 4, 5, 6}, {1, 1, 1});
  const auto before = head;
  selector::train_in_place(head, one, cfg);
  CHECK(head == before);
}

TEST_CASE("training input validation") {
  const auto menu = ResolutionMenu::default_menu();
  selector::TrainConfig cfg;
  CHECK_THROWS_AS(selector::train_head({}, menu, cfg), EmptyDataset);
  const std::vector<selector::TrainingExample> ragged = {{{1.0, 2.0}, 0}, {{1.0}, 1}};
  CHECK_THROWS_AS(selector::train_head(ragged, menu, cfg), InconsistentDimensions);
  const std::vector<selector::TrainingExample> bad_label = {{{1.0}, 7}};
  CHECK_THROWS_AS(selector::train_head(bad_label, menu, cfg), InvalidArgument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(3), InvalidArgument);
}

TEST_CASE("head file round trip") {
  testing::TempDir dir;
  const ResolutionMenu menu({384, 768, 1024}, 384, 1024, std::vector<int>{384, 420, 768, 1024});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::vector<double> w(3 * 5), b(3);
  for (auto& v : w) v = normal(rng);
  for (auto& v : b) v = normal(rng);
  ClassifierHead head(menu, 5, w, b);
  head.metadata = {{"data_checksum", "abc"}};
  selector::save_head(head, dir / "head.json");
  const auto back = selector::load_head(dir / "head.json");
  CHECK(back == head);
  CHECK(back.metadata["data_checksum"] == "abc");
  CHECK(back.menu().supported_sizes().size() == 4);

  testing::write_file(dir / "bad.json", R"({"format":"ressel-head/1","dim":2,"classes":3})");
  CHECK_THROWS(selector::load_head(dir / "bad.json"));
  CHECK_THROWS(selector::load_head(dir / "missing.json"));
}
