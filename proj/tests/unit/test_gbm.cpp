#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "eyedas/error.hpp"
#include "eyedas/gbm.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace eyedas;
using eyedas::testing::random_dataset;
using namespace eyedas::oracles;

TEST(Gbm, OneRoundNewtonLeavesMatchHandComputation) {
  // x = 0..9, four negatives then six positives. Prior p = 0.6, so
  // g = 0.6 (y=0) or -0.4 (y=1) and h = 0.24 everywhere. The pure split at
  // 3.5 gives leaves -(4*0.6)/(4*0.24) = -2.5 and (6*0.4)/(6*0.24) = 5/3.
  gbm::FeatureMatrix x(1);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    const double v = i;
    x.add_row(std::span<const double>(&v, 1));
    y.push_back(i < 4 ? 0 : 1);
  }
  const auto model = gbm::fit(x, y, gbm::FitParams{1, 1, 0.1, 0});
  EXPECT_NEAR(model.base_score, std::log(0.6 / 0.4), 1e-12);
  ASSERT_EQ(model.trees.size(), 1u);
  const auto& nodes = model.trees[0].nodes();
  ASSERT_EQ(nodes.size(), 3u);
  EXPECT_EQ(nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(nodes[0].threshold, 3.5);
  EXPECT_NEAR(nodes[static_cast<std::size_t>(nodes[0].left)].value, -2.5, 1e-9);
  EXPECT_NEAR(nodes[static_cast<std::size_t>(nodes[0].right)].value, 5.0 / 3.0, 1e-9);
  const double margin = gbm::predict_margin(model, std::vector<double>{9.0});
  EXPECT_NEAR(margin, std::log(1.5) + 0.1 * 5.0 / 3.0, 1e-12);
}

TEST(Gbm, TrainingLossNeverIncreasesAcrossStages) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_dataset(rng, 30 + 7 * static_cast<std::size_t>(trial), 4, 0.2 * trial);
    const auto model = gbm::fit(d.x, d.y, gbm::FitParams{30, 1 + trial % 5, 0.1 + 0.05 * (trial % 4), 0});
    double previous = gbm::logistic_loss(model, d.x, d.y, 0);
    for (std::size_t t = 1; t <= model.trees.size(); ++t) {
      const double loss = gbm::logistic_loss(model, d.x, d.y, t);
      EXPECT_LE(loss, previous + 1e-15) << "trial " << trial << " stage " << t;
      previous = loss;
    }
  }
}

TEST(Gbm, PredictionEqualsRecursiveTreeWalk) {
  Rng rng(43);
  const auto d = random_dataset(rng, 120, 4, 1.0);
  const auto model = gbm::fit(d.x, d.y, gbm::FitParams{35, 4, 0.1, 0});
  for (std::size_t r = 0; r < d.x.rows(); ++r) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += walk(tree, 0, d.x.row(r));
    EXPECT_EQ(gbm::predict_margin(model, d.x.row(r)), model.base_score + model.learning_rate * sum);
    EXPECT_GT(gbm::predict_proba(model, d.x.row(r)), 0.0);
    EXPECT_LT(gbm::predict_proba(model, d.x.row(r)), 1.0);
  }
  for (const auto& tree : model.trees) EXPECT_LE(tree.depth(), 4);
}

TEST(Gbm, SaveLoadGivesBitIdenticalPredictions) {
  Rng rng(44);
  const auto d = random_dataset(rng, 200, 4, 0.3);
  auto model = gbm::fit(d.x, d.y, gbm::FitParams{40, 5, 0.1, 0});
  model.threshold = 0.3141592653589793;
  const auto bytes = gbm::save(model);
  const auto loaded = gbm::load(bytes);
  EXPECT_EQ(loaded.threshold, model.threshold);
  EXPECT_EQ(loaded.n_estimators, 40);
  for (std::size_t r = 0; r < d.x.rows(); ++r) {
    const double a = gbm::predict_margin(model, d.x.row(r));
    const double b = gbm::predict_margin(loaded, d.x.row(r));
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
  EXPECT_EQ(gbm::save(loaded), bytes);
  EXPECT_LE(bytes.size(), gbm::kModelSizeBudget);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
  EXPECT_EQ(stored, crc32_oracle(bytes.data(), bytes.size() - 4));
}

TEST(Gbm, CorruptModelsAreRejectedByKind) {
  Rng rng(45);
  const auto d = random_dataset(rng, 60, 4, 1.0);
  const auto bytes = gbm::save(gbm::fit(d.x, d.y, gbm::FitParams{5, 2, 0.1, 0}));
  const auto kind_of = [](std::vector<std::uint8_t> b) {
    try {
      gbm::load(b);
    } catch (const ModelFormatError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(kind_of(magic), static_cast<int>(ModelFormatError::Kind::kBadMagic));
  auto version = bytes;
  version[4] = 99;
  EXPECT_EQ(kind_of(version), static_cast<int>(ModelFormatError::Kind::kVersionMismatch));
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_EQ(kind_of(truncated), static_cast<int>(ModelFormatError::Kind::kTruncated));
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_EQ(kind_of(flipped), static_cast<int>(ModelFormatError::Kind::kChecksum));
}

TEST(Gbm, GridSearchCellsMatchIndependentRefits) {
  Rng rng(46);
  const auto d = random_dataset(rng, 90, 4, 0.8);
  gbm::TrainConfig config;
  config.n_estimators_grid = {3, 6};
  config.max_depth_grid = {1, 3};
  config.cv_folds = 4;
  config.rng_seed = 9;
  const auto result = gbm::grid_search_cv(d.x, d.y, config);
  ASSERT_EQ(result.table.size(), 4u);
  const auto folds = gbm::stratified_folds(d.y, 4, 9);
  for (const auto& cell : result.table) {
    double total = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train;
      for (std::size_t r = 0; r < d.y.size(); ++r) {
        if (!std::binary_search(folds[f].begin(), folds[f].end(), r)) train.push_back(r);
      }
      std::vector<int> ty;
      for (auto r : train) ty.push_back(d.y[r]);
      const auto m = gbm::fit(d.x.select_rows(train), ty, gbm::FitParams{cell.n_estimators, cell.max_depth, 0.1, 0});
      std::size_t hits = 0;
      for (auto r : folds[f]) hits += (gbm::predict_proba(m, d.x.row(r)) >= 0.5 ? 1 : 0) == d.y[r];
      const double acc = static_cast<double>(hits) / static_cast<double>(folds[f].size());
      EXPECT_DOUBLE_EQ(cell.fold_accuracy[f], acc);
      total += acc;
    }
    EXPECT_DOUBLE_EQ(cell.mean_accuracy, total / 4.0);
  }
  const auto best = std::max_element(result.table.begin(), result.table.end(),
                                     [](const auto& a, const auto& b) { return a.mean_accuracy < b.mean_accuracy; });
  EXPECT_EQ(result.best_accuracy, best->mean_accuracy);
}

TEST(Gbm, StratifiedFoldsPartitionAndBalance) {
  std::vector<int> y(50, 1);
  std::fill(y.begin(), y.begin() + 20, 0);
  const auto folds = gbm::stratified_folds(y, 10, 3);
  std::vector<int> seen(50, 0);
  for (const auto& fold : folds) {
    int pos = 0;
    for (auto i : fold) {
      ++seen[i];
      pos += y[i];
    }
    EXPECT_EQ(fold.size(), 5u);
    EXPECT_EQ(pos, 3);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(gbm::stratified_folds(y, 21, 3), InvalidArgument);
}

TEST(Gbm, FitValidatesInputs) {
  gbm::FeatureMatrix x(2);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) {
    x.add_row(std::vector<double>{double(i), 1.0});
    y.push_back(1);
  }
  EXPECT_THROW(gbm::fit(x, y, {}), InvalidArgument);
  y[0] = 0;
  EXPECT_NO_THROW(gbm::fit(x, y, {}));
  EXPECT_THROW(gbm::fit(x.select_rows(std::vector<std::size_t>{0, 1, 2}), std::vector<int>{0, 1, 1}, {}),
               InvalidArgument);
  EXPECT_THROW(gbm::fit(x, y, gbm::FitParams{5, 0, 0.1, 0}), InvalidArgument);
}

TEST(Gbm, FitIsDeterministic) {
  Rng rng(47);
  const auto d = random_dataset(rng, 80, 4, 0.5);
  EXPECT_EQ(gbm::save(gbm::fit(d.x, d.y, {})), gbm::save(gbm::fit(d.x, d.y, {})));
}

}  // namespace
