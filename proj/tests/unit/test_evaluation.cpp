#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "eyedas/data.hpp"
#include "eyedas/error.hpp"
#include "eyedas/evaluation.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace eyedas;
using namespace eyedas::oracles;

TEST(Roc, TrapezoidEqualsPairCounting) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i == 0 ? 0 : (i == 1 ? 1 : static_cast<int>(rng.index(2)));
      // Coarse grid so ties are common.
      s[i] = std::round((rng.uniform() + 0.3 * y[i]) * 10.0) / 10.0;
    }
    EXPECT_NEAR(evaluation::roc_auc(s, y).auc, pair_counting_auc(s, y), 1e-9);
  }
}

TEST(Roc, EndpointsAndMonotonicity) {
  const std::vector<double> s{0.9, 0.1, 0.5, 0.5, 0.7};
  const std::vector<int> y{1, 0, 1, 0, 0};
  const auto roc = evaluation::roc_auc(s, y);
  EXPECT_TRUE(std::isinf(roc.points.front().threshold));
  EXPECT_EQ(roc.points.front().tpr, 0.0);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
    EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
    EXPECT_LT(roc.points[i].threshold, roc.points[i - 1].threshold);
  }
  EXPECT_THROW(evaluation::roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), InvalidArgument);
  EXPECT_THROW(evaluation::roc_auc(std::vector<double>{NAN, 0.2}, std::vector<int>{1, 0}), InvalidArgument);
}

TEST(Roc, FprAtTpr1CountsNegativesAtOrAboveLowestPositive) {
  const std::vector<double> s{0.9, 0.4, 0.4, 0.8, 0.2, 0.6};
  const std::vector<int> y{1, 1, 0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(evaluation::fpr_at_tpr1(s, y), 2.0 / 3.0);
  const auto c = evaluation::confusion_at(s, y, 0.5);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 2u);
}

pipeline::PipelineConfig tiny_config() {
  pipeline::PipelineConfig c;
  c.resize_width = 32;
  c.resize_height = 32;
  return c;
}

gbm::TrainConfig tiny_grid() {
  gbm::TrainConfig t;
  t.n_estimators_grid = {25};
  t.max_depth_grid = {2, 3};
  t.cv_folds = 3;
  t.rng_seed = 8;
  return t;
}

class Experiments : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data::SyntheticOptions o;
    o.size = 32;
    data_ = new data::LabeledDataset(data::generate_synthetic(48, 24, 31, o));
    for (std::size_t i = 0; i < data_->size(); ++i) data_->instances[i].city = i % 2 == 0 ? "NY" : "SF";
    scored_ = new std::vector<pipeline::InstanceScores>(pipeline::score_dataset(*data_, tiny_config()));
  }
  static void TearDownTestSuite() {
    delete scored_;
    delete data_;
  }
  static std::vector<std::size_t> indices(std::size_t from, std::size_t to, std::size_t step) {
    std::vector<std::size_t> v;
    for (std::size_t i = from; i < to; i += step) v.push_back(i);
    return v;
  }
  static data::LabeledDataset* data_;
  static std::vector<pipeline::InstanceScores>* scored_;
};

data::LabeledDataset* Experiments::data_ = nullptr;
std::vector<pipeline::InstanceScores>* Experiments::scored_ = nullptr;

TEST_F(Experiments, GeneralizationRowsMatchIndependentReruns) {
  const data::SplitFloor floor{10, 20};
  const auto report =
      evaluation::generalization_matrix(*data_, *scored_, data::TagAxis::kCity, tiny_grid(), tiny_config(), floor);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_TRUE(report.warning.empty());
  for (const auto& row : report.rows) {
    ASSERT_EQ(row.train_tags.size(), 1u);
    const std::set<std::string> train_tags(row.train_tags.begin(), row.train_tags.end());
    const std::set<std::string> test_tags(row.test_tags.begin(), row.test_tags.end());
    const auto split = data::split_by_tag(*data_, data::TagAxis::kCity, train_tags, test_tags, floor);
    const auto p = pipeline::train(split.train, tiny_grid(), tiny_config());
    const auto r = evaluation::evaluate(p, pipeline::score_dataset(split.test, tiny_config()));
    EXPECT_EQ(row.auc, r.roc.auc);
    EXPECT_EQ(row.fpr_at_tpr1, r.fpr_at_tpr1);
    EXPECT_EQ(row.tpr, r.at_calibrated.tpr());
    EXPECT_EQ(row.fpr, r.at_calibrated.fpr());
    EXPECT_EQ(row.test_size, split.test.size());
  }
}

TEST_F(Experiments, GeneralizationWarnsWithoutSplits) {
  auto single = *data_;
  for (auto& inst : single.instances) inst.city = "NY";
  const auto report =
      evaluation::generalization_matrix(single, *scored_, data::TagAxis::kCity, tiny_grid(), tiny_config());
  EXPECT_TRUE(report.rows.empty());
  EXPECT_FALSE(report.warning.empty());
  const auto floored =
      evaluation::generalization_matrix(*data_, *scored_, data::TagAxis::kCity, tiny_grid(), tiny_config());
  EXPECT_TRUE(floored.rows.empty());
  EXPECT_FALSE(floored.warning.empty());
}

TEST_F(Experiments, SizeSweepUsesNestedSamplesAndCommonTestSet) {
  const std::vector<std::size_t> sizes{30, 45};
  const auto points = evaluation::training_size_sweep(*data_, *scored_, sizes, 4, tiny_grid(), tiny_config());
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].n_2d, 10u);
  EXPECT_EQ(points[0].n_3d, 20u);
  EXPECT_EQ(points[1].n_2d, 15u);
  EXPECT_EQ(points[0].test_size, data_->size() - 45);
  EXPECT_EQ(points[1].test_size, points[0].test_size);
  EXPECT_EQ(evaluation::training_size_sweep(*data_, *scored_, sizes, 4, tiny_grid(), tiny_config())[1].auc,
            points[1].auc);
  const std::vector<std::size_t> too_big{72};
  EXPECT_THROW(evaluation::training_size_sweep(*data_, *scored_, too_big, 4, tiny_grid(), tiny_config()),
               InvalidArgument);
}

TEST_F(Experiments, ThresholdTableAblationAndTimeSweep) {
  const auto train_idx = indices(0, data_->size(), 2);
  const auto test_idx = indices(1, data_->size(), 2);
  const auto train_rows = evaluation::balanced_rows(*data_, *scored_, train_idx, tiny_grid(), tiny_config());
  std::vector<pipeline::InstanceScores> test_rows;
  for (auto i : test_idx) test_rows.push_back((*scored_)[i]);
  const auto p = evaluation::train_on_subset(*data_, *scored_, train_idx, tiny_grid(), tiny_config());

  const auto table = evaluation::threshold_table(train_rows, test_rows, tiny_grid(), tiny_config());
  ASSERT_EQ(table.size(), 15u);
  EXPECT_EQ(table.back().committee, experts::Committee::full());
  EXPECT_EQ(table.back().auc, evaluation::evaluate(p, test_rows).roc.auc);

  const auto ablation = evaluation::ablation_report(p, train_rows, test_rows, table);
  ASSERT_EQ(ablation.size(), 15u);
  std::size_t multi = 0;
  for (const auto& row : ablation) {
    if (row.committee.size() == 1) EXPECT_EQ(row.disagreement_rate, 0.0);
    multi += row.committee.size() > 1 ? 1 : 0;
    EXPECT_LE(row.disagreement_rate, ablation.back().disagreement_rate);
  }
  EXPECT_EQ(multi, 11u);

  const auto sweep = evaluation::time_sweep(p, test_rows);
  ASSERT_EQ(sweep.size(), 4u);
  EXPECT_EQ(sweep.front().frames, 2);
  EXPECT_EQ(sweep.back().elapsed_ms, 800.0);
  EXPECT_EQ(sweep.back().auc, evaluation::evaluate(p, test_rows).roc.auc);
  const std::vector<int> bad{1};
  EXPECT_THROW(evaluation::time_sweep(p, test_rows, bad), InvalidArgument);

  std::vector<pipeline::InstanceScores> spoofs;
  for (const auto& r : test_rows) {
    if (r.label == Label::k2D) spoofs.push_back(r);
  }
  const std::vector<evaluation::DetectorRate> detectors{{"a", 0.5}, {"b", 0.2}};
  const auto gating = evaluation::od_gating_table(p, spoofs, detectors);
  const auto probs = evaluation::probabilities(p, spoofs, 5);
  const double passed =
      static_cast<double>(std::count_if(probs.begin(), probs.end(), [&](double v) { return v >= p.threshold(); }));
  EXPECT_DOUBLE_EQ(gating[0].after_calibrated, 0.5 * passed / static_cast<double>(spoofs.size()));
  EXPECT_DOUBLE_EQ(gating[1].after_calibrated, 0.2 * passed / static_cast<double>(spoofs.size()));
  EXPECT_THROW(evaluation::od_gating_table(p, test_rows, detectors), InvalidArgument);

  const auto baseline = evaluation::baseline_comparison(p, train_rows, test_rows, tiny_grid());
  EXPECT_EQ(baseline.committee_auc, table.back().auc);
  EXPECT_GE(baseline.raw_score_auc, 0.0);
  EXPECT_LE(baseline.raw_model_auc, 1.0);

  // Writers produce parseable JSON and one CSV line per row plus a header.
  const auto csv = evaluation::to_csv(table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
  EXPECT_NO_THROW(nlohmann::json::parse(evaluation::to_json(evaluation::evaluate(p, test_rows))));
  EXPECT_NO_THROW(nlohmann::json::parse(evaluation::to_json(baseline)));
  const auto roc = evaluation::evaluate(p, test_rows).roc;
  const std::vector<evaluation::NamedCurve> curves{{"full", &roc}};
  EXPECT_NE(evaluation::roc_svg(curves, "t").find("<polyline"), std::string::npos);
}

TEST_F(Experiments, BenchReportsArithmeticMean) {
  auto config = tiny_config();
  const auto p = evaluation::train_on_subset(*data_, *scored_, indices(0, data_->size(), 1), tiny_grid(), config);
  std::vector<experts::ObjectSequence> seqs{data_->instances[0].sequence, data_->instances[30].sequence};
  EXPECT_THROW(evaluation::bench(p, seqs, 0), InvalidArgument);
  const auto report = evaluation::bench(p, seqs, 2);
  ASSERT_EQ(report.frame_ms.size(), 20u);
  const double mean = std::accumulate(report.frame_ms.begin(), report.frame_ms.end(), 0.0) / 20.0;
  EXPECT_NEAR(report.mean_ms, mean, 1e-12);
  EXPECT_TRUE(report.within_model_budget());
  EXPECT_EQ(report.width, 32);
  EXPECT_NO_THROW(nlohmann::json::parse(evaluation::to_json(report)));
}

}  // namespace
