#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "eyedas/data.hpp"
#include "eyedas/error.hpp"
#include "eyedas/evaluation.hpp"
#include "eyedas/pipeline.hpp"

namespace {

using namespace eyedas;

constexpr int kSize = 48;

pipeline::PipelineConfig small_config() {
  pipeline::PipelineConfig c;
  c.resize_width = kSize;
  c.resize_height = kSize;
  return c;
}

gbm::TrainConfig quick_grid(std::uint64_t seed = 3) {
  gbm::TrainConfig t;
  t.n_estimators_grid = {25, 30};
  t.max_depth_grid = {2, 3};
  t.cv_folds = 3;
  t.rng_seed = seed;
  return t;
}

data::SyntheticOptions small_options() {
  data::SyntheticOptions o;
  o.size = kSize;
  return o;
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dataset_ = new data::LabeledDataset(data::generate_synthetic(24, 12, 17, small_options()));
    trained_ = new pipeline::TrainedPipeline(pipeline::train(*dataset_, quick_grid(), small_config()));
  }
  static void TearDownTestSuite() {
    delete trained_;
    delete dataset_;
  }
  static data::LabeledDataset* dataset_;
  static pipeline::TrainedPipeline* trained_;
};

data::LabeledDataset* PipelineTest::dataset_ = nullptr;
pipeline::TrainedPipeline* PipelineTest::trained_ = nullptr;

TEST_F(PipelineTest, Tpr1ThresholdKeepsEveryTraining3D) {
  const auto& p = *trained_;
  EXPECT_EQ(p.augmented, 12u);
  EXPECT_EQ(p.training_3d, 24u);
  EXPECT_EQ(p.training_2d, 24u);
  EXPECT_EQ(p.training_tpr, 1.0);
  const bool in_grid = (p.grid.best_n_estimators == 25 || p.grid.best_n_estimators == 30) &&
                       (p.grid.best_max_depth == 2 || p.grid.best_max_depth == 3);
  EXPECT_TRUE(in_grid);

  // Oracle: the threshold sits just under the lowest 3D probability of the balanced set.
  const auto rows = evaluation::balanced_rows(*dataset_, pipeline::score_dataset(*dataset_, p.config),
                                              [] {
                                                std::vector<std::size_t> v(36);
                                                std::iota(v.begin(), v.end(), 0);
                                                return v;
                                              }(),
                                              quick_grid(), p.config);
  double lowest = 1.0;
  for (const auto& r : rows) {
    if (r.label == Label::k3D) {
      lowest = std::min(lowest, gbm::predict_proba(p.model, r.at_frames(5).select(p.committee)));
    }
  }
  EXPECT_DOUBLE_EQ(p.threshold(), std::max(0.0, lowest - pipeline::kCalibrationEpsilon));
}

TEST_F(PipelineTest, TrainOnSubsetEqualsTrain) {
  std::vector<std::size_t> all(dataset_->size());
  std::iota(all.begin(), all.end(), 0);
  const auto scored = pipeline::score_dataset(*dataset_, trained_->config);
  const auto again = evaluation::train_on_subset(*dataset_, scored, all, quick_grid(), trained_->config);
  EXPECT_EQ(gbm::save(again.model), gbm::save(trained_->model));
}

TEST_F(PipelineTest, TrainingIsDeterministic) {
  const auto again = pipeline::train(*dataset_, quick_grid(), small_config());
  EXPECT_EQ(gbm::save(again.model), gbm::save(trained_->model));
}

TEST_F(PipelineTest, IncrementalAgreesWithBatch) {
  for (std::size_t i : {0u, 20u}) {
    const auto& seq = dataset_->instances[i].sequence;
    const auto verdicts = pipeline::classify_incremental(*trained_, seq);
    ASSERT_EQ(verdicts.size(), 4u);
    for (std::size_t k = 2; k <= 5; ++k) {
      const auto batch = pipeline::classify(*trained_, seq.prefix(k));
      EXPECT_EQ(verdicts[k - 2].probability_3d, batch.probability_3d);
      EXPECT_EQ(verdicts[k - 2].label, batch.label);
      EXPECT_EQ(verdicts[k - 2].frames_used, k);
    }
  }
}

TEST_F(PipelineTest, DecideMatchesModelAndThreshold) {
  const auto scores = experts::score_all(dataset_->instances[3].sequence);
  const auto v = pipeline::decide(*trained_, scores, 5);
  const double p = gbm::predict_proba(trained_->model, scores.select(experts::Committee::full()));
  EXPECT_EQ(v.probability_3d, p);
  EXPECT_EQ(v.label, p >= trained_->threshold() ? Label::k3D : Label::k2D);
}

TEST_F(PipelineTest, SessionRejectsBadStreams) {
  const auto& frames = dataset_->instances[0].sequence.frames();
  {
    pipeline::IncrementalSession s(*trained_);
    s.push(frames[0], 10.0);
    EXPECT_THROW(s.push(frames[1], 10.0), InvalidArgument);
  }
  {
    pipeline::IncrementalSession s(*trained_);
    for (int i = 0; i < 5; ++i) s.push(frames[static_cast<std::size_t>(i)], i * 200.0);
    EXPECT_THROW(s.push(frames[0], 2000.0), InvalidArgument);
  }
  {
    pipeline::IncrementalSession s(*trained_);
    s.push(frames[0], 0.0);
    EXPECT_THROW(s.push(Image(kSize + 2, kSize, 3, 0.5), 200.0), InvalidArgument);
    EXPECT_THROW(s.push(Image(kSize, kSize, 1, 0.5), 300.0), InvalidArgument);
  }
}

TEST_F(PipelineTest, ResizesForeignFrameSizes) {
  data::SyntheticOptions o = small_options();
  o.size = 64;
  const auto big = data::generate_synthetic_instance(Label::k3D, 0, 5, o);
  const auto v = pipeline::classify(*trained_, big.sequence);
  EXPECT_GE(v.probability_3d, 0.0);
  EXPECT_LE(v.probability_3d, 1.0);
  EXPECT_EQ(v.frames_used, 5u);
}

TEST_F(PipelineTest, GateCountsFollowVerdicts) {
  std::vector<pipeline::Detection> detections;
  for (std::size_t i : {0u, 1u, 12u, 13u, 14u}) {
    const auto& inst = dataset_->instances[i];
    detections.push_back({inst.id, {0, 0, kSize, kSize}, inst.sequence, inst.label});
  }
  const auto gate = pipeline::gate_detector(*trained_, detections);
  ASSERT_EQ(gate.verdicts.size(), 5u);
  EXPECT_EQ(gate.passed_2d + gate.suppressed_2d, 2u);
  EXPECT_EQ(gate.passed_3d + gate.suppressed_3d, 3u);
  EXPECT_EQ(gate.passed.size(), gate.passed_2d + gate.passed_3d);
  for (std::size_t i : gate.passed) EXPECT_EQ(gate.verdicts[i].label, Label::k3D);
}

TEST(Pipeline, FixedPolicyUsesGivenThreshold) {
  auto config = small_config();
  config.threshold_policy = pipeline::ThresholdPolicy::kFixed;
  config.fixed_threshold = 0.42;
  const auto p = pipeline::train(data::generate_synthetic(20, 10, 4, small_options()), quick_grid(), config);
  EXPECT_EQ(p.threshold(), 0.42);
}

TEST(Pipeline, PreconditionsAreChecked) {
  EXPECT_THROW(pipeline::train(data::generate_synthetic(19, 10, 4, small_options()), quick_grid(), small_config()),
               InvalidArgument);
  pipeline::PipelineConfig bad;
  bad.t_max = 6;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  gbm::GbmModel three;
  three.n_features = 3;
  EXPECT_THROW(pipeline::from_model(three), InvalidArgument);
  gbm::FeatureMatrix x(4);
  x.add_row(std::vector<double>{0, 0, 0, 0});
  EXPECT_THROW(pipeline::calibrate_threshold_tpr1(gbm::GbmModel{}, x, std::vector<int>{0}), InvalidArgument);
}

TEST(Pipeline, ClassifyRejectsSequencesLongerThanTmax) {
  auto config = small_config();
  config.t_max = 3;
  gbm::GbmModel model;
  const auto p = pipeline::from_model(model, config);
  const auto inst = data::generate_synthetic_instance(Label::k2D, 0, 1, small_options());
  EXPECT_THROW(pipeline::classify(p, inst.sequence), InvalidArgument);
  EXPECT_NO_THROW(pipeline::classify(p, inst.sequence.prefix(3)));
}

}  // namespace
