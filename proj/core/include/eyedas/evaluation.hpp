#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eyedas/data.hpp"
#include "eyedas/explain.hpp"
#include "eyedas/pipeline.hpp"

// Metrics and the experiment harness: ROC/AUC, threshold tables, decision-time
// and training-size sweeps, detector gating, generalization splits, the
// disagreement ablation and the latency benchmark.
namespace eyedas::evaluation {

struct RocPoint {
  double threshold;  // predict 3D iff score >= threshold
  double tpr;
  double fpr;
};

struct RocCurve {
  // Descending thresholds; the first point is (+inf, 0, 0), the last reaches (1, 1).
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// One ROC point per distinct score and the trapezoidal area. Equal scores
/// form one step, so the area equals P(s3D > s2D) + P(s3D == s2D) / 2.
/// Labels are 1 for 3D. Throws InvalidArgument unless both classes occur.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  double tpr() const noexcept;
  double fpr() const noexcept;
};

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold);

// FPR at the largest threshold that keeps TPR = 1 on this set, i.e. the share
// of 2D scores at or above the lowest 3D score.
double fpr_at_tpr1(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  RocCurve roc;
  Confusion at_half;        // threshold 0.5
  Confusion at_calibrated;  // the pipeline's own threshold
  double calibrated_threshold = 0.0;
  double fpr_at_tpr1 = 0.0;  // threshold re-derived on the evaluated set
  std::size_t frames = 0;
};

std::vector<double> probabilities(const pipeline::TrainedPipeline& pipeline,
                                  std::span<const pipeline::InstanceScores> rows, int k);

// Evaluates the pipeline on scored rows using the first k frames (default t_max).
EvalReport evaluate(const pipeline::TrainedPipeline& pipeline, std::span<const pipeline::InstanceScores> rows,
                    int k = 0);

/// Trains on `indices` of a scored dataset exactly as pipeline::train would on
/// that subset: 2D rows are cloned to parity with the same seed, only the
/// clones are scored anew, and the originals reuse `scored`.
pipeline::TrainedPipeline train_on_subset(const data::LabeledDataset& dataset,
                                          std::span<const pipeline::InstanceScores> scored,
                                          std::span<const std::size_t> indices,
                                          const gbm::TrainConfig& train_config,
                                          const pipeline::PipelineConfig& config,
                                          const experts::Committee& committee = experts::Committee::full());

// Scores for training: the subset plus freshly scored rotated clones.
std::vector<pipeline::InstanceScores> balanced_rows(const data::LabeledDataset& dataset,
                                                    std::span<const pipeline::InstanceScores> scored,
                                                    std::span<const std::size_t> indices,
                                                    const gbm::TrainConfig& train_config,
                                                    const pipeline::PipelineConfig& config);

struct ThresholdRow {
  experts::Committee committee;
  double auc = 0.0;
  double tpr_half = 0.0;
  double fpr_half = 0.0;
  double calibrated_threshold = 0.0;
  double tpr_calibrated = 0.0;
  double fpr_calibrated = 0.0;
  double fpr_at_tpr1 = 0.0;
  int n_estimators = 0;
  int max_depth = 0;
};

// Retrains the meta-classifier on each committee's features (all 15 by
// default) and reports both operating points on the test rows.
std::vector<ThresholdRow> threshold_table(std::span<const pipeline::InstanceScores> train_rows,
                                          std::span<const pipeline::InstanceScores> test_rows,
                                          const gbm::TrainConfig& train_config,
                                          const pipeline::PipelineConfig& config,
                                          std::span<const experts::Committee> committees = {});

struct TimePoint {
  int frames = 0;
  double elapsed_ms = 0.0;  // (frames - 1) * interval
  double fpr_at_tpr1 = 0.0;
  double tpr_calibrated = 0.0;
  double fpr_calibrated = 0.0;
  double auc = 0.0;
};

// One point per k in `frames` (default 2..t_max); k < 2 or k > t_max throws.
std::vector<TimePoint> time_sweep(const pipeline::TrainedPipeline& pipeline,
                                  std::span<const pipeline::InstanceScores> test_rows,
                                  std::span<const int> frames = {});

inline constexpr std::array<std::size_t, 5> kDefaultTrainingSizes{44, 88, 132, 176, 220};

struct SizePoint {
  std::size_t size = 0;
  std::size_t n_3d = 0;
  std::size_t n_2d = 0;
  std::size_t test_size = 0;
  double fpr_at_tpr1 = 0.0;
  double tpr_calibrated = 0.0;
  double fpr_calibrated = 0.0;
  double auc = 0.0;
};

/// Trains on nested random samples with a 2:1 ratio of 3D to 2D (a third of
/// each size, rounded, is 2D) and evaluates every size on the same test set:
/// all instances outside the largest sample. Throws InvalidArgument when a
/// size exceeds what the dataset can supply.
std::vector<SizePoint> training_size_sweep(const data::LabeledDataset& dataset,
                                           std::span<const pipeline::InstanceScores> scored,
                                           std::span<const std::size_t> sizes, std::uint64_t seed,
                                           const gbm::TrainConfig& train_config,
                                           const pipeline::PipelineConfig& config);

struct DetectorRate {
  std::string detector;
  double before = 1.0;  // upstream 2D misclassification rate, supplied by the caller
};

struct GatingRow {
  std::string detector;
  double before = 0.0;
  double pass_calibrated = 0.0;  // share of spoofs the pipeline passes as 3D
  double after_calibrated = 0.0;
  double pass_half = 0.0;
  double after_half = 0.0;
};

/// Each detector's spoofs reach the pipeline only when the detector was
/// fooled, so the rate after gating is before * (share passed as 3D). Rows
/// are evaluated at the pipeline threshold and at 0.5. `spoofs` must be
/// non-empty 2D rows.
std::vector<GatingRow> od_gating_table(const pipeline::TrainedPipeline& pipeline,
                                       std::span<const pipeline::InstanceScores> spoofs,
                                       std::span<const DetectorRate> detectors);

struct GeneralizationRow {
  std::vector<std::string> train_tags;
  std::vector<std::string> test_tags;
  std::size_t train_2d = 0;
  std::size_t train_3d = 0;
  std::size_t test_size = 0;
  double tpr = 0.0;  // at the calibrated threshold
  double fpr = 0.0;
  double auc = 0.0;
  double fpr_at_tpr1 = 0.0;
};

struct GeneralizationReport {
  data::TagAxis axis = data::TagAxis::kCity;
  std::vector<GeneralizationRow> rows;
  std::string warning;  // set when no split satisfies the floor
};

/// Enumerates minimal training tag sets that satisfy the floor (no proper
/// subset does), tests on the complementary tags, and trains and evaluates
/// each split.
GeneralizationReport generalization_matrix(const data::LabeledDataset& dataset,
                                           std::span<const pipeline::InstanceScores> scored, data::TagAxis axis,
                                           const gbm::TrainConfig& train_config,
                                           const pipeline::PipelineConfig& config, data::SplitFloor floor = {});

struct BaselineReport {
  double committee_auc = 0.0;
  double committee_fpr_at_tpr1 = 0.0;
  double raw_score_auc = 0.0;  // the raw expert's score used directly
  double raw_score_fpr_at_tpr1 = 0.0;
  double raw_model_auc = 0.0;  // a meta-classifier trained on the raw score alone
  double raw_model_fpr_at_tpr1 = 0.0;
};

BaselineReport baseline_comparison(const pipeline::TrainedPipeline& committee_pipeline,
                                   std::span<const pipeline::InstanceScores> train_rows,
                                   std::span<const pipeline::InstanceScores> test_rows,
                                   const gbm::TrainConfig& train_config);

struct AblationRow {
  experts::Committee committee;
  double disagreement_rate = 0.0;
  std::size_t disagreeing = 0;
  std::size_t total = 0;
  double fpr_at_tpr1 = 0.0;  // from a meta-classifier retrained on the committee
  double auc = 0.0;
};

inline constexpr std::size_t kMaxShapleyBackground = 100;

/// Attributes the full model's test margins (background: up to 100 evenly
/// strided training rows) and reports, per committee, how often its members'
/// attributions take both signs, next to that committee's own test metrics.
std::vector<AblationRow> ablation_report(const pipeline::TrainedPipeline& full_pipeline,
                                         std::span<const pipeline::InstanceScores> train_rows,
                                         std::span<const pipeline::InstanceScores> test_rows,
                                         std::span<const ThresholdRow> committee_metrics);

// Evenly strided rows, at most `limit` of them.
gbm::FeatureMatrix strided_background(const gbm::FeatureMatrix& rows, std::size_t limit);

inline constexpr double kLatencyTargetMs = 19.0;

struct BenchReport {
  std::vector<double> frame_ms;  // one sample per incremental frame
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::size_t model_bytes = 0;
  std::size_t model_budget_bytes = gbm::kModelSizeBudget;
  std::size_t working_set_bytes = 0;  // estimate of per-track live buffers plus the model
  int width = 0;
  int height = 0;

  bool within_model_budget() const noexcept { return model_bytes <= model_budget_bytes; }
  bool meets_latency_target() const noexcept { return mean_ms <= kLatencyTargetMs; }
};

/// Streams every sequence through a fresh incremental session `repetitions`
/// times, timing each frame push. Throws InvalidArgument for zero repetitions
/// or no sequences.
BenchReport bench(const pipeline::TrainedPipeline& pipeline, std::span<const experts::ObjectSequence> sequences,
                  std::size_t repetitions);

// Report rendering. JSON for machine-readable summaries, CSV for tables, SVG
// for ROC plots.
std::string to_json(const EvalReport& report);
std::string to_json(const gbm::GridSearchResult& grid);
std::string to_json(const BaselineReport& report);
std::string to_json(const BenchReport& report);
std::string to_json(const GeneralizationReport& report);
std::string roc_csv(const RocCurve& roc);
std::string to_csv(std::span<const ThresholdRow> rows);
std::string to_csv(std::span<const TimePoint> rows);
std::string to_csv(std::span<const SizePoint> rows);
std::string to_csv(std::span<const GatingRow> rows);
std::string to_csv(const GeneralizationReport& report);
std::string to_csv(std::span<const AblationRow> rows);

struct NamedCurve {
  std::string name;
  const RocCurve* curve;
};
std::string roc_svg(std::span<const NamedCurve> curves, const std::string& title);

// Writes text to a file, creating parent directories. Throws Error on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace eyedas::evaluation
