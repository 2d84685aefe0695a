#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eyedas/data.hpp"
#include "eyedas/experts.hpp"
#include "eyedas/gbm.hpp"

// End-to-end classifier: expert scoring, meta-classifier training, threshold
// calibration and per-frame decisions.
namespace eyedas::pipeline {

enum class ThresholdPolicy { kFixed, kTpr1 };

struct PipelineConfig {
  int t_max = 5;
  double interval_ms = 200.0;
  ThresholdPolicy threshold_policy = ThresholdPolicy::kTpr1;
  double fixed_threshold = 0.5;  // used by ThresholdPolicy::kFixed
  // Frames of other sizes are resized before scoring.
  int resize_width = 128;
  int resize_height = 128;

  // Throws InvalidArgument unless 2 <= t_max <= 5, interval_ms > 0,
  // fixed_threshold in [0,1] and the resize target is positive.
  void validate() const;
};

struct Verdict {
  Label label = Label::k2D;
  double probability_3d = 0.0;
  std::size_t frames_used = 0;
  double elapsed_ms = 0.0;
};

// Expert scores of one labeled instance for every prefix length.
struct InstanceScores {
  std::string id;
  Label label = Label::k2D;
  std::vector<experts::ExpertScores> prefix;  // prefix[k - 2] covers frames 1..k
  std::vector<double> raw_prefix;             // raw-image baseline, same indexing

  // Scores over the first min(k, available) frames; k >= 2.
  const experts::ExpertScores& at_frames(int k) const;
  double raw_at_frames(int k) const;
};

InstanceScores score_instance(const data::LabeledInstance& instance, const PipelineConfig& config);

// Scores every instance (resized, truncated to t_max frames) in parallel.
std::vector<InstanceScores> score_dataset(const data::LabeledDataset& dataset, const PipelineConfig& config);

// Committee features of every row at k frames, in B, S, C, E order.
gbm::FeatureMatrix feature_matrix(std::span<const InstanceScores> rows, const experts::Committee& committee,
                                  int k);
std::vector<int> label_vector(std::span<const InstanceScores> rows);

// Immutable after training; safe to share between threads.
struct TrainedPipeline {
  gbm::GbmModel model;  // model.threshold is the decision threshold
  PipelineConfig config;
  experts::Committee committee = experts::Committee::full();
  gbm::GridSearchResult grid;
  // Training-set rates at the decision threshold.
  double training_tpr = 0.0;
  double training_fpr = 0.0;
  std::size_t training_2d = 0;
  std::size_t training_3d = 0;
  std::size_t augmented = 0;

  double threshold() const noexcept { return model.threshold; }
};

// Wraps a loaded model; the committee follows from its feature count (4 = full).
TrainedPipeline from_model(gbm::GbmModel model, const PipelineConfig& config = {});

inline constexpr std::size_t kMinTraining3D = 20;
inline constexpr std::size_t kMinTraining2D = 10;
inline constexpr double kCalibrationEpsilon = 1e-9;

// Seed of the augmentation stream train() derives from the training seed.
std::uint64_t augmentation_seed(std::uint64_t training_seed) noexcept;

/// Balances the classes, scores every sequence at t_max frames, grid-searches
/// and fits the meta-classifier, then sets the threshold per policy. The
/// training set doubles as the calibration set. Augmentation draws from a
/// stream derived from train_config.rng_seed.
TrainedPipeline train(const data::LabeledDataset& dataset, const gbm::TrainConfig& train_config,
                      const PipelineConfig& config,
                      const experts::Committee& committee = experts::Committee::full());

// The same, for rows that are already scored (and already balanced if wanted).
TrainedPipeline train_scored(std::span<const InstanceScores> rows, const gbm::TrainConfig& train_config,
                             const PipelineConfig& config,
                             const experts::Committee& committee = experts::Committee::full());

/// The largest threshold that still labels every 3D row as 3D: the smallest
/// 3D probability minus 1e-9, floored at 0. Labels are 1 for 3D.
double calibrate_threshold_tpr1(const gbm::GbmModel& model, const gbm::FeatureMatrix& features,
                                std::span<const int> labels);

// Applies the model and threshold to already computed scores.
Verdict decide(const TrainedPipeline& pipeline, const experts::ExpertScores& scores, std::size_t frames_used);

// Requires seq.size() <= t_max.
Verdict classify(const TrainedPipeline& pipeline, const experts::ObjectSequence& seq);

/// Per-track streaming session.
///
/// Frames must arrive with strictly increasing timestamps; a verdict over all
/// frames so far is returned from the second frame on. Each push costs one
/// feature extraction plus one pairwise comparison. Pushing more than t_max
/// frames is an error.
class IncrementalSession {
 public:
  explicit IncrementalSession(const TrainedPipeline& pipeline);

  std::optional<Verdict> push(const Image& frame, double timestamp_ms);
  std::size_t frames_seen() const noexcept { return scorer_.frames_seen(); }

 private:
  const TrainedPipeline* pipeline_;
  experts::IncrementalScorer scorer_;
  std::optional<double> last_timestamp_;
  std::optional<std::pair<int, int>> frame_size_;
};

// Verdicts after frames 2..n of seq; timestamps are spaced by seq.interval_ms().
std::vector<Verdict> classify_incremental(const TrainedPipeline& pipeline, const experts::ObjectSequence& seq);

struct BoundingBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct Detection {
  std::string id;
  BoundingBox box;
  experts::ObjectSequence crops;
  std::optional<Label> truth;  // ground truth when known, for the counters
};

struct GateResult {
  std::vector<std::size_t> passed;  // indices into the input, in order
  std::vector<Verdict> verdicts;    // one per input detection
  std::size_t passed_2d = 0;
  std::size_t suppressed_2d = 0;
  std::size_t passed_3d = 0;
  std::size_t suppressed_3d = 0;
};

// Lets a detection through iff its verdict is 3D.
GateResult gate_detector(const TrainedPipeline& pipeline, std::span<const Detection> detections);

}  // namespace eyedas::pipeline
