#include "eyedas/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/imaging.hpp"
#include "eyedas/parallel.hpp"

namespace eyedas::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Image fit_frame(const Image& frame, const PipelineConfig& config) {
  if (frame.width() == config.resize_width && frame.height() == config.resize_height) return frame;
  return imaging::resize(frame, config.resize_width, config.resize_height);
}

experts::ObjectSequence prepare(const experts::ObjectSequence& seq, const PipelineConfig& config) {
  const std::size_t keep = std::min(seq.size(), static_cast<std::size_t>(config.t_max));
  std::vector<Image> frames;
  frames.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) frames.push_back(fit_frame(seq.frames()[i], config));
  return experts::ObjectSequence(std::move(frames), seq.interval_ms(), seq.meta());
}

std::pair<double, double> rates_at(const gbm::GbmModel& model, const gbm::FeatureMatrix& x,
                                   std::span<const int> y, double threshold) {
  std::size_t tp = 0, pos = 0, fp = 0, neg = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const bool predicted_3d = gbm::predict_proba(model, x.row(r)) >= threshold;
    if (y[r] == 1) {
      ++pos;
      tp += predicted_3d ? 1 : 0;
    } else {
      ++neg;
      fp += predicted_3d ? 1 : 0;
    }
  }
  return {pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos),
          neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg)};
}

}  // namespace

std::uint64_t augmentation_seed(std::uint64_t training_seed) noexcept {
  return training_seed ^ 0xA5A5'5A5A'0F0F'F0F0ULL;
}

void PipelineConfig::validate() const {
  if (t_max < experts::kMinFrames || t_max > experts::kMaxFrames) {
    throw InvalidArgument("t_max must lie in [2,5], got " + std::to_string(t_max));
  }
  if (!(interval_ms > 0.0)) throw InvalidArgument("interval_ms must be positive");
  if (!(fixed_threshold >= 0.0 && fixed_threshold <= 1.0)) {
    throw InvalidArgument("fixed threshold must lie in [0,1]");
  }
  if (resize_width <= 0 || resize_height <= 0) throw InvalidArgument("resize target must be positive");
}

const experts::ExpertScores& InstanceScores::at_frames(int k) const {
  if (k < experts::kMinFrames) throw InvalidArgument("a decision needs at least 2 frames, got " + std::to_string(k));
  const std::size_t index = std::min(static_cast<std::size_t>(k - 2), prefix.size() - 1);
  return prefix[index];
}

double InstanceScores::raw_at_frames(int k) const {
  if (k < experts::kMinFrames) throw InvalidArgument("a decision needs at least 2 frames, got " + std::to_string(k));
  return raw_prefix[std::min(static_cast<std::size_t>(k - 2), raw_prefix.size() - 1)];
}

InstanceScores score_instance(const data::LabeledInstance& instance, const PipelineConfig& config) {
  const auto seq = prepare(instance.sequence, config);
  return InstanceScores{instance.id, instance.label, experts::prefix_scores(seq), experts::prefix_raw_baseline(seq)};
}

std::vector<InstanceScores> score_dataset(const data::LabeledDataset& dataset, const PipelineConfig& config) {
  config.validate();
  std::vector<InstanceScores> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) { out[i] = score_instance(dataset.instances[i], config); });
  return out;
}

gbm::FeatureMatrix feature_matrix(std::span<const InstanceScores> rows, const experts::Committee& committee,
                                  int k) {
  gbm::FeatureMatrix x(static_cast<std::size_t>(committee.size()));
  for (const auto& row : rows) x.add_row(row.at_frames(k).select(committee));
  return x;
}

std::vector<int> label_vector(std::span<const InstanceScores> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (const auto& row : rows) y.push_back(row.label == Label::k3D ? 1 : 0);
  return y;
}

TrainedPipeline from_model(gbm::GbmModel model, const PipelineConfig& config) {
  config.validate();
  TrainedPipeline p;
  if (model.n_features != static_cast<int>(experts::kAllExperts.size())) {
    throw InvalidArgument("from_model: a deployable model takes all four expert scores, this one takes " +
                          std::to_string(model.n_features));
  }
  p.model = std::move(model);
  p.config = config;
  return p;
}

double calibrate_threshold_tpr1(const gbm::GbmModel& model, const gbm::FeatureMatrix& features,
                                std::span<const int> labels) {
  if (features.rows() != labels.size()) throw InvalidArgument("calibrate_threshold_tpr1: rows/labels mismatch");
  double lowest = 2.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    if (labels[r] == 1) lowest = std::min(lowest, gbm::predict_proba(model, features.row(r)));
  }
  if (lowest > 1.0) throw InvalidArgument("calibrate_threshold_tpr1: no 3D instance in the calibration set");
  return std::max(0.0, lowest - kCalibrationEpsilon);
}

TrainedPipeline train_scored(std::span<const InstanceScores> rows, const gbm::TrainConfig& train_config,
                             const PipelineConfig& config, const experts::Committee& committee) {
  config.validate();
  const auto x = feature_matrix(rows, committee, config.t_max);
  const auto y = label_vector(rows);
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (positives == 0 || positives == y.size()) throw InvalidArgument("train: the dataset holds a single class");

  TrainedPipeline p;
  p.config = config;
  p.committee = committee;
  p.grid = gbm::grid_search_cv(x, y, train_config);
  p.model = gbm::fit(x, y,
                     gbm::FitParams{p.grid.best_n_estimators, p.grid.best_max_depth, train_config.learning_rate,
                                    train_config.rng_seed});
  p.model.threshold = config.threshold_policy == ThresholdPolicy::kTpr1 ? calibrate_threshold_tpr1(p.model, x, y)
                                                                        : config.fixed_threshold;
  std::tie(p.training_tpr, p.training_fpr) = rates_at(p.model, x, y, p.model.threshold);
  p.training_3d = positives;
  p.training_2d = y.size() - positives;
  return p;
}

TrainedPipeline train(const data::LabeledDataset& dataset, const gbm::TrainConfig& train_config,
                      const PipelineConfig& config, const experts::Committee& committee) {
  config.validate();
  const std::size_t n3 = dataset.count(Label::k3D);
  const std::size_t n2 = dataset.count(Label::k2D);
  if (n3 == 0 || n2 == 0) throw InvalidArgument("train: the dataset holds a single class");
  if (n3 < kMinTraining3D || n2 < kMinTraining2D) {
    throw InvalidArgument("train: need at least " + std::to_string(kMinTraining3D) + " 3D and " +
                          std::to_string(kMinTraining2D) + " 2D instances, got " + std::to_string(n3) + " / " +
                          std::to_string(n2));
  }
  const data::LabeledDataset balanced =
      n2 < n3 ? data::augment_to_parity(dataset, augmentation_seed(train_config.rng_seed)) : dataset;
  const auto rows = score_dataset(balanced, config);
  TrainedPipeline p = train_scored(rows, train_config, config, committee);
  p.augmented = balanced.size() - dataset.size();
  return p;
}

Verdict decide(const TrainedPipeline& pipeline, const experts::ExpertScores& scores, std::size_t frames_used) {
  const auto x = scores.select(pipeline.committee);
  Verdict v;
  v.probability_3d = gbm::predict_proba(pipeline.model, x);
  v.label = v.probability_3d >= pipeline.model.threshold ? Label::k3D : Label::k2D;
  v.frames_used = frames_used;
  return v;
}

Verdict classify(const TrainedPipeline& pipeline, const experts::ObjectSequence& seq) {
  const auto start = Clock::now();
  if (seq.size() > static_cast<std::size_t>(pipeline.config.t_max)) {
    throw InvalidArgument("classify: sequence has " + std::to_string(seq.size()) + " frames, t_max is " +
                          std::to_string(pipeline.config.t_max));
  }
  Verdict v = decide(pipeline, experts::score_all(prepare(seq, pipeline.config)), seq.size());
  v.elapsed_ms = ms_since(start);
  return v;
}

IncrementalSession::IncrementalSession(const TrainedPipeline& pipeline) : pipeline_(&pipeline) {}

std::optional<Verdict> IncrementalSession::push(const Image& frame, double timestamp_ms) {
  const auto start = Clock::now();
  if (last_timestamp_ && !(timestamp_ms > *last_timestamp_)) {
    throw InvalidArgument("frame timestamp " + std::to_string(timestamp_ms) + " ms does not follow " +
                          std::to_string(*last_timestamp_) + " ms");
  }
  if (scorer_.frames_seen() >= static_cast<std::size_t>(pipeline_->config.t_max)) {
    throw InvalidArgument("session already holds t_max = " + std::to_string(pipeline_->config.t_max) + " frames");
  }
  if (!frame.is_rgb()) throw InvalidArgument("frames must be RGB");
  // Resizing hides size changes, so they are checked on the raw input.
  if (frame_size_ && *frame_size_ != std::pair{frame.width(), frame.height()}) {
    throw InvalidArgument("frame dimensions differ from the previous frame");
  }
  const auto scores = scorer_.push(fit_frame(frame, pipeline_->config));
  last_timestamp_ = timestamp_ms;
  frame_size_ = std::pair{frame.width(), frame.height()};
  if (!scores) return std::nullopt;
  Verdict v = decide(*pipeline_, *scores, scorer_.frames_seen());
  v.elapsed_ms = ms_since(start);
  return v;
}

std::vector<Verdict> classify_incremental(const TrainedPipeline& pipeline, const experts::ObjectSequence& seq) {
  IncrementalSession session(pipeline);
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (auto v = session.push(seq.frames()[i], static_cast<double>(i) * seq.interval_ms())) out.push_back(*v);
  }
  return out;
}

GateResult gate_detector(const TrainedPipeline& pipeline, std::span<const Detection> detections) {
  GateResult result;
  result.verdicts.resize(detections.size());
  parallel_for(detections.size(),
               [&](std::size_t i) { result.verdicts[i] = classify(pipeline, detections[i].crops); });
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const bool pass = result.verdicts[i].label == Label::k3D;
    if (pass) result.passed.push_back(i);
    if (!detections[i].truth) continue;
    if (*detections[i].truth == Label::k3D) {
      (pass ? result.passed_3d : result.suppressed_3d) += 1;
    } else {
      (pass ? result.passed_2d : result.suppressed_2d) += 1;
    }
  }
  return result;
}

}  // namespace eyedas::pipeline
