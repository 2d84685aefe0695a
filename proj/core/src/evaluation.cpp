#include "eyedas/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/parallel.hpp"
#include "eyedas/rng.hpp"

namespace eyedas::evaluation {
namespace {

using pipeline::InstanceScores;
using pipeline::PipelineConfig;
using pipeline::TrainedPipeline;

void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 (2D) or 1 (3D)");
    if (!std::isfinite(scores[i])) throw InvalidArgument("scores must be finite");
    (labels[i] == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw InvalidArgument("ROC analysis needs both 2D and 3D instances");
}

int resolve_frames(const TrainedPipeline& p, int k) {
  const int frames = k == 0 ? p.config.t_max : k;
  if (frames < experts::kMinFrames || frames > p.config.t_max) {
    throw InvalidArgument("frame count must lie in [2, t_max = " + std::to_string(p.config.t_max) + "], got " +
                          std::to_string(frames));
  }
  return frames;
}

std::vector<InstanceScores> pick(std::span<const InstanceScores> rows, std::span<const std::size_t> indices) {
  std::vector<InstanceScores> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(rows[i]);
  return out;
}

void check_scored(const data::LabeledDataset& dataset, std::span<const InstanceScores> scored) {
  if (scored.size() != dataset.size()) throw InvalidArgument("scored rows do not match the dataset");
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].id != dataset.instances[i].id) {
      throw InvalidArgument("scored row " + std::to_string(i) + " belongs to '" + scored[i].id + "', not '" +
                            dataset.instances[i].id + "'");
    }
  }
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = static_cast<double>(labels.size()) - pos;

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Counts stay integral so the area is exact up to the final division.
  double tp = 0.0, fp = 0.0, area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double score = scores[order[i]];
    const double tp_before = tp;
    const double fp_before = fp;
    for (; i < order.size() && scores[order[i]] == score; ++i) (labels[order[i]] == 1 ? tp : fp) += 1.0;
    area += (fp - fp_before) * (tp + tp_before) / 2.0;
    roc.points.push_back({score, tp / pos, fp / neg});
  }
  roc.auc = area / (pos * neg);
  return roc;
}

double Confusion::tpr() const noexcept { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
double Confusion::fpr() const noexcept { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / (fp + tn); }

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_3d = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted_3d ? c.tp : c.fn) += 1;
    } else {
      (predicted_3d ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double fpr_at_tpr1(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  double lowest_3d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) lowest_3d = std::min(lowest_3d, scores[i]);
  }
  return confusion_at(scores, labels, lowest_3d).fpr();
}

std::vector<double> probabilities(const TrainedPipeline& p, std::span<const InstanceScores> rows, int k) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(gbm::predict_proba(p.model, row.at_frames(k).select(p.committee)));
  return out;
}

EvalReport evaluate(const TrainedPipeline& p, std::span<const InstanceScores> rows, int k) {
  const int frames = resolve_frames(p, k);
  const auto probs = probabilities(p, rows, frames);
  const auto labels = pipeline::label_vector(rows);
  EvalReport report;
  report.roc = roc_auc(probs, labels);
  report.at_half = confusion_at(probs, labels, 0.5);
  report.at_calibrated = confusion_at(probs, labels, p.threshold());
  report.calibrated_threshold = p.threshold();
  report.fpr_at_tpr1 = fpr_at_tpr1(probs, labels);
  report.frames = static_cast<std::size_t>(frames);
  return report;
}

std::vector<InstanceScores> balanced_rows(const data::LabeledDataset& dataset, std::span<const InstanceScores> scored,
                                          std::span<const std::size_t> indices, const gbm::TrainConfig& train_config,
                                          const PipelineConfig& config) {
  check_scored(dataset, scored);
  std::vector<InstanceScores> rows = pick(scored, indices);
  std::vector<std::size_t> sources_2d;
  for (const std::size_t i : indices) {
    if (dataset.instances[i].label == Label::k2D) sources_2d.push_back(i);
  }
  const std::size_t n_3d = indices.size() - sources_2d.size();
  if (sources_2d.size() >= n_3d) return rows;

  const auto plan = data::parity_plan(sources_2d.size(), n_3d, pipeline::augmentation_seed(train_config.rng_seed));
  std::vector<InstanceScores> clones(plan.size());
  // Clones are scored one at a time and dropped, so their frames never pile up.
  parallel_for(plan.size(), [&](std::size_t k) {
    const auto clone =
        data::rotated_clone(dataset.instances[sources_2d[plan[k].source]], plan[k].angle_degrees, k);
    clones[k] = pipeline::score_instance(clone, config);
  });
  rows.insert(rows.end(), std::make_move_iterator(clones.begin()), std::make_move_iterator(clones.end()));
  return rows;
}

TrainedPipeline train_on_subset(const data::LabeledDataset& dataset, std::span<const InstanceScores> scored,
                                std::span<const std::size_t> indices, const gbm::TrainConfig& train_config,
                                const PipelineConfig& config, const experts::Committee& committee) {
  std::size_t n_2d = 0;
  for (const std::size_t i : indices) n_2d += dataset.instances.at(i).label == Label::k2D ? 1 : 0;
  const std::size_t n_3d = indices.size() - n_2d;
  if (n_3d < pipeline::kMinTraining3D || n_2d < pipeline::kMinTraining2D) {
    throw InvalidArgument("training subset has " + std::to_string(n_3d) + " 3D / " + std::to_string(n_2d) +
                          " 2D instances, below the minimum of " + std::to_string(pipeline::kMinTraining3D) +
                          " / " + std::to_string(pipeline::kMinTraining2D));
  }
  const auto rows = balanced_rows(dataset, scored, indices, train_config, config);
  TrainedPipeline p = pipeline::train_scored(rows, train_config, config, committee);
  p.augmented = rows.size() - indices.size();
  return p;
}

std::vector<ThresholdRow> threshold_table(std::span<const InstanceScores> train_rows,
                                          std::span<const InstanceScores> test_rows,
                                          const gbm::TrainConfig& train_config, const PipelineConfig& config,
                                          std::span<const experts::Committee> committees) {
  const auto all = experts::Committee::all_nonempty();
  if (committees.empty()) committees = all;
  const auto labels = pipeline::label_vector(test_rows);
  std::vector<ThresholdRow> rows;
  for (const auto& committee : committees) {
    const auto p = pipeline::train_scored(train_rows, train_config, config, committee);
    const auto probs = probabilities(p, test_rows, config.t_max);
    const auto half = confusion_at(probs, labels, 0.5);
    const auto calibrated = confusion_at(probs, labels, p.threshold());
    rows.push_back(ThresholdRow{committee, roc_auc(probs, labels).auc, half.tpr(), half.fpr(), p.threshold(),
                                calibrated.tpr(), calibrated.fpr(), fpr_at_tpr1(probs, labels),
                                p.grid.best_n_estimators, p.grid.best_max_depth});
  }
  return rows;
}

std::vector<TimePoint> time_sweep(const TrainedPipeline& p, std::span<const InstanceScores> test_rows,
                                  std::span<const int> frames) {
  std::vector<int> ks(frames.begin(), frames.end());
  if (ks.empty()) {
    for (int k = experts::kMinFrames; k <= p.config.t_max; ++k) ks.push_back(k);
  }
  const auto labels = pipeline::label_vector(test_rows);
  std::vector<TimePoint> out;
  for (const int k : ks) {
    if (k < experts::kMinFrames) {
      throw InvalidArgument("a decision needs at least 2 frames, got " + std::to_string(k));
    }
    const int frames_used = resolve_frames(p, k);
    const auto probs = probabilities(p, test_rows, frames_used);
    const auto calibrated = confusion_at(probs, labels, p.threshold());
    out.push_back(TimePoint{frames_used, (frames_used - 1) * p.config.interval_ms, fpr_at_tpr1(probs, labels),
                            calibrated.tpr(), calibrated.fpr(), roc_auc(probs, labels).auc});
  }
  return out;
}

std::vector<SizePoint> training_size_sweep(const data::LabeledDataset& dataset, std::span<const InstanceScores> scored,
                                           std::span<const std::size_t> sizes, std::uint64_t seed,
                                           const gbm::TrainConfig& train_config, const PipelineConfig& config) {
  check_scored(dataset, scored);
  if (sizes.empty()) throw InvalidArgument("training_size_sweep: no sizes");
  std::vector<std::size_t> pool_3d;
  std::vector<std::size_t> pool_2d;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset.instances[i].label == Label::k3D ? pool_3d : pool_2d).push_back(i);
  }
  const auto split = [](std::size_t size) {
    const auto n_2d = static_cast<std::size_t>(std::llround(static_cast<double>(size) / 3.0));
    return std::pair{size - n_2d, n_2d};
  };
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  const auto [max_3d, max_2d] = split(largest);
  // Both classes must also remain in the held-out remainder.
  if (max_3d >= pool_3d.size() || max_2d >= pool_2d.size()) {
    throw InvalidArgument("training size " + std::to_string(largest) + " needs " + std::to_string(max_3d) +
                          " 3D and " + std::to_string(max_2d) + " 2D instances plus a held-out remainder; the dataset has " +
                          std::to_string(pool_3d.size()) + " / " + std::to_string(pool_2d.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(pool_3d));
  rng.shuffle(std::span<std::size_t>(pool_2d));

  std::vector<bool> in_largest(dataset.size(), false);
  for (std::size_t i = 0; i < max_3d; ++i) in_largest[pool_3d[i]] = true;
  for (std::size_t i = 0; i < max_2d; ++i) in_largest[pool_2d[i]] = true;
  std::vector<std::size_t> test_indices;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!in_largest[i]) test_indices.push_back(i);
  }
  const auto test_rows = pick(scored, test_indices);

  std::vector<SizePoint> out;
  for (const std::size_t size : sizes) {
    const auto [n_3d, n_2d] = split(size);
    std::vector<std::size_t> train(pool_3d.begin(), pool_3d.begin() + static_cast<std::ptrdiff_t>(n_3d));
    train.insert(train.end(), pool_2d.begin(), pool_2d.begin() + static_cast<std::ptrdiff_t>(n_2d));
    std::sort(train.begin(), train.end());
    const auto p = train_on_subset(dataset, scored, train, train_config, config);
    const auto report = evaluate(p, test_rows);
    out.push_back(SizePoint{size, n_3d, n_2d, test_rows.size(), report.fpr_at_tpr1, report.at_calibrated.tpr(),
                            report.at_calibrated.fpr(), report.roc.auc});
  }
  return out;
}

std::vector<GatingRow> od_gating_table(const TrainedPipeline& p, std::span<const InstanceScores> spoofs,
                                       std::span<const DetectorRate> detectors) {
  if (spoofs.empty()) throw InvalidArgument("od_gating_table: empty spoof set");
  if (detectors.empty()) throw InvalidArgument("od_gating_table: no detectors");
  for (const auto& s : spoofs) {
    if (s.label != Label::k2D) throw InvalidArgument("od_gating_table: spoof '" + s.id + "' is not a 2D instance");
  }
  const auto probs = probabilities(p, spoofs, p.config.t_max);
  const auto share_at = [&](double threshold) {
    const auto passed = std::count_if(probs.begin(), probs.end(), [&](double v) { return v >= threshold; });
    return static_cast<double>(passed) / static_cast<double>(probs.size());
  };
  const double pass_calibrated = share_at(p.threshold());
  const double pass_half = share_at(0.5);
  std::vector<GatingRow> rows;
  for (const auto& d : detectors) {
    if (!(d.before >= 0.0 && d.before <= 1.0)) {
      throw InvalidArgument("od_gating_table: rate for '" + d.detector + "' must lie in [0,1]");
    }
    rows.push_back(
        GatingRow{d.detector, d.before, pass_calibrated, d.before * pass_calibrated, pass_half, d.before * pass_half});
  }
  return rows;
}

GeneralizationReport generalization_matrix(const data::LabeledDataset& dataset, std::span<const InstanceScores> scored,
                                           data::TagAxis axis, const gbm::TrainConfig& train_config,
                                           const PipelineConfig& config, data::SplitFloor floor) {
  check_scored(dataset, scored);
  GeneralizationReport report;
  report.axis = axis;
  const auto all_tags = data::tags(dataset, axis);
  if (all_tags.size() < 2) {
    report.warning = "fewer than two distinct tags; no complementary split exists";
    return report;
  }
  if (all_tags.size() > 16) throw InvalidArgument("generalization_matrix: more than 16 tags");
  std::vector<std::size_t> tag_index(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto tag = data::tag_of(dataset.instances[i], axis);
    tag_index[i] = static_cast<std::size_t>(std::lower_bound(all_tags.begin(), all_tags.end(), tag) - all_tags.begin());
  }
  const std::uint32_t full = (std::uint32_t{1} << all_tags.size()) - 1;
  const auto counts = [&](std::uint32_t mask) {
    std::pair<std::size_t, std::size_t> c{0, 0};  // (2D, 3D)
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if ((mask >> tag_index[i]) & 1U) (dataset.instances[i].label == Label::k2D ? c.first : c.second) += 1;
    }
    return c;
  };
  const auto meets = [&](std::uint32_t mask) {
    const auto [n2, n3] = counts(mask);
    return n2 >= floor.min_2d && n3 >= floor.min_3d;
  };

  std::vector<std::uint32_t> minimal;
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    if (!meets(mask)) continue;
    bool has_smaller = false;
    for (std::uint32_t sub = (mask - 1) & mask; sub != 0 && !has_smaller; sub = (sub - 1) & mask) {
      has_smaller = meets(sub);
    }
    if (!has_smaller) minimal.push_back(mask);
  }
  std::stable_sort(minimal.begin(), minimal.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });

  std::vector<std::string> skipped;
  for (const std::uint32_t mask : minimal) {
    GeneralizationRow row;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t t = 0; t < all_tags.size(); ++t) {
      ((mask >> t) & 1U ? row.train_tags : row.test_tags).push_back(all_tags[t]);
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) ((mask >> tag_index[i]) & 1U ? train : test).push_back(i);
    const auto test_rows = pick(scored, test);
    const auto test_labels = pipeline::label_vector(test_rows);
    const auto test_pos = std::count(test_labels.begin(), test_labels.end(), 1);
    if (test_pos == 0 || test_pos == static_cast<std::ptrdiff_t>(test_labels.size())) {
      std::string name;
      for (const auto& t : row.test_tags) name += (name.empty() ? "" : "+") + t;
      skipped.push_back(name);
      continue;
    }
    std::tie(row.train_2d, row.train_3d) = counts(mask);
    row.test_size = test.size();
    const auto p = train_on_subset(dataset, scored, train, train_config, config);
    const auto r = evaluate(p, test_rows);
    row.tpr = r.at_calibrated.tpr();
    row.fpr = r.at_calibrated.fpr();
    row.auc = r.roc.auc;
    row.fpr_at_tpr1 = r.fpr_at_tpr1;
    report.rows.push_back(std::move(row));
  }
  if (minimal.empty()) {
    report.warning = "no training tag set reaches the floor of " + std::to_string(floor.min_2d) + " 2D / " +
                     std::to_string(floor.min_3d) + " 3D instances";
  } else if (!skipped.empty()) {
    report.warning = "skipped splits whose test side holds a single class:";
    for (const auto& s : skipped) report.warning += " " + s;
  }
  return report;
}

BaselineReport baseline_comparison(const TrainedPipeline& committee_pipeline, std::span<const InstanceScores> train_rows,
                                   std::span<const InstanceScores> test_rows, const gbm::TrainConfig& train_config) {
  const int k = committee_pipeline.config.t_max;
  const auto test_labels = pipeline::label_vector(test_rows);
  BaselineReport out;
  const auto committee_probs = probabilities(committee_pipeline, test_rows, k);
  out.committee_auc = roc_auc(committee_probs, test_labels).auc;
  out.committee_fpr_at_tpr1 = fpr_at_tpr1(committee_probs, test_labels);

  std::vector<double> raw_test;
  for (const auto& r : test_rows) raw_test.push_back(r.raw_at_frames(k));
  out.raw_score_auc = roc_auc(raw_test, test_labels).auc;
  out.raw_score_fpr_at_tpr1 = fpr_at_tpr1(raw_test, test_labels);

  gbm::FeatureMatrix raw_train(1);
  for (const auto& r : train_rows) raw_train.add_row(std::array{r.raw_at_frames(k)});
  const auto train_labels = pipeline::label_vector(train_rows);
  const auto grid = gbm::grid_search_cv(raw_train, train_labels, train_config);
  const auto model = gbm::fit(raw_train, train_labels,
                              gbm::FitParams{grid.best_n_estimators, grid.best_max_depth, train_config.learning_rate,
                                             train_config.rng_seed});
  std::vector<double> raw_probs;
  for (const double v : raw_test) raw_probs.push_back(gbm::predict_proba(model, std::array{v}));
  out.raw_model_auc = roc_auc(raw_probs, test_labels).auc;
  out.raw_model_fpr_at_tpr1 = fpr_at_tpr1(raw_probs, test_labels);
  return out;
}

gbm::FeatureMatrix strided_background(const gbm::FeatureMatrix& rows, std::size_t limit) {
  if (limit == 0) throw InvalidArgument("strided_background: limit must be positive");
  if (rows.rows() <= limit) return rows;
  std::vector<std::size_t> picked(limit);
  for (std::size_t i = 0; i < limit; ++i) picked[i] = i * rows.rows() / limit;
  return rows.select_rows(picked);
}

std::vector<AblationRow> ablation_report(const TrainedPipeline& full_pipeline,
                                         std::span<const InstanceScores> train_rows,
                                         std::span<const InstanceScores> test_rows,
                                         std::span<const ThresholdRow> committee_metrics) {
  if (!(full_pipeline.committee == experts::Committee::full())) {
    throw InvalidArgument("ablation_report: attributions need the four-expert model");
  }
  const int k = full_pipeline.config.t_max;
  const auto full = experts::Committee::full();
  const auto background =
      strided_background(pipeline::feature_matrix(train_rows, full, k), kMaxShapleyBackground);
  const auto attributions =
      explain::shapley_all(full_pipeline.model, pipeline::feature_matrix(test_rows, full, k), background);
  const auto committees = experts::Committee::all_nonempty();
  const auto table = explain::disagreement_table(attributions, committees);

  std::vector<AblationRow> rows;
  for (const auto& t : table) {
    AblationRow row{t.committee, t.rate, t.disagreeing, t.total, nan(), nan()};
    for (const auto& m : committee_metrics) {
      if (m.committee == t.committee) {
        row.fpr_at_tpr1 = m.fpr_at_tpr1;
        row.auc = m.auc;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

BenchReport bench(const TrainedPipeline& p, std::span<const experts::ObjectSequence> sequences,
                  std::size_t repetitions) {
  if (repetitions == 0) throw InvalidArgument("bench: repetitions must be at least 1");
  if (sequences.empty()) throw InvalidArgument("bench: no sequences");
  BenchReport report;
  using Clock = std::chrono::steady_clock;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (const auto& seq : sequences) {
      pipeline::IncrementalSession session(p);
      const std::size_t frames = std::min(seq.size(), static_cast<std::size_t>(p.config.t_max));
      for (std::size_t i = 0; i < frames; ++i) {
        const auto start = Clock::now();
        session.push(seq.frames()[i], static_cast<double>(i) * seq.interval_ms());
        report.frame_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
      }
    }
  }
  const double n = static_cast<double>(report.frame_ms.size());
  report.mean_ms = std::accumulate(report.frame_ms.begin(), report.frame_ms.end(), 0.0) / n;
  double squares = 0.0;
  for (const double v : report.frame_ms) squares += (v - report.mean_ms) * (v - report.mean_ms);
  report.stddev_ms = std::sqrt(squares / n);

  report.model_bytes = gbm::save(p.model).size();
  report.width = p.config.resize_width;
  report.height = p.config.resize_height;
  // Doubles alive while one frame is processed: the input and its resized copy
  // (3 planes each), gray, two blur and two edge maps (previous and current),
  // and about ten SSIM work planes.
  const std::size_t plane = static_cast<std::size_t>(report.width) * report.height * sizeof(double);
  report.working_set_bytes = plane * (3 + 3 + 1 + 4 + 10) + report.model_bytes;
  return report;
}

}  // namespace eyedas::evaluation
