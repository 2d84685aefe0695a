#include "eyedas/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/parallel.hpp"
#include "eyedas/rng.hpp"

namespace eyedas::gbm {
namespace {

constexpr int kMinRows = 10;
constexpr double kMinGain = 1e-12;
constexpr int kMaxStepHalvings = 40;

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sample_loss(double margin, int label) noexcept {
  return label == 1 ? softplus(-margin) : softplus(margin);
}

void check_training_inputs(const FeatureMatrix& features, std::span<const int> labels) {
  if (features.cols() == 0) throw InvalidArgument("fit: feature matrix has no columns");
  if (features.rows() != labels.size()) {
    throw InvalidArgument("fit: " + std::to_string(features.rows()) + " rows but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (features.rows() < static_cast<std::size_t>(kMinRows)) {
    throw InvalidArgument("fit: need at least 10 samples, got " + std::to_string(features.rows()));
  }
  std::size_t positives = 0;
  for (const int y : labels) {
    if (y != 0 && y != 1) throw InvalidArgument("fit: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) {
    throw InvalidArgument("fit: labels contain a single class");
  }
  for (const double v : features.data()) {
    if (!std::isfinite(v)) throw InvalidArgument("fit: non-finite feature value");
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& features, std::span<const double> grad,
              std::span<const double> hess, int max_depth)
      : features_(features), grad_(grad), hess_(hess), max_depth_(max_depth) {}

  RegressionTree build() {
    std::vector<std::size_t> all(features_.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::vector<std::size_t>& rows, int depth) {
    double g_sum = 0.0;
    double h_sum = 0.0;
    for (const std::size_t r : rows) {
      g_sum += grad_[r];
      h_sum += hess_[r];
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_[id].value = h_sum > 0.0 ? -g_sum / h_sum : 0.0;

    if (depth >= max_depth_ || rows.size() < 2 * static_cast<std::size_t>(kMinSamplesPerLeaf)) return id;
    const Split split = best_split(rows, g_sum, h_sum);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (const std::size_t r : rows) {
      (features_.at(r, static_cast<std::size_t>(split.feature)) < split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].feature = split.feature;
    nodes_[id].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows, double g_sum, double h_sum) const {
    Split best;
    best.gain = kMinGain;
    const double parent = h_sum > 0.0 ? g_sum * g_sum / h_sum : 0.0;
    std::vector<std::size_t> order(rows);
    for (std::size_t f = 0; f < features_.cols(); ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = features_.at(a, f);
        const double vb = features_.at(b, f);
        return va < vb || (va == vb && a < b);
      });
      double g_left = 0.0;
      double h_left = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        g_left += grad_[order[i]];
        h_left += hess_[order[i]];
        const std::size_t n_left = i + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < static_cast<std::size_t>(kMinSamplesPerLeaf)) continue;
        if (n_right < static_cast<std::size_t>(kMinSamplesPerLeaf)) break;
        const double lo = features_.at(order[i], f);
        const double hi = features_.at(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double g_right = g_sum - g_left;
        const double h_right = h_sum - h_left;
        if (!(h_left > 0.0) || !(h_right > 0.0)) continue;
        const double gain =
            0.5 * (g_left * g_left / h_left + g_right * g_right / h_right - parent);
        if (gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;
          best = Split{static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& features_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  int max_depth_;
  std::vector<TreeNode> nodes_;
};

RegressionTree scaled(const RegressionTree& tree, double factor) {
  std::vector<TreeNode> nodes = tree.nodes();
  for (TreeNode& n : nodes) {
    if (n.is_leaf()) n.value *= factor;
  }
  return RegressionTree(std::move(nodes));
}

double mean_loss(std::span<const double> sums, double base, double lr, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) total += sample_loss(base + lr * sums[i], labels[i]);
  return total / static_cast<double>(sums.size());
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t cols) : cols_(cols) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgument("FeatureMatrix: data length does not match rows*cols");
  }
}

void FeatureMatrix::add_row(std::span<const double> values) {
  if (values.size() != cols_) {
    throw InvalidArgument("FeatureMatrix: row has " + std::to_string(values.size()) +
                          " values, expected " + std::to_string(cols_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(cols_);
  out.data_.reserve(indices.size() * cols_);
  for (const std::size_t r : indices) out.add_row(row(r));
  return out;
}

FeatureMatrix FeatureMatrix::select_cols(std::span<const std::size_t> columns) const {
  FeatureMatrix out(columns.size());
  std::vector<double> buffer(columns.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) buffer[c] = at(r, columns[c]);
    out.add_row(buffer);
  }
  return out;
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

double RegressionTree::evaluate(std::span<const double> x) const noexcept {
  if (nodes_.empty()) return 0.0;
  int id = 0;
  while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(id)].value;
}

int RegressionTree::depth() const noexcept {
  if (nodes_.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      deepest = std::max(deepest, d);
    } else {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

double sigmoid(double margin) noexcept {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double predict_margin(const GbmModel& model, std::span<const double> x, std::size_t tree_limit) {
  if (x.size() != static_cast<std::size_t>(model.n_features)) {
    throw InvalidArgument("predict: expected " + std::to_string(model.n_features) + " features, got " +
                          std::to_string(x.size()));
  }
  for (const double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("predict: non-finite feature value");
  }
  const std::size_t limit = std::min(tree_limit, model.trees.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < limit; ++t) sum += model.trees[t].evaluate(x);
  return model.base_score + model.learning_rate * sum;
}

double predict_proba(const GbmModel& model, std::span<const double> x, std::size_t tree_limit) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(sigmoid(predict_margin(model, x, tree_limit)), lo, hi);
}

double logistic_loss(const GbmModel& model, const FeatureMatrix& features,
                     std::span<const int> labels, std::size_t tree_limit) {
  double total = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    total += sample_loss(predict_margin(model, features.row(r), tree_limit), labels[r]);
  }
  return total / static_cast<double>(features.rows());
}

GbmModel fit(const FeatureMatrix& features, std::span<const int> labels, const FitParams& params) {
  check_training_inputs(features, labels);
  if (params.n_estimators < 0) throw InvalidArgument("fit: n_estimators must be >= 0");
  if (params.max_depth < 1) throw InvalidArgument("fit: max_depth must be >= 1");
  if (!(params.learning_rate > 0.0)) throw InvalidArgument("fit: learning_rate must be > 0");

  const std::size_t n = features.rows();
  const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double negatives = static_cast<double>(n) - positives;

  GbmModel model;
  model.learning_rate = params.learning_rate;
  model.base_score = std::log(positives / negatives);
  model.n_estimators = params.n_estimators;
  model.max_depth = params.max_depth;
  model.n_features = static_cast<int>(features.cols());
  model.trees.reserve(static_cast<std::size_t>(params.n_estimators));

  // Running sum of tree outputs per row, summed in stage order as predict_margin does.
  std::vector<double> sums(n, 0.0);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<double> trial(n);
  double loss = mean_loss(sums, model.base_score, model.learning_rate, labels);

  for (int stage = 0; stage < params.n_estimators; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(model.base_score + model.learning_rate * sums[i]);
      grad[i] = p - static_cast<double>(labels[i]);
      hess[i] = p * (1.0 - p);
    }
    RegressionTree tree = TreeBuilder(features, grad, hess, params.max_depth).build();

    double trial_loss = 0.0;
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = sums[i] + tree.evaluate(features.row(i));
      trial_loss = mean_loss(trial, model.base_score, model.learning_rate, labels);
      if (trial_loss <= loss) break;
      if (attempt == kMaxStepHalvings) {
        tree = scaled(tree, 0.0);
        for (std::size_t i = 0; i < n; ++i) trial[i] = sums[i] + tree.evaluate(features.row(i));
        trial_loss = mean_loss(trial, model.base_score, model.learning_rate, labels);
        break;
      }
      tree = scaled(tree, 0.5);
    }
    sums.swap(trial);
    loss = trial_loss;
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int folds,
                                                       std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < static_cast<std::size_t>(folds)) {
      throw InvalidArgument("too few samples of class " + std::to_string(c) + " (" +
                            std::to_string(by_class[c].size()) + ") for " + std::to_string(folds) +
                            "-fold stratification");
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  std::size_t dealt = 0;
  for (int c = 1; c >= 0; --c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    for (const std::size_t idx : by_class[c]) out[dealt++ % static_cast<std::size_t>(folds)].push_back(idx);
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

GridSearchResult grid_search_cv(const FeatureMatrix& features, std::span<const int> labels,
                                const TrainConfig& config) {
  if (config.n_estimators_grid.empty() || config.max_depth_grid.empty()) {
    throw InvalidArgument("grid_search_cv: empty hyperparameter grid");
  }
  if (features.rows() != labels.size()) throw InvalidArgument("grid_search_cv: rows/labels mismatch");
  std::vector<int> estimators = config.n_estimators_grid;
  std::vector<int> depths = config.max_depth_grid;
  std::sort(estimators.begin(), estimators.end());
  estimators.erase(std::unique(estimators.begin(), estimators.end()), estimators.end());
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());

  const auto folds = stratified_folds(labels, config.cv_folds, config.rng_seed);
  const int max_estimators = estimators.back();
  const std::size_t n_folds = folds.size();

  // correct[d][f][e]: held-out hits of depth d, fold f, using the first estimators[e] trees.
  // A fit with N trees contains every smaller ensemble as a prefix, so each
  // (depth, fold) is fitted once at the largest estimator count.
  std::vector<std::vector<std::vector<double>>> accuracy(
      depths.size(), std::vector<std::vector<double>>(n_folds, std::vector<double>(estimators.size())));
  parallel_for(depths.size() * n_folds, [&](std::size_t job) {
    const std::size_t d = job / n_folds;
    const std::size_t f = job % n_folds;
    std::vector<std::size_t> train_rows;
    for (std::size_t other = 0; other < n_folds; ++other) {
      if (other != f) train_rows.insert(train_rows.end(), folds[other].begin(), folds[other].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::vector<int> train_labels;
    for (const std::size_t r : train_rows) train_labels.push_back(labels[r]);
    const GbmModel model = fit(features.select_rows(train_rows), train_labels,
                               FitParams{max_estimators, depths[d], config.learning_rate, config.rng_seed});
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      std::size_t hits = 0;
      for (const std::size_t r : folds[f]) {
        const int predicted =
            predict_proba(model, features.row(r), static_cast<std::size_t>(estimators[e])) >= 0.5 ? 1 : 0;
        hits += predicted == labels[r] ? 1 : 0;
      }
      accuracy[d][f][e] = static_cast<double>(hits) / static_cast<double>(folds[f].size());
    }
  });

  GridSearchResult result;
  result.best_accuracy = -1.0;
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    for (std::size_t d = 0; d < depths.size(); ++d) {
      GridCell cell;
      cell.n_estimators = estimators[e];
      cell.max_depth = depths[d];
      double total = 0.0;
      for (std::size_t f = 0; f < n_folds; ++f) {
        cell.fold_accuracy.push_back(accuracy[d][f][e]);
        total += accuracy[d][f][e];
      }
      cell.mean_accuracy = total / static_cast<double>(n_folds);
      if (cell.mean_accuracy > result.best_accuracy) {
        result.best_accuracy = cell.mean_accuracy;
        result.best_n_estimators = cell.n_estimators;
        result.best_max_depth = cell.max_depth;
      }
      result.table.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace eyedas::gbm
