#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

// Gradient-boosted regression trees on logistic loss: the meta-classifier that
// fuses the expert scores into a 2D/3D decision.
namespace eyedas::gbm {

// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t cols);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return cols_ == 0 ? 0 : data_.size() / cols_; }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<const double> data() const noexcept { return data_; }

  void add_row(std::span<const double> values);
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix select_cols(std::span<const std::size_t> columns) const;

 private:
  std::size_t cols_;
  std::vector<double> data_;
};

// Internal nodes send x[feature] < threshold left. Leaves carry an unshrunk
// Newton step; the ensemble applies the learning rate.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double evaluate(std::span<const double> x) const noexcept;
  // Number of split levels on the longest root-to-leaf path (a single leaf is 0).
  int depth() const noexcept;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct GbmModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;  // log-odds of the positive (3D) class
  int n_estimators = 0;
  int max_depth = 0;
  int n_features = 4;
  double threshold = 0.5;  // decision threshold on predict_proba
};

inline constexpr double kDefaultLearningRate = 0.1;
inline constexpr int kMinSamplesPerLeaf = 2;

// base_score + learning_rate * (sum of the first tree_limit tree outputs).
double predict_margin(const GbmModel& model, std::span<const double> x,
                      std::size_t tree_limit = SIZE_MAX);
// Logistic of the margin, clamped into the open interval (0, 1).
double predict_proba(const GbmModel& model, std::span<const double> x,
                     std::size_t tree_limit = SIZE_MAX);
double sigmoid(double margin) noexcept;

// Mean logistic loss of the first tree_limit stages on (features, labels).
double logistic_loss(const GbmModel& model, const FeatureMatrix& features,
                     std::span<const int> labels, std::size_t tree_limit = SIZE_MAX);

struct FitParams {
  int n_estimators = 25;
  int max_depth = 2;
  double learning_rate = kDefaultLearningRate;
  // Split search is exact and greedy with no random choices; the seed is kept
  // so callers record it alongside the configuration.
  std::uint64_t seed = 0;
};

/// Stagewise boosting on logistic loss (labels: 1 = 3D, 0 = 2D).
///
/// base_score is the log-odds of positive prevalence. Each stage fits a tree
/// of depth <= max_depth to the gradients by exact greedy search over sorted
/// unique feature values, maximizing the second-order loss reduction with at
/// least two samples per leaf. Leaves take the Newton step -sum(g)/sum(h). If
/// a stage would raise the training loss, its leaf values are halved until it
/// does not (zeroed as a last resort), so training loss never increases.
///
/// Throws InvalidArgument for fewer than 10 rows, a single class, or
/// non-finite features.
GbmModel fit(const FeatureMatrix& features, std::span<const int> labels, const FitParams& params);

struct TrainConfig {
  std::vector<int> n_estimators_grid{25, 30, 35, 40};
  std::vector<int> max_depth_grid{2, 3, 4, 5};
  int cv_folds = 10;
  double learning_rate = kDefaultLearningRate;
  std::uint64_t rng_seed = 0;
};

struct GridCell {
  int n_estimators = 0;
  int max_depth = 0;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracy;
};

struct GridSearchResult {
  int best_n_estimators = 0;
  int best_max_depth = 0;
  double best_accuracy = 0.0;
  std::vector<GridCell> table;  // ordered by n_estimators, then max_depth
};

// Shuffles each class with the seed and deals it round-robin into `folds`
// folds. Throws InvalidArgument if either class has fewer than `folds` rows.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, int folds,
                                                       std::uint64_t seed);

/// Stratified k-fold grid search over (n_estimators, max_depth), scored by
/// accuracy at probability 0.5. Returns the cell with the highest mean
/// accuracy; ties go to fewer estimators, then smaller depth.
GridSearchResult grid_search_cv(const FeatureMatrix& features, std::span<const int> labels,
                                const TrainConfig& config);

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelSizeBudget = 64 * 1024;

/// Serializes to the "EYDS" container: little-endian fixed-width header and
/// config block, trees in preorder, trailing CRC-32.
std::vector<std::uint8_t> save(const GbmModel& model);
// Throws ModelFormatError on bad magic, version mismatch, truncation or checksum failure.
GbmModel load(std::span<const std::uint8_t> bytes);

void save_file(const GbmModel& model, const std::filesystem::path& path);
GbmModel load_file(const std::filesystem::path& path);

}  // namespace eyedas::gbm
