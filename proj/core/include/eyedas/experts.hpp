#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eyedas/image.hpp"

// The four unsupervised committee members and the raw-image baseline. Each
// expert extracts one feature per frame and scores a sequence by the largest
// feature distance between consecutive frames.
namespace eyedas::experts {

inline constexpr int kMinFrames = 2;
inline constexpr int kMaxFrames = 5;
// Clusters used by the color expert.
inline constexpr int kColorClusters = 2;

enum class Expert : std::uint8_t { kBlurring = 0, kSharpness = 1, kColor = 2, kEdge = 3 };

inline constexpr std::array<Expert, 4> kAllExperts{Expert::kBlurring, Expert::kSharpness,
                                                   Expert::kColor, Expert::kEdge};

// 'B', 'S', 'C' or 'E'.
char expert_code(Expert expert) noexcept;

// A non-empty subset of the four experts, named like "B+S+C+E".
class Committee {
 public:
  static Committee full() noexcept { return Committee(0b1111); }
  static Committee of(std::initializer_list<Expert> members);
  // Parses "B+S", "BSCE", "b+c"; throws InvalidArgument on unknown letters or an empty set.
  static Committee parse(std::string_view text);
  // All 15 non-empty committees ordered by size, then by B, S, C, E precedence.
  static std::vector<Committee> all_nonempty();

  bool contains(Expert e) const noexcept { return (mask_ >> static_cast<int>(e)) & 1U; }
  int size() const noexcept;
  std::vector<Expert> members() const;
  std::string name() const;
  std::uint8_t mask() const noexcept { return mask_; }

  bool operator==(const Committee&) const = default;

 private:
  explicit Committee(std::uint8_t mask);
  std::uint8_t mask_;
};

struct SourceMeta {
  std::string city;
  std::string object_class;
  std::string track_id;
};

/// Time series of t cropped RGB frames of one tracked object.
///
/// Invariants (checked on construction): 2 <= t <= 5, every frame is RGB with
/// identical dimensions, interval_ms > 0.
class ObjectSequence {
 public:
  ObjectSequence(std::vector<Image> frames, double interval_ms,
                 std::optional<SourceMeta> meta = std::nullopt);

  const std::vector<Image>& frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return frames_.size(); }
  double interval_ms() const noexcept { return interval_ms_; }
  const std::optional<SourceMeta>& meta() const noexcept { return meta_; }
  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }

  // The first k frames as a sequence (2 <= k <= size()).
  ObjectSequence prefix(std::size_t k) const;
  ObjectSequence reversed() const;

 private:
  std::vector<Image> frames_;
  double interval_ms_;
  std::optional<SourceMeta> meta_;
};

// 3D-confidence scores of the four experts for one sequence.
struct ExpertScores {
  double b = 0.0;
  double s = 0.0;
  double c = 0.0;
  double e = 0.0;

  double operator[](Expert expert) const noexcept;
  std::array<double, 4> as_array() const noexcept { return {b, s, c, e}; }
  // The members of `committee`, in B, S, C, E order.
  std::vector<double> select(const Committee& committee) const;

  bool operator==(const ExpertScores&) const = default;
};

// Throws InvalidArgument unless all scores are finite, non-negative and c <= 0.5.
void validate(const ExpertScores& scores);

// Everything the experts need from one frame.
struct FrameFeatures {
  ScalarMap blur;
  double sharpness;
  double cluster_fraction;
  ScalarMap edges;
};

FrameFeatures extract_features(const Image& rgb);

// 1 - SSIM, clamped to [0,1]; used by the blurring, edge and raw experts.
double ssim_distance(const ScalarMap& a, const ScalarMap& b);
double ssim_distance(const Image& gray_a, const Image& gray_b);

// Pairwise distances of consecutive frames' features.
ExpertScores pair_distances(const FrameFeatures& a, const FrameFeatures& b);

double score_blurring(const ObjectSequence& seq);
double score_sharpness(const ObjectSequence& seq);
double score_color(const ObjectSequence& seq);
double score_edge(const ObjectSequence& seq);
ExpertScores score_all(const ObjectSequence& seq);

// Single-expert baseline: 1 - SSIM between consecutive gray frames, no features.
double score_raw_baseline(const ObjectSequence& seq);

// Scores of every prefix: element k - 2 holds the scores over frames 1..k.
std::vector<ExpertScores> prefix_scores(const ObjectSequence& seq);
std::vector<double> prefix_raw_baseline(const ObjectSequence& seq);

/// Running scores over a stream of frames.
///
/// Each push extracts features for the new frame only and folds its distance
/// to the previous frame into a running maximum, so cost per frame is one
/// feature extraction plus one pairwise comparison. Not thread-safe; use one
/// instance per tracked object.
class IncrementalScorer {
 public:
  // Returns the scores over all frames so far once two or more have arrived.
  std::optional<ExpertScores> push(const Image& rgb);

  std::size_t frames_seen() const noexcept { return frames_seen_; }
  void reset();

 private:
  std::optional<FrameFeatures> previous_;
  ExpertScores running_{};
  std::size_t frames_seen_ = 0;
};

}  // namespace eyedas::experts
