#include "eyedas/experts.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <functional>

#include "eyedas/error.hpp"
#include "eyedas/imaging.hpp"

namespace eyedas::experts {
namespace {

// Largest distance between the features of consecutive frames.
template <typename Feature>
double max_consecutive(const ObjectSequence& seq, const std::function<Feature(const Image&)>& extract,
                       const std::function<double(const Feature&, const Feature&)>& distance) {
  const auto& frames = seq.frames();
  Feature previous = extract(frames[0]);
  double best = 0.0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    Feature current = extract(frames[i]);
    best = std::max(best, distance(previous, current));
    previous = std::move(current);
  }
  return best;
}

double abs_diff(const double& a, const double& b) { return std::abs(b - a); }

}  // namespace

char expert_code(Expert expert) noexcept {
  switch (expert) {
    case Expert::kBlurring: return 'B';
    case Expert::kSharpness: return 'S';
    case Expert::kColor: return 'C';
    case Expert::kEdge: return 'E';
  }
  return '?';
}

Committee::Committee(std::uint8_t mask) : mask_(mask) {
  if (mask_ == 0 || mask_ > 0b1111) throw InvalidArgument("committee must be a non-empty subset of B,S,C,E");
}

Committee Committee::of(std::initializer_list<Expert> members) {
  std::uint8_t mask = 0;
  for (const Expert e : members) mask |= static_cast<std::uint8_t>(1U << static_cast<int>(e));
  return Committee(mask);
}

Committee Committee::parse(std::string_view text) {
  std::uint8_t mask = 0;
  for (const char raw : text) {
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    if (ch == '+' || ch == ' ' || ch == ',') continue;
    bool matched = false;
    for (const Expert e : kAllExperts) {
      if (expert_code(e) == ch) {
        mask |= static_cast<std::uint8_t>(1U << static_cast<int>(e));
        matched = true;
      }
    }
    if (!matched) throw InvalidArgument("unknown expert '" + std::string(1, raw) + "' in committee \"" + std::string(text) + "\"");
  }
  return Committee(mask);
}

std::vector<Committee> Committee::all_nonempty() {
  std::vector<Committee> out;
  for (std::uint8_t mask = 1; mask <= 0b1111; ++mask) out.push_back(Committee(mask));
  std::stable_sort(out.begin(), out.end(), [](const Committee& a, const Committee& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    const auto ma = a.members();
    const auto mb = b.members();
    return std::lexicographical_compare(ma.begin(), ma.end(), mb.begin(), mb.end());
  });
  return out;
}

int Committee::size() const noexcept { return std::popcount(static_cast<unsigned>(mask_)); }

std::vector<Expert> Committee::members() const {
  std::vector<Expert> out;
  for (const Expert e : kAllExperts) {
    if (contains(e)) out.push_back(e);
  }
  return out;
}

std::string Committee::name() const {
  std::string out;
  for (const Expert e : members()) {
    if (!out.empty()) out += '+';
    out += expert_code(e);
  }
  return out;
}

ObjectSequence::ObjectSequence(std::vector<Image> frames, double interval_ms,
                               std::optional<SourceMeta> meta)
    : frames_(std::move(frames)), interval_ms_(interval_ms), meta_(std::move(meta)) {
  if (frames_.size() < static_cast<std::size_t>(kMinFrames)) {
    throw InvalidArgument("need ≥ 2 frames, got " + std::to_string(frames_.size()));
  }
  if (frames_.size() > static_cast<std::size_t>(kMaxFrames)) {
    throw InvalidArgument("at most 5 frames per sequence, got " + std::to_string(frames_.size()));
  }
  if (!(interval_ms_ > 0.0) || !std::isfinite(interval_ms_)) {
    throw InvalidArgument("interval_ms must be positive");
  }
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const Image& f = frames_[i];
    if (!f.is_rgb()) throw InvalidArgument("frame " + std::to_string(i) + " is not RGB");
    if (f.width() != frames_[0].width() || f.height() != frames_[0].height()) {
      throw InvalidArgument("frame " + std::to_string(i) + " dimensions differ from frame 0");
    }
  }
}

ObjectSequence ObjectSequence::prefix(std::size_t k) const {
  if (k < static_cast<std::size_t>(kMinFrames) || k > frames_.size()) {
    throw InvalidArgument("prefix length " + std::to_string(k) + " out of range [2," +
                          std::to_string(frames_.size()) + "]");
  }
  return ObjectSequence(std::vector<Image>(frames_.begin(), frames_.begin() + static_cast<std::ptrdiff_t>(k)),
                        interval_ms_, meta_);
}

ObjectSequence ObjectSequence::reversed() const {
  return ObjectSequence(std::vector<Image>(frames_.rbegin(), frames_.rend()), interval_ms_, meta_);
}

double ExpertScores::operator[](Expert expert) const noexcept {
  switch (expert) {
    case Expert::kBlurring: return b;
    case Expert::kSharpness: return s;
    case Expert::kColor: return c;
    case Expert::kEdge: return e;
  }
  return 0.0;
}

std::vector<double> ExpertScores::select(const Committee& committee) const {
  std::vector<double> out;
  for (const Expert ex : committee.members()) out.push_back((*this)[ex]);
  return out;
}

void validate(const ExpertScores& scores) {
  for (const double v : scores.as_array()) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("expert scores must be finite and non-negative");
  }
  if (scores.c > 0.5) throw InvalidArgument("color score exceeds 0.5");
}

FrameFeatures extract_features(const Image& rgb) {
  const Image gray = imaging::to_grayscale(rgb);
  return FrameFeatures{imaging::blur_map(gray), imaging::sharpness(gray),
                       imaging::dominant_cluster_fraction(rgb, kColorClusters),
                       imaging::edge_map(gray)};
}

double ssim_distance(const ScalarMap& a, const ScalarMap& b) {
  return clamp_unit(1.0 - imaging::ssim(a, b));
}

double ssim_distance(const Image& gray_a, const Image& gray_b) {
  return clamp_unit(1.0 - imaging::ssim(gray_a, gray_b));
}

ExpertScores pair_distances(const FrameFeatures& a, const FrameFeatures& b) {
  return ExpertScores{ssim_distance(a.blur, b.blur), std::abs(b.sharpness - a.sharpness),
                      std::abs(b.cluster_fraction - a.cluster_fraction), ssim_distance(a.edges, b.edges)};
}

double score_blurring(const ObjectSequence& seq) {
  return max_consecutive<ScalarMap>(
      seq, [](const Image& f) { return imaging::blur_map(imaging::to_grayscale(f)); },
      [](const ScalarMap& a, const ScalarMap& b) { return ssim_distance(a, b); });
}

double score_sharpness(const ObjectSequence& seq) {
  return max_consecutive<double>(
      seq, [](const Image& f) { return imaging::sharpness(imaging::to_grayscale(f)); }, abs_diff);
}

double score_color(const ObjectSequence& seq) {
  return max_consecutive<double>(
      seq, [](const Image& f) { return imaging::dominant_cluster_fraction(f, kColorClusters); }, abs_diff);
}

double score_edge(const ObjectSequence& seq) {
  return max_consecutive<ScalarMap>(
      seq, [](const Image& f) { return imaging::edge_map(imaging::to_grayscale(f)); },
      [](const ScalarMap& a, const ScalarMap& b) { return ssim_distance(a, b); });
}

ExpertScores score_all(const ObjectSequence& seq) { return prefix_scores(seq).back(); }

double score_raw_baseline(const ObjectSequence& seq) { return prefix_raw_baseline(seq).back(); }

std::vector<ExpertScores> prefix_scores(const ObjectSequence& seq) {
  IncrementalScorer scorer;
  std::vector<ExpertScores> out;
  out.reserve(seq.size() - 1);
  for (const Image& frame : seq.frames()) {
    if (auto scores = scorer.push(frame)) out.push_back(*scores);
  }
  return out;
}

std::vector<double> prefix_raw_baseline(const ObjectSequence& seq) {
  std::vector<double> out;
  Image previous = imaging::to_grayscale(seq.frames()[0]);
  double best = 0.0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    Image current = imaging::to_grayscale(seq.frames()[i]);
    best = std::max(best, ssim_distance(previous, current));
    out.push_back(best);
    previous = std::move(current);
  }
  return out;
}

std::optional<ExpertScores> IncrementalScorer::push(const Image& rgb) {
  if (previous_ && (rgb.width() != previous_->blur.width() || rgb.height() != previous_->blur.height())) {
    throw InvalidArgument("frame dimensions differ from the previous frame");
  }
  FrameFeatures current = extract_features(rgb);
  ++frames_seen_;
  if (!previous_) {
    previous_ = std::move(current);
    return std::nullopt;
  }
  const ExpertScores d = pair_distances(*previous_, current);
  running_.b = std::max(running_.b, d.b);
  running_.s = std::max(running_.s, d.s);
  running_.c = std::max(running_.c, d.c);
  running_.e = std::max(running_.e, d.e);
  previous_ = std::move(current);
  return running_;
}

void IncrementalScorer::reset() {
  previous_.reset();
  running_ = ExpertScores{};
  frames_seen_ = 0;
}

}  // namespace eyedas::experts
