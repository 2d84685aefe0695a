#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eyedas/experts.hpp"
#include "eyedas/image.hpp"

namespace eyedas {

// Ground-truth or predicted nature of an object. 3D is the positive class.
enum class Label { k2D = 0, k3D = 1 };

// "2d" / "3d"
std::string_view to_string(Label label) noexcept;
Label parse_label(std::string_view text);

}  // namespace eyedas

// Dataset ingestion, on-disk layout, augmentation, tag splits and the
// synthetic sequence generator.
//
// On disk a dataset is a directory of instance directories:
//
//   root/<instance-id>/manifest.json
//   root/<instance-id>/frame_000.png ... frame_004.png
//
// manifest.json holds label ("2d" | "3d"), city, object_class ("HU" | "VE" |
// "AN"), interval_ms and crop_margin_px. Frame index order is temporal order.
namespace eyedas::data {

enum class ObjectClass { kHuman, kVehicle, kAnimal };

std::string_view to_string(ObjectClass cls) noexcept;  // "HU", "VE", "AN"
ObjectClass parse_object_class(std::string_view text);

struct LabeledInstance {
  std::string id;
  experts::ObjectSequence sequence;
  Label label = Label::k3D;
  std::string city;
  ObjectClass object_class = ObjectClass::kHuman;
  bool augmented = false;
  int crop_margin_px = 0;
  // Set on augmented clones: the original instance and the rotation applied to every frame.
  std::string source_id;
  std::optional<double> rotation_degrees;
};

struct LabeledDataset {
  std::vector<LabeledInstance> instances;
  std::string provenance;

  std::size_t size() const noexcept { return instances.size(); }
  std::size_t count(Label label) const noexcept;
};

// Loads one instance directory; the directory name becomes the id.
LabeledInstance load_instance(const std::filesystem::path& dir);
/// Loads every instance directory under root, ordered by directory name.
/// Throws DataError for a missing or empty root, a missing manifest, fewer
/// than two frames, mismatched frame sizes, unknown labels or undecodable
/// frames; messages name the offending instance.
LabeledDataset load_dataset(const std::filesystem::path& root);

/// Frames of one instance directory, manifest optional (interval_ms comes from
/// it when present). Used where labels are unknown, e.g. at classification.
experts::ObjectSequence load_sequence(const std::filesystem::path& dir, double default_interval_ms = 200.0);

// Writes manifest.json and frames as PNG (8-bit, rounded).
void save_instance(const LabeledInstance& instance, const std::filesystem::path& dir);
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& root);

/// Balances the classes by cloning 2D instances.
///
/// Clones are drawn uniformly with replacement from the original 2D
/// instances; every frame of a clone is rotated by one angle drawn uniformly
/// from [90, 180] degrees. Cloning stops when the 2D count equals the 3D
/// count. Originals are untouched and clones are appended after them.
/// Requires 2D instances and no more 2D than 3D.
LabeledDataset augment_to_parity(const LabeledDataset& dataset, std::uint64_t seed);

// One planned clone: `source` indexes the 2D instances in dataset order.
struct CloneSpec {
  std::size_t source = 0;
  double angle_degrees = 0.0;
};

// The draws augment_to_parity makes for n_2d originals and n_3d targets.
std::vector<CloneSpec> parity_plan(std::size_t n_2d, std::size_t n_3d, std::uint64_t seed);

// The k-th clone of `source`, every frame rotated by the same angle.
LabeledInstance rotated_clone(const LabeledInstance& source, double angle_degrees, std::size_t k);

enum class TagAxis { kCity, kObjectClass };

std::string tag_of(const LabeledInstance& instance, TagAxis axis);
// Sorted distinct tags present in the dataset.
std::vector<std::string> tags(const LabeledDataset& dataset, TagAxis axis);

// Minimum training-side class counts for a tag split.
struct SplitFloor {
  std::size_t min_2d = 56;
  std::size_t min_3d = 120;
};

struct TagSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Partitions by tag. Instances whose tag is in neither set are dropped.
/// Throws InvalidArgument when the tag sets overlap or are empty, when either
/// side ends up empty, or when the training side misses the floor.
TagSplit split_by_tag(const LabeledDataset& dataset, TagAxis axis,
                      const std::set<std::string>& train_tags,
                      const std::set<std::string>& test_tags, SplitFloor floor = {});

struct SyntheticOptions {
  int size = 128;
  int frames = 5;
  double interval_ms = 200.0;
  int crop_margin_px = 8;
  std::vector<std::string> cities{"NY", "SF", "DU", "MI", "LO", "LA", "GT"};
};

/// Desk-scale stand-in for recorded object tracks.
///
/// 2D instances are a planar depiction: one composed picture moved by global
/// affine jitter and a global blur shared by object and background. 3D
/// instances re-render the scene every frame: object and background take
/// independent blur levels that alternate like an auto-focus sweep,
/// background color patches churn, and the object shifts slightly against
/// the background. Output is deterministic for a seed, 2D instances first.
LabeledDataset generate_synthetic(std::size_t n_3d, std::size_t n_2d, std::uint64_t seed,
                                  const SyntheticOptions& options = {});

// Instance `index` of one class of generate_synthetic(..., seed, options).
LabeledInstance generate_synthetic_instance(Label label, std::size_t index, std::uint64_t seed,
                                            const SyntheticOptions& options = {});

// A 3D instance and a 2D instance rendered from the same base scene.
std::pair<LabeledInstance, LabeledInstance> generate_synthetic_pair(std::uint64_t seed,
                                                                    const SyntheticOptions& options = {});

}  // namespace eyedas::data
