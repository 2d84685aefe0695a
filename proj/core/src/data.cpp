#include "eyedas/data.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <fstream>
#include <map>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/image_io.hpp"
#include "eyedas/imaging.hpp"
#include "eyedas/parallel.hpp"
#include "eyedas/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace eyedas {

std::string_view to_string(Label label) noexcept { return label == Label::k3D ? "3d" : "2d"; }

Label parse_label(std::string_view text) {
  if (text == "3d" || text == "3D") return Label::k3D;
  if (text == "2d" || text == "2D") return Label::k2D;
  throw InvalidArgument("unknown label '" + std::string(text) + "' (expected \"2d\" or \"3d\")");
}

}  // namespace eyedas

namespace eyedas::data {
namespace {

constexpr std::array<std::string_view, 3> kFrameExtensions{".png", ".jpg", ".jpeg"};

std::string frame_stem(int index) {
  std::string digits = std::to_string(index);
  return "frame_" + std::string(3 - std::min<std::size_t>(3, digits.size()), '0') + digits;
}

std::optional<fs::path> find_frame(const fs::path& dir, int index) {
  for (const auto ext : kFrameExtensions) {
    fs::path candidate = dir / (frame_stem(index) + std::string(ext));
    if (fs::is_regular_file(candidate)) return candidate;
  }
  return std::nullopt;
}

template <typename T>
T required(const json& manifest, const char* key) {
  if (!manifest.contains(key)) throw DataError(std::string("manifest is missing \"") + key + "\"");
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("manifest field \"") + key + "\" has the wrong type");
  }
}

std::vector<Image> load_frames(const fs::path& dir) {
  std::vector<Image> frames;
  for (int i = 0; i < experts::kMaxFrames; ++i) {
    const auto path = find_frame(dir, i);
    if (!path) break;
    frames.push_back(io::read_image(*path));
  }
  if (find_frame(dir, experts::kMaxFrames)) {
    throw DataError("more than " + std::to_string(experts::kMaxFrames) + " frames");
  }
  if (frames.size() < static_cast<std::size_t>(experts::kMinFrames)) {
    throw DataError("need ≥ 2 frames, got " + std::to_string(frames.size()));
  }
  for (const auto& f : frames) {
    if (f.width() != frames.front().width() || f.height() != frames.front().height()) {
      throw DataError("frame dimensions differ within the sequence");
    }
  }
  return frames;
}

LabeledInstance load_instance_unchecked(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) throw DataError("missing manifest.json");
  json manifest;
  {
    std::ifstream in(manifest_path);
    try {
      manifest = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
  }

  Label label;
  ObjectClass object_class;
  try {
    label = parse_label(required<std::string>(manifest, "label"));
    object_class = parse_object_class(required<std::string>(manifest, "object_class"));
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  const auto city = required<std::string>(manifest, "city");
  const auto interval_ms = required<double>(manifest, "interval_ms");
  const auto crop_margin = required<int>(manifest, "crop_margin_px");

  std::vector<Image> frames = load_frames(dir);

  experts::SourceMeta meta{city, std::string(to_string(object_class)),
                           manifest.value("track_id", std::string())};
  LabeledInstance out{dir.filename().string(),
                      experts::ObjectSequence(std::move(frames), interval_ms, meta),
                      label,
                      city,
                      object_class,
                      manifest.value("augmented", false),
                      crop_margin,
                      manifest.value("source_id", std::string()),
                      std::nullopt};
  if (manifest.contains("rotation_deg")) out.rotation_degrees = manifest.at("rotation_deg").get<double>();
  if (out.augmented && out.label != Label::k2D) throw DataError("augmented instances must be labeled 2d");
  return out;
}

}  // namespace

std::string_view to_string(ObjectClass cls) noexcept {
  switch (cls) {
    case ObjectClass::kHuman:
      return "HU";
    case ObjectClass::kVehicle:
      return "VE";
    case ObjectClass::kAnimal:
      return "AN";
  }
  return "HU";
}

ObjectClass parse_object_class(std::string_view text) {
  if (text == "HU") return ObjectClass::kHuman;
  if (text == "VE") return ObjectClass::kVehicle;
  if (text == "AN") return ObjectClass::kAnimal;
  throw InvalidArgument("unknown object class '" + std::string(text) + "' (expected HU, VE or AN)");
}

std::size_t LabeledDataset::count(Label label) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [&](const auto& i) { return i.label == label; }));
}

LabeledInstance load_instance(const fs::path& dir) {
  const std::string id = dir.filename().string();
  try {
    return load_instance_unchecked(dir);
  } catch (const Error& e) {
    throw DataError("instance " + id + ": " + e.what());
  }
}

LabeledDataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw DataError("no instances under " + root.string());
  std::sort(dirs.begin(), dirs.end());

  std::vector<std::optional<LabeledInstance>> loaded(dirs.size());
  std::vector<std::exception_ptr> failures(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) {
    try {
      loaded[i] = load_instance(dirs[i]);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  // Report the first failure in directory order so the message is stable.
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  LabeledDataset out;
  out.provenance = "loaded from " + root.string();
  out.instances.reserve(dirs.size());
  for (auto& instance : loaded) out.instances.push_back(std::move(*instance));
  return out;
}

experts::ObjectSequence load_sequence(const fs::path& dir, double default_interval_ms) {
  const std::string id = dir.filename().string();
  try {
    if (!fs::is_directory(dir)) throw DataError("not a directory");
    double interval_ms = default_interval_ms;
    std::string track_id = id;
    if (const auto manifest_path = dir / "manifest.json"; fs::is_regular_file(manifest_path)) {
      std::ifstream in(manifest_path);
      const json manifest = json::parse(in, nullptr, false);
      if (manifest.is_discarded()) throw DataError("manifest.json is not valid JSON");
      interval_ms = manifest.value("interval_ms", default_interval_ms);
    }
    return experts::ObjectSequence(load_frames(dir), interval_ms, experts::SourceMeta{{}, {}, track_id});
  } catch (const Error& e) {
    throw DataError("instance " + id + ": " + e.what());
  }
}

void save_instance(const LabeledInstance& instance, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest{{"label", to_string(instance.label)},
                {"city", instance.city},
                {"object_class", to_string(instance.object_class)},
                {"interval_ms", instance.sequence.interval_ms()},
                {"crop_margin_px", instance.crop_margin_px}};
  if (instance.augmented) manifest["augmented"] = true;
  if (!instance.source_id.empty()) manifest["source_id"] = instance.source_id;
  if (instance.rotation_degrees) manifest["rotation_deg"] = *instance.rotation_degrees;
  if (const auto& meta = instance.sequence.meta(); meta && !meta->track_id.empty()) {
    manifest["track_id"] = meta->track_id;
  }
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  const auto& frames = instance.sequence.frames();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    io::write_png(frames[i], dir / (frame_stem(static_cast<int>(i)) + ".png"));
  }
}

void save_dataset(const LabeledDataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  std::vector<std::exception_ptr> failures(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    try {
      save_instance(dataset.instances[i], root / dataset.instances[i].id);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
}

std::vector<CloneSpec> parity_plan(std::size_t n_2d, std::size_t n_3d, std::uint64_t seed) {
  if (n_2d == 0) throw InvalidArgument("augment_to_parity: no 2D instances to clone");
  if (n_3d == 0) throw InvalidArgument("augment_to_parity: no 3D instances");
  if (n_2d > n_3d) {
    throw InvalidArgument("augment_to_parity: more 2D (" + std::to_string(n_2d) + ") than 3D (" +
                          std::to_string(n_3d) + ") instances");
  }
  Rng rng(seed);
  std::vector<CloneSpec> plan(n_3d - n_2d);
  for (auto& spec : plan) {
    spec.source = rng.index(n_2d);
    spec.angle_degrees = rng.uniform(imaging::kMinRotationDegrees, imaging::kMaxRotationDegrees);
  }
  return plan;
}

LabeledInstance rotated_clone(const LabeledInstance& source, double angle_degrees, std::size_t k) {
  if (source.label != Label::k2D) throw InvalidArgument("only 2D instances are cloned");
  std::vector<Image> frames;
  frames.reserve(source.sequence.size());
  for (const auto& frame : source.sequence.frames()) frames.push_back(imaging::rotate(frame, angle_degrees));
  std::string digits = std::to_string(k);
  return LabeledInstance{"aug_" + std::string(5 - std::min<std::size_t>(5, digits.size()), '0') + digits + "_" +
                             source.id,
                         experts::ObjectSequence(std::move(frames), source.sequence.interval_ms(),
                                                 source.sequence.meta()),
                         Label::k2D,
                         source.city,
                         source.object_class,
                         true,
                         source.crop_margin_px,
                         source.id,
                         angle_degrees};
}

LabeledDataset augment_to_parity(const LabeledDataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> originals_2d;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.instances[i].label == Label::k2D) originals_2d.push_back(i);
  }
  const auto plan = parity_plan(originals_2d.size(), dataset.count(Label::k3D), seed);

  LabeledDataset out = dataset;
  std::vector<std::optional<LabeledInstance>> clones(plan.size());
  parallel_for(plan.size(), [&](std::size_t k) {
    clones[k] = rotated_clone(dataset.instances[originals_2d[plan[k].source]], plan[k].angle_degrees, k);
  });
  out.instances.reserve(out.instances.size() + plan.size());
  for (auto& clone : clones) out.instances.push_back(std::move(*clone));
  if (!plan.empty()) out.provenance += " + " + std::to_string(plan.size()) + " rotated 2D clones";
  return out;
}

std::string tag_of(const LabeledInstance& instance, TagAxis axis) {
  return axis == TagAxis::kCity ? instance.city : std::string(to_string(instance.object_class));
}

std::vector<std::string> tags(const LabeledDataset& dataset, TagAxis axis) {
  std::set<std::string> seen;
  for (const auto& instance : dataset.instances) seen.insert(tag_of(instance, axis));
  return {seen.begin(), seen.end()};
}

TagSplit split_by_tag(const LabeledDataset& dataset, TagAxis axis, const std::set<std::string>& train_tags,
                      const std::set<std::string>& test_tags, SplitFloor floor) {
  if (train_tags.empty() || test_tags.empty()) throw InvalidArgument("split_by_tag: empty tag set");
  for (const auto& tag : train_tags) {
    if (test_tags.count(tag) != 0) throw InvalidArgument("split_by_tag: tag '" + tag + "' is on both sides");
  }
  TagSplit split;
  split.train.provenance = dataset.provenance + " [train split]";
  split.test.provenance = dataset.provenance + " [test split]";
  for (const auto& instance : dataset.instances) {
    const auto tag = tag_of(instance, axis);
    if (train_tags.count(tag) != 0) {
      split.train.instances.push_back(instance);
    } else if (test_tags.count(tag) != 0) {
      split.test.instances.push_back(instance);
    }
  }
  if (split.train.size() == 0) throw InvalidArgument("split_by_tag: training side is empty");
  if (split.test.size() == 0) throw InvalidArgument("split_by_tag: test side is empty");
  const auto n2 = split.train.count(Label::k2D);
  const auto n3 = split.train.count(Label::k3D);
  if (n2 < floor.min_2d || n3 < floor.min_3d) {
    throw InvalidArgument("split_by_tag: training side has " + std::to_string(n2) + " 2D / " +
                          std::to_string(n3) + " 3D instances, below the floor of " +
                          std::to_string(floor.min_2d) + " / " + std::to_string(floor.min_3d));
  }
  return split;
}

}  // namespace eyedas::data
