#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <set>
#include <string>

#include "eyedas/data.hpp"
#include "eyedas/error.hpp"
#include "eyedas/image_io.hpp"
#include "eyedas/imaging.hpp"
#include "support.hpp"

namespace {

using namespace eyedas;
namespace fs = std::filesystem;
using eyedas::testing::TempDir;

data::SyntheticOptions tiny() {
  data::SyntheticOptions o;
  o.size = 24;
  o.frames = 3;
  return o;
}

std::string error_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(Data, SaveLoadRoundTripIsExact) {
  TempDir dir("roundtrip");
  const auto ds = data::generate_synthetic(3, 2, 5, tiny());
  data::save_dataset(ds, dir.path());
  const auto loaded = data::load_dataset(dir.path());
  ASSERT_EQ(loaded.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    // load_dataset orders by directory name, which matches generation order here.
    const auto& a = ds.instances[i];
    const auto& b = loaded.instances[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.city, b.city);
    EXPECT_EQ(a.object_class, b.object_class);
    EXPECT_EQ(a.sequence.interval_ms(), b.sequence.interval_ms());
    ASSERT_EQ(a.sequence.size(), b.sequence.size());
    for (std::size_t f = 0; f < a.sequence.size(); ++f) EXPECT_EQ(a.sequence.frames()[f], b.sequence.frames()[f]);
  }
}

TEST(Data, SyntheticIsDeterministicAndOrdered) {
  const auto a = data::generate_synthetic(4, 3, 21, tiny());
  const auto b = data::generate_synthetic(4, 3, 21, tiny());
  ASSERT_EQ(a.size(), 7u);
  EXPECT_EQ(a.count(Label::k2D), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.instances[i].sequence.frames(), b.instances[i].sequence.frames());
    EXPECT_EQ(a.instances[i].label, i < 3 ? Label::k2D : Label::k3D);
  }
  const auto single = data::generate_synthetic_instance(Label::k3D, 2, 21, tiny());
  EXPECT_EQ(single.sequence.frames(), a.instances[5].sequence.frames());
  EXPECT_NE(data::generate_synthetic(4, 3, 22, tiny()).instances[0].sequence.frames(),
            a.instances[0].sequence.frames());
  EXPECT_THROW(data::generate_synthetic(0, 3, 1, tiny()), InvalidArgument);
}

TEST(Data, OneFrameInstanceIsRejected) {
  TempDir dir("oneframe");
  auto inst = data::generate_synthetic_instance(Label::k2D, 0, 3, tiny());
  data::save_instance(inst, dir.path() / "x");
  fs::remove(dir.path() / "x" / "frame_001.png");
  fs::remove(dir.path() / "x" / "frame_002.png");
  const auto msg = error_of([&] { data::load_dataset(dir.path()); });
  EXPECT_NE(msg.find("need ≥ 2 frames"), std::string::npos) << msg;
  EXPECT_NE(msg.find("instance x"), std::string::npos) << msg;
}

TEST(Data, CorruptPngNamesTheInstance) {
  TempDir dir("corrupt");
  data::save_instance(data::generate_synthetic_instance(Label::k3D, 0, 3, tiny()), dir.path() / "bad_one");
  {
    std::ofstream out(dir.path() / "bad_one" / "frame_001.png", std::ios::binary | std::ios::trunc);
    out << "\x89PNG\r\n\x1a\n garbage";
  }
  const auto msg = error_of([&] { data::load_dataset(dir.path()); });
  EXPECT_NE(msg.find("bad_one"), std::string::npos) << msg;
}

TEST(Data, ManifestProblemsAreDataErrors) {
  TempDir dir("manifest");
  const auto inst = data::generate_synthetic_instance(Label::k3D, 0, 3, tiny());
  data::save_instance(inst, dir.path() / "a");
  {
    std::ofstream out(dir.path() / "a" / "manifest.json", std::ios::trunc);
    out << R"({"label": "4d", "city": "NY", "object_class": "HU", "interval_ms": 200, "crop_margin_px": 0})";
  }
  EXPECT_THROW(data::load_instance(dir.path() / "a"), DataError);
  fs::remove(dir.path() / "a" / "manifest.json");
  EXPECT_THROW(data::load_instance(dir.path() / "a"), DataError);
  // Without a manifest the frames still load as an unlabeled sequence.
  EXPECT_EQ(data::load_sequence(dir.path() / "a").size(), 3u);
  EXPECT_THROW(data::load_dataset(dir.path() / "missing"), DataError);
}

TEST(Data, MismatchedFrameSizesAreRejected) {
  TempDir dir("sizes");
  data::save_instance(data::generate_synthetic_instance(Label::k3D, 0, 3, tiny()), dir.path() / "m");
  io::write_png(Image(20, 24, 3, 0.5), dir.path() / "m" / "frame_002.png");
  const auto msg = error_of([&] { data::load_instance(dir.path() / "m"); });
  EXPECT_NE(msg.find("dimensions differ"), std::string::npos) << msg;
}

TEST(Data, JpegFramesDecode) {
  TempDir dir("jpeg");
  const fs::path inst = dir.path() / "j";
  fs::create_directories(inst);
  fs::copy_file(fs::path(EYEDAS_FIXTURE_DIR) / "solid_16x16.jpg", inst / "frame_000.jpg");
  fs::copy_file(fs::path(EYEDAS_FIXTURE_DIR) / "solid_16x16_b.jpg", inst / "frame_001.jpeg");
  const auto seq = data::load_sequence(inst);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_NEAR(seq.frames()[0].at(5, 5, 0), 200.0 / 255.0, 2.5 / 255.0);
  EXPECT_NEAR(seq.frames()[1].at(5, 5, 1), 200.0 / 255.0, 2.5 / 255.0);
}

TEST(Data, AugmentReachesParityWithRotatedClones) {
  const auto ds = data::generate_synthetic(7, 3, 8, tiny());
  const auto out = data::augment_to_parity(ds, 99);
  EXPECT_EQ(out.count(Label::k2D), out.count(Label::k3D));
  ASSERT_EQ(out.size(), 14u);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(out.instances[i].id, ds.instances[i].id);
  const auto plan = data::parity_plan(3, 7, 99);
  ASSERT_EQ(plan.size(), 4u);
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& clone = out.instances[ds.size() + k];
    EXPECT_TRUE(clone.augmented);
    EXPECT_EQ(clone.label, Label::k2D);
    EXPECT_GE(*clone.rotation_degrees, 90.0);
    EXPECT_LE(*clone.rotation_degrees, 180.0);
    const auto& source = ds.instances[plan[k].source];
    EXPECT_EQ(clone.source_id, source.id);
    EXPECT_EQ(clone.sequence.frames()[1], imaging::rotate(source.sequence.frames()[1], plan[k].angle_degrees));
  }
  EXPECT_EQ(data::augment_to_parity(ds, 99).instances.back().sequence.frames(),
            out.instances.back().sequence.frames());
  EXPECT_THROW(data::augment_to_parity(data::generate_synthetic(2, 3, 8, tiny()), 1), InvalidArgument);
  EXPECT_EQ(data::augment_to_parity(data::generate_synthetic(3, 3, 8, tiny()), 1).size(), 6u);
}

TEST(Data, SplitByTagEnforcesFloorAndDisjointness) {
  auto ds = data::generate_synthetic(6, 4, 2, tiny());
  for (std::size_t i = 0; i < ds.size(); ++i) ds.instances[i].city = i % 2 == 0 ? "NY" : "SF";
  EXPECT_EQ(data::tags(ds, data::TagAxis::kCity), (std::vector<std::string>{"NY", "SF"}));
  const auto split = data::split_by_tag(ds, data::TagAxis::kCity, {"NY"}, {"SF"}, {2, 3});
  EXPECT_EQ(split.train.size(), 5u);
  EXPECT_EQ(split.test.size(), 5u);
  for (const auto& inst : split.train.instances) EXPECT_EQ(inst.city, "NY");
  EXPECT_THROW(data::split_by_tag(ds, data::TagAxis::kCity, {"NY"}, {"SF"}), InvalidArgument);
  EXPECT_THROW(data::split_by_tag(ds, data::TagAxis::kCity, {"NY"}, {"NY", "SF"}, {0, 0}), InvalidArgument);
  EXPECT_THROW(data::split_by_tag(ds, data::TagAxis::kCity, {"NY"}, {"LA"}, {0, 0}), InvalidArgument);
  EXPECT_THROW(data::split_by_tag(ds, data::TagAxis::kCity, {}, {"SF"}, {0, 0}), InvalidArgument);
}

TEST(Data, LabelAndClassParsing) {
  EXPECT_EQ(parse_label("3D"), Label::k3D);
  EXPECT_EQ(to_string(Label::k2D), "2d");
  EXPECT_THROW(parse_label("x"), InvalidArgument);
  EXPECT_EQ(data::parse_object_class("AN"), data::ObjectClass::kAnimal);
  EXPECT_EQ(data::to_string(data::ObjectClass::kVehicle), "VE");
  EXPECT_THROW(data::parse_object_class("hu"), InvalidArgument);
}

}  // namespace
