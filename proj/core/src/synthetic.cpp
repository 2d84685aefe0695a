#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eyedas/data.hpp"
#include "eyedas/error.hpp"
#include "eyedas/imaging.hpp"
#include "eyedas/parallel.hpp"
#include "eyedas/rng.hpp"

namespace eyedas::data {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Rgb {
  double r, g, b;
};

Rgb random_color(Rng& rng) { return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)}; }

struct Patch {
  int x0, y0, x1, y1;
};

// Everything both renderings of one scene share.
struct Scene {
  int size = 0;
  Rgb base{};
  std::vector<Patch> patches;
  std::vector<Rgb> patch_colors;
  std::vector<double> grain;  // fixed fine texture added to the background
  ObjectClass object_class = ObjectClass::kHuman;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  Rgb stripe_a{}, stripe_b{};
  double stripe_period = 0, stripe_angle = 0;
  std::string city;
};

Scene make_scene(Rng& rng, const SyntheticOptions& options) {
  Scene s;
  s.size = options.size;
  const double n = options.size;
  s.base = random_color(rng);
  const int patch_count = 6 + static_cast<int>(rng.index(5));
  for (int i = 0; i < patch_count; ++i) {
    const int w = static_cast<int>(rng.uniform(0.12, 0.4) * n);
    const int h = static_cast<int>(rng.uniform(0.12, 0.4) * n);
    const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(options.size - w)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(options.size - h)));
    s.patches.push_back({x0, y0, x0 + w, y0 + h});
    s.patch_colors.push_back(random_color(rng));
  }
  s.grain.resize(static_cast<std::size_t>(options.size) * options.size);
  for (auto& g : s.grain) g = rng.uniform(-0.08, 0.08);

  s.object_class = static_cast<ObjectClass>(rng.index(3));
  switch (s.object_class) {
    case ObjectClass::kHuman:
      s.rx = 0.16 * n, s.ry = 0.36 * n;
      break;
    case ObjectClass::kVehicle:
      s.rx = 0.36 * n, s.ry = 0.18 * n;
      break;
    case ObjectClass::kAnimal:
      s.rx = 0.26 * n, s.ry = 0.22 * n;
      break;
  }
  s.cx = n / 2 + rng.uniform(-0.05, 0.05) * n;
  s.cy = n / 2 + rng.uniform(-0.05, 0.05) * n;
  s.stripe_a = random_color(rng);
  s.stripe_b = random_color(rng);
  s.stripe_period = rng.uniform(4.0, 8.0);
  s.stripe_angle = rng.uniform(0.0, std::numbers::pi);
  s.city = options.cities[rng.index(options.cities.size())];
  return s;
}

Image render_background(const Scene& s, const std::vector<Rgb>& colors) {
  const int n = s.size;
  std::vector<double> px(static_cast<std::size_t>(n) * n * 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      Rgb c = s.base;
      for (std::size_t p = 0; p < s.patches.size(); ++p) {
        const auto& r = s.patches[p];
        if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1) c = colors[p];
      }
      const double g = s.grain[static_cast<std::size_t>(y) * n + x];
      double* out = &px[(static_cast<std::size_t>(y) * n + x) * 3];
      out[0] = clamp_unit(c.r + g);
      out[1] = clamp_unit(c.g + g);
      out[2] = clamp_unit(c.b + g);
    }
  }
  return Image(n, n, 3, std::move(px));
}

// The object as a premultiplied color layer and its coverage mask, displaced by (dx, dy).
std::pair<Image, Image> render_object(const Scene& s, double dx, double dy) {
  const int n = s.size;
  std::vector<double> color(static_cast<std::size_t>(n) * n * 3);
  std::vector<double> mask(static_cast<std::size_t>(n) * n);
  const double ca = std::cos(s.stripe_angle);
  const double sa = std::sin(s.stripe_angle);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = (x - s.cx - dx) / s.rx;
      const double v = (y - s.cy - dy) / s.ry;
      // One pixel of anti-aliasing across the ellipse boundary.
      const double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(s.rx, s.ry);
      const double m = std::clamp(0.5 - d, 0.0, 1.0);
      const double phase = ((x - dx) * ca + (y - dy) * sa) / s.stripe_period;
      const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * phase);
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      mask[i] = m;
      color[i * 3 + 0] = m * (s.stripe_a.r * t + s.stripe_b.r * (1 - t));
      color[i * 3 + 1] = m * (s.stripe_a.g * t + s.stripe_b.g * (1 - t));
      color[i * 3 + 2] = m * (s.stripe_a.b * t + s.stripe_b.b * (1 - t));
    }
  }
  return {Image(n, n, 3, std::move(color)), Image(n, n, 1, std::move(mask))};
}

Image composite(const Image& object, const Image& mask, const Image& background) {
  std::vector<double> px(background.data().size());
  const auto o = object.data();
  const auto m = mask.data();
  const auto b = background.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = clamp_unit(o[i] + (1.0 - m[i / 3]) * b[i]);
  return Image(background.width(), background.height(), 3, std::move(px));
}

// Camera shake: small zoom about the center plus translation, bilinear with replicated edges.
Image jitter(const Image& img, Rng& rng) {
  const double scale = rng.uniform(1.0, 1.01);
  const double tx = rng.uniform(-1.0, 1.0);
  const double ty = rng.uniform(-1.0, 1.0);
  const int w = img.width();
  const int h = img.height();
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  std::vector<double> px(img.data().size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(cx + (x - cx) / scale - tx, 0.0, w - 1.0);
      const double sy = std::clamp(cy + (y - cy) / scale - ty, 0.0, h - 1.0);
      const int x0 = std::min(static_cast<int>(sx), w - 2);
      const int y0 = std::min(static_cast<int>(sy), h - 2);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x0 + 1, y0, c) * fx;
        const double bottom = img.at(x0, y0 + 1, c) * (1 - fx) + img.at(x0 + 1, y0 + 1, c) * fx;
        px[(static_cast<std::size_t>(y) * w + x) * 3 + c] = top * (1 - fy) + bottom * fy;
      }
    }
  }
  return Image(w, h, 3, std::move(px));
}

// Exposure gain, sensor noise and 8-bit quantization, so saved frames reload bit-identically.
Image sensor(const Image& img, Rng& rng) {
  const double gain = rng.uniform(0.97, 1.03);
  std::vector<double> px(img.data().begin(), img.data().end());
  for (auto& v : px) v = std::round(clamp_unit(v * gain + rng.normal(0.0, 0.01)) * 255.0) / 255.0;
  return Image(img.width(), img.height(), 3, std::move(px));
}

std::vector<Image> render_2d(const Scene& s, Rng& rng, int frames) {
  const auto [object, mask] = render_object(s, 0.0, 0.0);
  const Image picture = composite(object, mask, render_background(s, s.patch_colors));
  const double sigma = rng.uniform(0.3, 0.9);
  std::vector<Image> out;
  for (int f = 0; f < frames; ++f) {
    const Image moved = jitter(picture, rng);
    out.push_back(sensor(imaging::gaussian_blur(moved, sigma + rng.uniform(-0.05, 0.05)), rng));
  }
  return out;
}

std::vector<Image> render_3d(const Scene& s, Rng& rng, int frames) {
  std::vector<Rgb> colors = s.patch_colors;
  const bool object_first = rng.uniform() < 0.5;
  std::vector<Image> out;
  for (int f = 0; f < frames; ++f) {
    for (auto& c : colors) {
      if (rng.uniform() < 0.5) c = random_color(rng);
    }
    const double sharp = rng.uniform(0.2, 0.5);
    const double soft = rng.uniform(1.5, 3.0);
    const bool object_in_focus = (f % 2 == 0) == object_first;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double shift = rng.uniform(1.0, 3.0);
    auto [object, mask] = render_object(s, shift * std::cos(angle), shift * std::sin(angle));
    const double object_sigma = object_in_focus ? sharp : soft;
    const double background_sigma = object_in_focus ? soft : sharp;
    const Image frame = composite(imaging::gaussian_blur(object, object_sigma),
                                  imaging::gaussian_blur(mask, object_sigma),
                                  imaging::gaussian_blur(render_background(s, colors), background_sigma));
    out.push_back(sensor(jitter(frame, rng), rng));
  }
  return out;
}

std::string make_id(Label label, std::size_t index) {
  std::string digits = std::to_string(index);
  return std::string(to_string(label)) + "_" + std::string(5 - std::min<std::size_t>(5, digits.size()), '0') +
         digits;
}

LabeledInstance make_instance(std::string id, Label label, const Scene& scene, std::vector<Image> frames,
                              const SyntheticOptions& options) {
  experts::SourceMeta meta{scene.city, std::string(to_string(scene.object_class)), id};
  return LabeledInstance{std::move(id),
                         experts::ObjectSequence(std::move(frames), options.interval_ms, meta),
                         label,
                         scene.city,
                         scene.object_class,
                         false,
                         options.crop_margin_px,
                         {},
                         std::nullopt};
}

void check_options(const SyntheticOptions& options) {
  if (options.size < 16) throw InvalidArgument("generate_synthetic: size must be at least 16");
  if (options.frames < experts::kMinFrames || options.frames > experts::kMaxFrames) {
    throw InvalidArgument("generate_synthetic: frames must lie in [2,5]");
  }
  if (options.cities.empty()) throw InvalidArgument("generate_synthetic: no cities");
}

}  // namespace

LabeledInstance generate_synthetic_instance(Label label, std::size_t index, std::uint64_t seed,
                                            const SyntheticOptions& options) {
  check_options(options);
  Rng rng(splitmix(seed ^ splitmix((static_cast<std::uint64_t>(label) << 32) + index)));
  const Scene scene = make_scene(rng, options);
  auto frames = label == Label::k2D ? render_2d(scene, rng, options.frames) : render_3d(scene, rng, options.frames);
  return make_instance(make_id(label, index), label, scene, std::move(frames), options);
}

LabeledDataset generate_synthetic(std::size_t n_3d, std::size_t n_2d, std::uint64_t seed,
                                  const SyntheticOptions& options) {
  if (n_3d == 0 || n_2d == 0) throw InvalidArgument("generate_synthetic: both class counts must be at least 1");
  check_options(options);
  const std::size_t total = n_2d + n_3d;
  std::vector<std::optional<LabeledInstance>> slots(total);
  parallel_for(total, [&](std::size_t i) {
    slots[i] = i < n_2d ? generate_synthetic_instance(Label::k2D, i, seed, options)
                        : generate_synthetic_instance(Label::k3D, i - n_2d, seed, options);
  });
  LabeledDataset out;
  out.provenance = "synthetic(n_3d=" + std::to_string(n_3d) + ", n_2d=" + std::to_string(n_2d) +
                   ", seed=" + std::to_string(seed) + ")";
  out.instances.reserve(total);
  for (auto& slot : slots) out.instances.push_back(std::move(*slot));
  return out;
}

std::pair<LabeledInstance, LabeledInstance> generate_synthetic_pair(std::uint64_t seed,
                                                                    const SyntheticOptions& options) {
  check_options(options);
  Rng scene_rng(splitmix(seed));
  const Scene scene = make_scene(scene_rng, options);
  Rng rng_3d(splitmix(seed + 1));
  Rng rng_2d(splitmix(seed + 2));
  return {make_instance(make_id(Label::k3D, 0), Label::k3D, scene, render_3d(scene, rng_3d, options.frames),
                        options),
          make_instance(make_id(Label::k2D, 0), Label::k2D, scene, render_2d(scene, rng_2d, options.frames),
                        options)};
}

}  // namespace eyedas::data
