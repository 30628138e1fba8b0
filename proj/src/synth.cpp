#include "uff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "uff/io.hpp"
#include "uff/manifest.hpp"

namespace uff {

namespace {

constexpr std::uint64_t kStreamStep = 0x9e3779b97f4a7c15ULL;

Point3 sphere_point(std::mt19937_64& rng, double radius, const Point3& center) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double x, y, z, n;
  do {
    x = gauss(rng);
    y = gauss(rng);
    z = gauss(rng);
    n = std::sqrt(x * x + y * y + z * z);
  } while (n < 1e-12);
  return {center.x + radius * x / n, center.y + radius * y / n, center.z + radius * z / n};
}

Point3 cube_point(std::mt19937_64& rng, double half) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> uv(-half, half);
  const int f = face(rng);
  const double u = uv(rng);
  const double v = uv(rng);
  const double w = (f % 2 == 0) ? half : -half;
  switch (f / 2) {
    case 0: return {w, u, v};
    case 1: return {u, w, v};
    default: return {u, v, w};
  }
}

// Uniform over lateral surface and both caps, weighted by area.
Point3 cylinder_point(std::mt19937_64& rng, double radius, double z_lo, double z_hi,
                      const Point3& center) {
  const double height = z_hi - z_lo;
  const double lateral = 2.0 * std::numbers::pi * radius * height;
  const double cap = std::numbers::pi * radius * radius;
  std::uniform_real_distribution<double> pick(0.0, lateral + 2.0 * cap);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double where = pick(rng);
  const double theta = angle(rng);
  double r, z;
  if (where < lateral) {
    r = radius;
    z = z_lo + unit(rng) * height;
  } else {
    r = radius * std::sqrt(unit(rng));
    z = where < lateral + cap ? z_lo : z_hi;
  }
  return {center.x + r * std::cos(theta), center.y + r * std::sin(theta), center.z + z};
}

void check_points(int points) {
  if (points < 2) throw std::invalid_argument("synth: need at least 2 points per shape");
}

}  // namespace

SynthSample synth_cls_sample(int cls, int points, std::uint64_t seed) {
  check_points(points);
  if (cls < 0 || cls >= kSynthClsClasses) {
    throw std::invalid_argument("synth: classification class " + std::to_string(cls) +
                                " outside [0, " + std::to_string(kSynthClsClasses) + ")");
  }
  std::mt19937_64 rng(seed);
  SynthSample out;
  out.label = cls;
  out.cloud.points.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    switch (cls) {
      case 0: out.cloud.points.push_back(sphere_point(rng, 1.0, {0, 0, 0})); break;
      case 1: out.cloud.points.push_back(cube_point(rng, 0.8)); break;
      default:
        out.cloud.points.push_back(cylinder_point(rng, 0.3, -1.2, 1.2, {0, 0, 0}));
    }
  }
  return out;
}

std::vector<int> synth_seg_vocabulary(int cls) {
  if (cls == 0) return {0, 1};
  if (cls == 1) return {2, 3};
  throw std::invalid_argument("synth: segmentation class " + std::to_string(cls) +
                              " outside [0, " + std::to_string(kSynthSegClasses) + ")");
}

SynthSample synth_seg_sample(int cls, int points, std::uint64_t seed) {
  check_points(points);
  const std::vector<int> vocab = synth_seg_vocabulary(cls);

  // Ball on a rod; the two classes differ in every proportion.
  double ball_r, ball_z, rod_r, rod_lo, rod_hi;
  if (cls == 0) {
    ball_r = 0.45;
    ball_z = 0.55;
    rod_r = 0.07;
    rod_lo = -1.0;
    rod_hi = 0.25;
  } else {
    ball_r = 0.75;
    ball_z = 0.25;
    rod_r = 0.22;
    rod_lo = -1.0;
    rod_hi = -0.35;
  }

  const double ball_area = 4.0 * std::numbers::pi * ball_r * ball_r;
  const double rod_area = 2.0 * std::numbers::pi * rod_r * (rod_hi - rod_lo) +
                          2.0 * std::numbers::pi * rod_r * rod_r;
  int ball_points =
      static_cast<int>(std::lround(points * ball_area / (ball_area + rod_area)));
  ball_points = std::min(std::max(ball_points, 1), points - 1);

  std::mt19937_64 rng(seed);
  SynthSample out;
  out.label = cls;
  out.cloud.points.reserve(static_cast<std::size_t>(points));
  out.parts.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < ball_points; ++i) {
    out.cloud.points.push_back(sphere_point(rng, ball_r, {0, 0, ball_z}));
    out.parts.push_back(vocab[0]);
  }
  for (int i = ball_points; i < points; ++i) {
    out.cloud.points.push_back(cylinder_point(rng, rod_r, rod_lo, rod_hi, {0, 0, 0}));
    out.parts.push_back(vocab[1]);
  }
  return out;
}

void write_synth_dataset(const std::filesystem::path& dir, const std::string& kind, int classes,
                         int train_per_class, int test_per_class, int points,
                         std::uint64_t seed) {
  const bool seg = kind == "seg";
  if (!seg && kind != "cls") {
    throw std::invalid_argument("synth: kind must be cls or seg, not \"" + kind + "\"");
  }
  if (seg) {
    classes = kSynthSegClasses;
  } else if (classes < 2 || classes > kSynthClsClasses) {
    throw std::invalid_argument("synth: classes must be 2 or 3");
  }
  if (train_per_class < 1 || test_per_class < 0) {
    throw std::invalid_argument("synth: need at least one training sample per class");
  }

  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.point_count = points;
  if (seg) {
    manifest.class_names = {"thin_stick_ball", "thick_stick_ball"};
    for (int c = 0; c < classes; ++c) manifest.class_parts[c] = synth_seg_vocabulary(c);
  } else {
    manifest.class_names = {"sphere", "cube", "cylinder"};
    manifest.class_names.resize(static_cast<std::size_t>(classes));
  }

  std::uint64_t ordinal = 0;
  auto emit = [&](const std::string& split, int cls, int index) {
    const std::uint64_t sample_seed = seed + kStreamStep * (++ordinal);
    const SynthSample sample = seg ? synth_seg_sample(cls, points, sample_seed)
                                   : synth_cls_sample(cls, points, sample_seed);
    char name[64];
    std::snprintf(name, sizeof(name), "c%d_%04d", cls, index);
    SampleRef ref;
    ref.cloud = split + "/" + name + ".pts";
    ref.label = cls;
    save_cloud_binary(dir / ref.cloud, sample.cloud);
    if (seg) {
      ref.parts = split + "/" + name + ".parts";
      save_labels(dir / ref.parts, sample.parts);
    }
    (split == "train" ? manifest.train : manifest.test).push_back(std::move(ref));
  };

  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < train_per_class; ++i) emit("train", c, i);
  }
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < test_per_class; ++i) emit("test", c, i);
  }
  save_manifest(manifest, dir / "manifest.json");
}

}  // namespace uff
