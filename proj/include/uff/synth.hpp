#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uff/types.hpp"

namespace uff {

/// One generated sample. `parts` is empty for classification shapes.
struct SynthSample {
  PointCloud cloud;
  int label = -1;
  std::vector<int> parts;
};

/// Classification shapes: 0 = sphere surface, 1 = cube surface,
/// 2 = elongated cylinder. Deterministic for a given seed.
SynthSample synth_cls_sample(int cls, int points, std::uint64_t seed);
constexpr int kSynthClsClasses = 3;

/// Segmentation shapes, both a sphere fused onto a rod with different
/// proportions: class 0 = small ball on a long thin rod (parts 0, 1),
/// class 1 = large ball on a short thick rod (parts 2, 3).
SynthSample synth_seg_sample(int cls, int points, std::uint64_t seed);
constexpr int kSynthSegClasses = 2;

/// Part vocabulary for a segmentation class.
std::vector<int> synth_seg_vocabulary(int cls);

/// Write a complete dataset (binary clouds, part label files for "seg",
/// manifest.json) under `dir`. `kind` is "cls" or "seg"; `classes` only
/// applies to "cls" and must be 2 or 3.
void write_synth_dataset(const std::filesystem::path& dir, const std::string& kind, int classes,
                         int train_per_class, int test_per_class, int points,
                         std::uint64_t seed);

}  // namespace uff
