#pragma once

#include <map>
#include <span>
#include <vector>

namespace uff {

/// One shape's segmentation result for scoring.
struct SegEvalInput {
  int object_class = -1;
  std::vector<int> gt;          // per-point ground-truth part ids
  std::vector<int> pred;        // per-point predictions, same length
  std::vector<int> vocabulary;  // the class's valid part ids
};

struct MiouReport {
  std::vector<double> shape_iou;           // per input shape, in input order
  std::map<int, double> category_miou;     // object class -> mean shape IoU
  std::map<int, int> category_counts;      // object class -> shape count
  double cat_miou = 0.0;                   // mean over categories
  double ins_miou = 0.0;                   // mean over shapes
  double overall_accuracy = 0.0;           // pointwise, across all shapes
};

double overall_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Mean over the vocabulary's parts of |gt ∩ pred| / |gt ∪ pred| on point
/// sets. A part absent from both labelings counts as IoU 1.
double shape_iou(std::span<const int> gt, std::span<const int> pred,
                 std::span<const int> vocabulary);

MiouReport miou_report(std::span<const SegEvalInput> inputs);

}  // namespace uff
