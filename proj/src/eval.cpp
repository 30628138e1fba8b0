#include "uff/eval.hpp"

#include <stdexcept>
#include <string>

namespace uff {

double overall_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("overall_accuracy: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw std::invalid_argument("overall_accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double shape_iou(std::span<const int> gt, std::span<const int> pred,
                 std::span<const int> vocabulary) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("shape_iou: label lengths differ (" + std::to_string(gt.size()) +
                                " vs " + std::to_string(pred.size()) + ")");
  }
  if (gt.empty()) throw std::invalid_argument("shape_iou: empty shape");
  if (vocabulary.empty()) throw std::invalid_argument("shape_iou: empty vocabulary");

  double sum = 0.0;
  for (int part : vocabulary) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool in_gt = gt[i] == part;
      const bool in_pred = pred[i] == part;
      if (in_gt && in_pred) ++inter;
      if (in_gt || in_pred) ++uni;
    }
    sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(vocabulary.size());
}

MiouReport miou_report(std::span<const SegEvalInput> inputs) {
  if (inputs.empty()) throw std::invalid_argument("miou_report: no shapes");

  MiouReport report;
  report.shape_iou.reserve(inputs.size());
  std::map<int, double> iou_sums;
  std::size_t points = 0, correct = 0;

  for (const SegEvalInput& in : inputs) {
    const double iou = shape_iou(in.gt, in.pred, in.vocabulary);
    report.shape_iou.push_back(iou);
    iou_sums[in.object_class] += iou;
    report.category_counts[in.object_class] += 1;
    for (std::size_t i = 0; i < in.gt.size(); ++i) {
      ++points;
      if (in.gt[i] == in.pred[i]) ++correct;
    }
  }

  double shape_sum = 0.0;
  for (double iou : report.shape_iou) shape_sum += iou;
  report.ins_miou = shape_sum / static_cast<double>(report.shape_iou.size());

  double cat_sum = 0.0;
  for (const auto& [cls, sum] : iou_sums) {
    const double miou = sum / static_cast<double>(report.category_counts.at(cls));
    report.category_miou[cls] = miou;
    cat_sum += miou;
  }
  report.cat_miou = cat_sum / static_cast<double>(report.category_miou.size());
  report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(points);
  return report;
}

}  // namespace uff
