#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "uff/types.hpp"

namespace uff {

/// One-hot least-squares regressor over z-scored features; predicted class =
/// argmax of the regressed scores, ties to the lowest class id.
struct LsqClassifier {
  Matrix weights;  // (D+1) x C, last row is the intercept
  Vector mean;     // standardization, per feature
  Vector scale;    // > 0 (constant features get unit scale)

  int classes() const { return static_cast<int>(weights.cols()); }
  Eigen::Index feature_dim() const { return weights.rows() - 1; }

  Vector scores(const Eigen::Ref<const Vector>& features) const;
  int predict(const Eigen::Ref<const Vector>& features) const;
  std::vector<int> predict_rows(const Eigen::Ref<const Matrix>& features) const;
};

/// Solve the ridge-regularized normal equations for one-hot targets. The
/// system is scaled by 1/n, so duplicating every training row changes
/// nothing. ridge = 0 falls back to a rank-checked dense solve and reports
/// singularity instead of returning garbage.
LsqClassifier lsq_fit(const Eigen::Ref<const Matrix>& features, std::span<const int> labels,
                      int num_classes, double ridge);

struct RfParams {
  int trees = 100;
  int max_features = 0;  // per-split candidate features; 0 = ceil(sqrt(D))
  int min_leaf = 1;
};

struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::uint64_t> histogram;  // leaf only: training count per class
  };
  std::vector<Node> nodes;  // node 0 is the root

  int predict(const Eigen::Ref<const Vector>& features) const;
};

/// Bootstrap-aggregated CART trees split on Gini impurity. A sample goes
/// left when feature < threshold.
struct RandomForest {
  std::vector<DecisionTree> trees;
  int num_classes = 0;
  RfParams params;
  std::uint64_t seed = 0;
};

/// Deterministic for a given seed: each tree draws from its own RNG stream
/// derived from the master seed, so the thread schedule cannot change the
/// forest.
RandomForest rf_fit(const Eigen::Ref<const Matrix>& features, std::span<const int> labels,
                    int num_classes, const RfParams& params, std::uint64_t seed);

/// Majority vote over trees, ties to the lowest class id. `distribution`
/// (optional) receives the vote shares.
int rf_predict(const RandomForest& forest, const Eigen::Ref<const Vector>& features,
               Vector* distribution = nullptr);
std::vector<int> rf_predict_rows(const RandomForest& forest,
                                 const Eigen::Ref<const Matrix>& features);

/// Part classifier for one object class. The forest is trained on local part
/// indices; predictions map back through `vocabulary`, so a head can never
/// emit a part id outside its class.
struct SegmentationHead {
  int object_class = -1;
  std::vector<int> vocabulary;  // valid part ids, ascending
  RandomForest forest;

  std::vector<int> predict_rows(const Eigen::Ref<const Matrix>& point_features) const;
};

/// Training data for one object class's head.
struct SegTrainGroup {
  int object_class = -1;
  std::vector<int> vocabulary;
  Matrix features;              // one row per training point
  std::vector<int> part_labels; // aligned with rows, values from vocabulary
};

std::vector<SegmentationHead> fit_segmentation_heads(std::span<const SegTrainGroup> groups,
                                                     const RfParams& params, std::uint64_t seed);

enum class LabelMode { Predicted, GroundTruth };

/// Object-label-guided part segmentation: pick the object class (from the
/// shape classifier or the given ground-truth label), then dispatch every
/// point-feature row to that class's head.
std::vector<int> segment(const Vector& shape_feature, const Matrix& point_feature_map,
                         const std::function<int(const Vector&)>& classify,
                         std::span<const SegmentationHead> heads, LabelMode mode,
                         int true_label = -1);

}  // namespace uff
