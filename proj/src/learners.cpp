#include "uff/learners.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace uff {

namespace {

constexpr std::uint64_t kStreamStep = 0x9e3779b97f4a7c15ULL;

void check_labels(std::span<const int> labels, Eigen::Index rows, int num_classes,
                  const char* caller) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw std::invalid_argument(std::string(caller) + ": " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument(std::string(caller) + ": label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Vector standardize_row(const Eigen::Ref<const Vector>& x, const Vector& mean,
                       const Vector& scale) {
  return (x - mean).cwiseQuotient(scale);
}

int argmax_lowest(const Eigen::Ref<const Vector>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

Vector LsqClassifier::scores(const Eigen::Ref<const Vector>& features) const {
  if (features.size() != feature_dim()) {
    throw std::invalid_argument("lsq_predict: feature dimension " +
                                std::to_string(features.size()) + " does not match " +
                                std::to_string(feature_dim()));
  }
  const Vector z = standardize_row(features, mean, scale);
  return weights.topRows(feature_dim()).transpose() * z + weights.row(feature_dim()).transpose();
}

int LsqClassifier::predict(const Eigen::Ref<const Vector>& features) const {
  return argmax_lowest(scores(features));
}

std::vector<int> LsqClassifier::predict_rows(const Eigen::Ref<const Matrix>& features) const {
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = predict(features.row(i).transpose());
  }
  return out;
}

LsqClassifier lsq_fit(const Eigen::Ref<const Matrix>& features, std::span<const int> labels,
                      int num_classes, double ridge) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (num_classes < 1) throw std::invalid_argument("lsq_fit: need at least one class");
  if (n < num_classes) {
    throw std::invalid_argument("lsq_fit: " + std::to_string(n) + " rows for " +
                                std::to_string(num_classes) + " classes");
  }
  if (ridge < 0.0) throw std::invalid_argument("lsq_fit: ridge must be >= 0");
  check_labels(labels, n, num_classes, "lsq_fit");

  LsqClassifier clf;
  clf.mean = features.colwise().mean().transpose();
  const Vector var =
      (features.rowwise() - clf.mean.transpose()).array().square().colwise().mean().transpose();
  clf.scale = var.array().sqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(clf.scale(j) > 0.0)) clf.scale(j) = 1.0;
  }

  Matrix a(n, d + 1);
  a.leftCols(d) = (features.rowwise() - clf.mean.transpose()) *
                  clf.scale.cwiseInverse().asDiagonal();
  a.col(d).setOnes();

  Matrix targets = Matrix::Zero(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) targets(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix gram = (a.transpose() * a) * inv_n;
  gram.diagonal().array() += ridge;
  const Matrix rhs = (a.transpose() * targets) * inv_n;

  if (ridge > 0.0) {
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) {
      throw std::runtime_error("lsq_fit: normal equations not solvable; increase ridge");
    }
    clf.weights = ldlt.solve(rhs);
  } else {
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible()) {
      throw std::runtime_error(
          "lsq_fit: singular normal equations with ridge=0; set ridge > 0");
    }
    clf.weights = lu.solve(rhs);
  }
  if (!clf.weights.allFinite()) {
    throw std::runtime_error("lsq_fit: non-finite solution; increase ridge");
  }
  return clf;
}

int DecisionTree::predict(const Eigen::Ref<const Vector>& features) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& nd = nodes[static_cast<std::size_t>(node)];
    node = features(nd.feature) < nd.threshold ? nd.left : nd.right;
  }
  const auto& hist = nodes[static_cast<std::size_t>(node)].histogram;
  int best = 0;
  for (std::size_t c = 1; c < hist.size(); ++c) {
    if (hist[c] > hist[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

namespace {

struct TreeBuilder {
  const Eigen::Ref<const Matrix>& x;
  std::span<const int> y;
  int num_classes;
  const RfParams& params;
  std::mt19937_64& rng;
  DecisionTree tree;
  std::vector<int> feature_pool;

  TreeBuilder(const Eigen::Ref<const Matrix>& x_, std::span<const int> y_, int classes_,
              const RfParams& params_, std::mt19937_64& rng_)
      : x(x_), y(y_), num_classes(classes_), params(params_), rng(rng_) {
    feature_pool.resize(static_cast<std::size_t>(x.cols()));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
  }

  static double gini(const std::vector<std::uint64_t>& counts, std::uint64_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::uint64_t c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      sum_sq += p * p;
    }
    return 1.0 - sum_sq;
  }

  int leaf(std::span<const int> rows) {
    DecisionTree::Node node;
    node.histogram.assign(static_cast<std::size_t>(num_classes), 0);
    for (int r : rows) node.histogram[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])]++;
    tree.nodes.push_back(std::move(node));
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  // Best (feature, threshold) among mtry sampled features, by Gini decrease.
  // Returns false when no split separates the rows.
  bool best_split(std::span<const int> rows, int& feature, double& threshold) {
    const int mtry = params.max_features > 0
                         ? std::min<int>(params.max_features, static_cast<int>(x.cols()))
                         : static_cast<int>(
                               std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    // Partial Fisher-Yates: the first mtry entries become the candidates.
    for (int i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(feature_pool.size()) - 1);
      std::swap(feature_pool[static_cast<std::size_t>(i)],
                feature_pool[static_cast<std::size_t>(pick(rng))]);
    }

    std::vector<std::uint64_t> total_counts(static_cast<std::size_t>(num_classes), 0);
    for (int r : rows) total_counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])]++;
    const std::uint64_t total = rows.size();

    double best_score = std::numeric_limits<double>::infinity();
    bool found = false;

    std::vector<std::pair<double, int>> order(rows.size());
    std::vector<std::uint64_t> left_counts(static_cast<std::size_t>(num_classes));
    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feature_pool[static_cast<std::size_t>(fi)];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        order[i] = {x(rows[i], f), y[static_cast<std::size_t>(rows[i])]};
      }
      std::sort(order.begin(), order.end());

      std::fill(left_counts.begin(), left_counts.end(), 0);
      std::uint64_t left_total = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_counts[static_cast<std::size_t>(order[i].second)]++;
        left_total++;
        const double a = order[i].first;
        const double b = order[i + 1].first;
        if (!(a < b)) continue;
        if (left_total < static_cast<std::uint64_t>(params.min_leaf) ||
            total - left_total < static_cast<std::uint64_t>(params.min_leaf)) {
          continue;
        }
        std::vector<std::uint64_t> right_counts(static_cast<std::size_t>(num_classes));
        for (std::size_t c = 0; c < right_counts.size(); ++c) {
          right_counts[c] = total_counts[c] - left_counts[c];
        }
        const double score =
            (static_cast<double>(left_total) * gini(left_counts, left_total) +
             static_cast<double>(total - left_total) * gini(right_counts, total - left_total)) /
            static_cast<double>(total);
        if (score < best_score) {
          double mid = a + (b - a) / 2.0;
          if (!(mid > a)) mid = b;  // rounding guard: keep a strictly on the left
          best_score = score;
          feature = f;
          threshold = mid;
          found = true;
        }
      }
    }
    return found;
  }

  int build(std::vector<int>& rows) {
    bool pure = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (y[static_cast<std::size_t>(rows[i])] != y[static_cast<std::size_t>(rows[0])]) {
        pure = false;
        break;
      }
    }
    if (pure || static_cast<int>(rows.size()) < 2 * params.min_leaf || rows.size() < 2) {
      return leaf(rows);
    }

    int feature = -1;
    double threshold = 0.0;
    if (!best_split(rows, feature, threshold)) return leaf(rows);

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      (x(r, feature) < threshold ? left_rows : right_rows).push_back(r);
    }

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[static_cast<std::size_t>(id)].feature = feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = threshold;
    const int left = build(left_rows);
    const int right = build(right_rows);
    tree.nodes[static_cast<std::size_t>(id)].left = left;
    tree.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }
};

}  // namespace

RandomForest rf_fit(const Eigen::Ref<const Matrix>& features, std::span<const int> labels,
                    int num_classes, const RfParams& params, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (n < 1) throw std::invalid_argument("rf_fit: empty training set");
  if (num_classes < 1) throw std::invalid_argument("rf_fit: need at least one class");
  if (params.trees < 1) throw std::invalid_argument("rf_fit: need at least one tree");
  if (params.min_leaf < 1) throw std::invalid_argument("rf_fit: min_leaf must be >= 1");
  check_labels(labels, n, num_classes, "rf_fit");

  RandomForest forest;
  forest.num_classes = num_classes;
  forest.params = params;
  forest.seed = seed;
  forest.trees.resize(static_cast<std::size_t>(params.trees));

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < params.trees; ++t) {
    std::mt19937_64 rng(seed + kStreamStep * static_cast<std::uint64_t>(t + 1));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<int>(pick(rng));

    TreeBuilder builder(features, labels, num_classes, params, rng);
    builder.build(rows);
    forest.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
  }
  return forest;
}

int rf_predict(const RandomForest& forest, const Eigen::Ref<const Vector>& features,
               Vector* distribution) {
  if (forest.trees.empty()) throw std::invalid_argument("rf_predict: empty forest");
  std::vector<std::uint64_t> votes(static_cast<std::size_t>(forest.num_classes), 0);
  for (const DecisionTree& tree : forest.trees) {
    votes[static_cast<std::size_t>(tree.predict(features))]++;
  }
  int best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  if (distribution) {
    distribution->resize(forest.num_classes);
    for (std::size_t c = 0; c < votes.size(); ++c) {
      (*distribution)(static_cast<Eigen::Index>(c)) =
          static_cast<double>(votes[c]) / static_cast<double>(forest.trees.size());
    }
  }
  return best;
}

std::vector<int> rf_predict_rows(const RandomForest& forest,
                                 const Eigen::Ref<const Matrix>& features) {
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = rf_predict(forest, features.row(i).transpose());
  }
  return out;
}

std::vector<int> SegmentationHead::predict_rows(
    const Eigen::Ref<const Matrix>& point_features) const {
  std::vector<int> local = rf_predict_rows(forest, point_features);
  for (int& p : local) p = vocabulary[static_cast<std::size_t>(p)];
  return local;
}

std::vector<SegmentationHead> fit_segmentation_heads(std::span<const SegTrainGroup> groups,
                                                     const RfParams& params, std::uint64_t seed) {
  std::vector<SegmentationHead> heads;
  heads.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const SegTrainGroup& group = groups[g];
    if (group.features.rows() == 0) {
      throw std::invalid_argument("fit_segmentation_heads: empty group for class " +
                                  std::to_string(group.object_class));
    }
    if (group.vocabulary.empty()) {
      throw std::invalid_argument("fit_segmentation_heads: empty vocabulary for class " +
                                  std::to_string(group.object_class));
    }
    std::vector<int> vocab = group.vocabulary;
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());

    std::vector<int> local(group.part_labels.size());
    for (std::size_t i = 0; i < group.part_labels.size(); ++i) {
      const auto it = std::lower_bound(vocab.begin(), vocab.end(), group.part_labels[i]);
      if (it == vocab.end() || *it != group.part_labels[i]) {
        throw std::invalid_argument("fit_segmentation_heads: part id " +
                                    std::to_string(group.part_labels[i]) +
                                    " is not in the vocabulary of class " +
                                    std::to_string(group.object_class));
      }
      local[i] = static_cast<int>(it - vocab.begin());
    }

    SegmentationHead head;
    head.object_class = group.object_class;
    head.vocabulary = std::move(vocab);
    head.forest =
        rf_fit(group.features, local, static_cast<int>(head.vocabulary.size()), params,
               seed + kStreamStep * (static_cast<std::uint64_t>(g) + 1));
    heads.push_back(std::move(head));
  }
  return heads;
}

std::vector<int> segment(const Vector& shape_feature, const Matrix& point_feature_map,
                         const std::function<int(const Vector&)>& classify,
                         std::span<const SegmentationHead> heads, LabelMode mode,
                         int true_label) {
  int object_class = -1;
  if (mode == LabelMode::GroundTruth) {
    if (true_label < 0) {
      throw std::invalid_argument("segment: ground-truth label mode needs a label");
    }
    object_class = true_label;
  } else {
    if (!classify) throw std::invalid_argument("segment: no shape classifier given");
    object_class = classify(shape_feature);
  }

  const SegmentationHead* head = nullptr;
  for (const SegmentationHead& h : heads) {
    if (h.object_class == object_class) {
      head = &h;
      break;
    }
  }
  if (!head) {
    throw std::runtime_error("segment: no segmentation head for object class " +
                             std::to_string(object_class));
  }
  return head->predict_rows(point_feature_map);
}

}  // namespace uff
