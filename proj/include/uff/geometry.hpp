#pragma once

#include "uff/types.hpp"

#include <span>
#include <vector>

namespace uff {

/// k nearest neighbors of one query point, ordered by non-decreasing
/// distance; equal distances break toward the lower index. The query point
/// itself participates when it is a member of the searched set.
struct NeighborList {
  int query = -1;               // index of the query point, -1 if external
  std::vector<int> idx;         // length k
  std::vector<double> sq_dist;  // aligned with idx
};

/// Sign-octant of an offset vector: bit 2 = (dx >= 0), bit 1 = (dy >= 0),
/// bit 0 = (dz >= 0). A zero component counts as the non-negative half, so
/// every finite offset maps to exactly one octant.
inline int octant_of(const Point3& offset) noexcept {
  return 4 * (offset.x >= 0.0) + 2 * (offset.y >= 0.0) + (offset.z >= 0.0);
}

/// Exact k-NN over a fixed point set. Tree shape is an internal detail;
/// query results are identical to a full brute-force sort with the
/// (distance, index) tie rule.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, int leaf_size = 16);

  NeighborList knn(const Point3& query, int k) const;
  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Node {
    int left = -1;   // child node ids, -1 for leaf
    int right = -1;
    int begin = 0;   // range into order_ (leaf only)
    int end = 0;
    int axis = 0;
    double split = 0.0;
  };

  struct Candidate {
    double sq_dist;
    int idx;
    bool operator<(const Candidate& o) const {
      return sq_dist < o.sq_dist || (sq_dist == o.sq_dist && idx < o.idx);
    }
  };

  int build(int begin, int end, int leaf_size);
  void search(int node, const Point3& q, int k, std::vector<Candidate>& heap) const;

  std::vector<Point3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// One-shot k-NN query (builds a tree internally; prefer KdTree or
/// knn_batch when issuing many queries against the same set).
NeighborList knn(std::span<const Point3> points, const Point3& query, int k);

/// k-NN for every point of `queries` against `points`, parallel over
/// queries. Each result's `query` field is the index into `queries`.
std::vector<NeighborList> knn_batch(std::span<const Point3> points,
                                    std::span<const Point3> queries, int k);

/// Greedy farthest point sampling. Deterministic start: the point farthest
/// from the centroid (component sums taken in sorted value order, so the
/// result does not depend on input point order). Ties break toward the
/// lower index.
std::vector<int> farthest_point_sample(std::span<const Point3> points, int m);

/// 8 x D matrix: row o is the mean attribute vector of the neighbors whose
/// offset from `center` falls in octant o; empty octants are zero rows.
/// Rows do not depend on the order neighbors are listed in.
Matrix quadrant_mean_stack(const Point3& center, const NeighborList& neighbors,
                           std::span<const Point3> coords, const Matrix& attributes);

/// 8 x 3 variant where the attribute of each neighbor is its offset from
/// `center`. The mean is taken over the offsets themselves (not over raw
/// coordinates followed by a shift), which keeps the rows exactly unchanged
/// under a rigid translation of the whole cloud.
Matrix quadrant_offset_stack(const Point3& center, const NeighborList& neighbors,
                             std::span<const Point3> coords);

}  // namespace uff
