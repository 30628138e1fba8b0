#pragma once

// Straight-line serial implementations of the geometry kernels. These are the
// ground truth the parallel/kd-tree versions are tested against, and the
// baseline side of the benchmarks. Keep them obvious, not fast.

#include <span>
#include <vector>

#include "uff/geometry.hpp"
#include "uff/types.hpp"

namespace uff::ref {

// Full pairwise scan + stable sort by (squared distance, index).
NeighborList knn_bruteforce(std::span<const Point3> points, const Point3& query, int k);

std::vector<NeighborList> knn_batch(std::span<const Point3> points,
                                    std::span<const Point3> queries, int k);

// Greedy farthest-point traversal that recomputes every distance per step
// instead of maintaining the running minimum.
std::vector<int> farthest_point_sample(std::span<const Point3> points, int m);

}  // namespace uff::ref
