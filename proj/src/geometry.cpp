#include "uff/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace uff {

namespace {

// Per-component sums with addends taken in ascending value order, so the
// result is invariant under permutation of the input points.
std::array<double, 3> sorted_component_sums(std::span<const Point3> pts) {
  const std::size_t n = pts.size();
  std::vector<double> comp(n);
  std::array<double, 3> sums{};
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      comp[i] = c == 0 ? pts[i].x : (c == 1 ? pts[i].y : pts[i].z);
    }
    std::sort(comp.begin(), comp.end());
    double s = 0.0;
    for (double v : comp) s += v;
    sums[c] = s;
  }
  return sums;
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points, int leaf_size)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / std::max(leaf_size, 1) + 2);
  root_ = build(0, static_cast<int>(points_.size()), std::max(leaf_size, 1));
}

int KdTree::build(int begin, int end, int leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});

  if (end - begin <= leaf_size) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  // Split along the widest extent of the range.
  Point3 lo = points_[order_[begin]];
  Point3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    const Point3& p = points_[order_[i]];
    lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
  }
  const double ex = hi.x - lo.x, ey = hi.y - lo.y, ez = hi.z - lo.z;
  int axis = 0;
  if (ey > ex || ez > ex) axis = (ez > ey) ? 2 : 1;

  auto coord = [&](int pt) {
    const Point3& p = points_[pt];
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  };

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = coord(a), cb = coord(b);
                     return ca < cb || (ca == cb && a < b);
                   });

  nodes_[id].axis = axis;
  nodes_[id].split = coord(order_[mid]);
  const int left = build(begin, mid, leaf_size);
  const int right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const Point3& q, int k, std::vector<Candidate>& heap) const {
  const Node& nd = nodes_[node];

  if (nd.left < 0) {
    for (int i = nd.begin; i < nd.end; ++i) {
      const int idx = order_[i];
      const Candidate cand{squared_distance(q, points_[idx]), idx};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }

  const double qc = nd.axis == 0 ? q.x : (nd.axis == 1 ? q.y : q.z);
  const double diff = qc - nd.split;
  const int near = diff < 0.0 ? nd.left : nd.right;
  const int far = diff < 0.0 ? nd.right : nd.left;

  search(near, q, k, heap);
  // Equal plane distance may still hide an equal-distance lower index, so
  // only a strictly greater bound prunes.
  if (static_cast<int>(heap.size()) < k || !(diff * diff > heap.front().sq_dist)) {
    search(far, q, k, heap);
  }
}

NeighborList KdTree::knn(const Point3& query, int k) const {
  if (k < 1 || k > size()) {
    throw std::out_of_range("knn: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(size()) + "]");
  }
  std::vector<Candidate> heap;
  heap.reserve(k);
  search(root_, query, k, heap);
  std::sort(heap.begin(), heap.end());

  NeighborList out;
  out.idx.resize(heap.size());
  out.sq_dist.resize(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) {
    out.idx[i] = heap[i].idx;
    out.sq_dist[i] = heap[i].sq_dist;
  }
  return out;
}

NeighborList knn(std::span<const Point3> points, const Point3& query, int k) {
  return KdTree(points).knn(query, k);
}

std::vector<NeighborList> knn_batch(std::span<const Point3> points,
                                    std::span<const Point3> queries, int k) {
  const KdTree tree(points);
  std::vector<NeighborList> out(queries.size());
  const int n = static_cast<int>(queries.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    out[i] = tree.knn(queries[i], k);
    out[i].query = i;
  }
  return out;
}

std::vector<int> farthest_point_sample(std::span<const Point3> points, int m) {
  const int n = static_cast<int>(points.size());
  if (m < 1 || m > n) {
    throw std::out_of_range("farthest_point_sample: m=" + std::to_string(m) +
                            " outside [1, " + std::to_string(n) + "]");
  }

  // Start at the point farthest from the centroid. Compare ||n*p - S||
  // instead of ||p - S/n||: same ordering, and skipping the division keeps
  // the start exactly translation-invariant on exactly-representable input.
  const auto sums = sorted_component_sums(points);
  int start = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double dx = n * points[i].x - sums[0];
    const double dy = n * points[i].y - sums[1];
    const double dz = n * points[i].z - sums[2];
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 > best) {
      best = d2;
      start = i;
    }
  }

  std::vector<int> selected;
  selected.reserve(m);
  selected.push_back(start);

  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  int last = start;
  for (int step = 1; step < m; ++step) {
    const Point3 p = points[last];
#pragma omp parallel for schedule(static) if (n >= 4096)
    for (int i = 0; i < n; ++i) {
      const double d2 = squared_distance(points[i], p);
      if (d2 < min_sq[i]) min_sq[i] = d2;
    }
    // Serial argmax keeps the tie rule independent of the thread count.
    int next = 0;
    double far = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_sq[i] > far) {
        far = min_sq[i];
        next = i;
      }
    }
    selected.push_back(next);
    last = next;
  }
  return selected;
}

namespace {

struct Member {
  double sq_dist;
  int idx;
};

// Neighbors bucketed by sign-octant of their offset from `center`, each
// bucket in canonical (distance, index) order so that downstream sums do not
// depend on the order neighbors were listed in.
std::array<std::vector<Member>, 8> octant_buckets(const Point3& center,
                                                  const NeighborList& neighbors,
                                                  std::span<const Point3> coords,
                                                  const char* caller) {
  std::array<std::vector<Member>, 8> buckets;
  for (int i : neighbors.idx) {
    if (i < 0 || i >= static_cast<int>(coords.size())) {
      throw std::invalid_argument(std::string(caller) + ": neighbor index " + std::to_string(i) +
                                  " out of range");
    }
    const Point3 offset = coords[i] - center;
    buckets[octant_of(offset)].push_back({squared_distance(coords[i], center), i});
  }
  for (auto& bucket : buckets) {
    std::sort(bucket.begin(), bucket.end(), [](const Member& a, const Member& b) {
      return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.idx < b.idx);
    });
  }
  return buckets;
}

}  // namespace

Matrix quadrant_mean_stack(const Point3& center, const NeighborList& neighbors,
                           std::span<const Point3> coords, const Matrix& attributes) {
  const int dim = static_cast<int>(attributes.cols());
  if (attributes.rows() != static_cast<Eigen::Index>(coords.size())) {
    throw std::invalid_argument("quadrant_mean_stack: attribute rows (" +
                                std::to_string(attributes.rows()) + ") != point count (" +
                                std::to_string(coords.size()) + ")");
  }

  const auto buckets = octant_buckets(center, neighbors, coords, "quadrant_mean_stack");
  Matrix stack = Matrix::Zero(8, dim);
  for (int o = 0; o < 8; ++o) {
    const auto& bucket = buckets[o];
    if (bucket.empty()) continue;
    for (const Member& mem : bucket) stack.row(o) += attributes.row(mem.idx);
    stack.row(o) /= static_cast<double>(bucket.size());
  }
  return stack;
}

Matrix quadrant_offset_stack(const Point3& center, const NeighborList& neighbors,
                             std::span<const Point3> coords) {
  const auto buckets = octant_buckets(center, neighbors, coords, "quadrant_offset_stack");
  Matrix stack = Matrix::Zero(8, 3);
  for (int o = 0; o < 8; ++o) {
    const auto& bucket = buckets[o];
    if (bucket.empty()) continue;
    for (const Member& mem : bucket) {
      const Point3 offset = coords[mem.idx] - center;
      stack(o, 0) += offset.x;
      stack(o, 1) += offset.y;
      stack(o, 2) += offset.z;
    }
    stack.row(o) /= static_cast<double>(bucket.size());
  }
  return stack;
}

}  // namespace uff
