#include "uff/reference.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <string>

namespace uff::ref {

NeighborList knn_bruteforce(std::span<const Point3> points, const Point3& query, int k) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || k > n) {
    throw std::out_of_range("knn_bruteforce: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(n) + "]");
  }

  struct Entry {
    double sq_dist;
    int idx;
  };
  std::vector<Entry> all(n);
  for (int i = 0; i < n; ++i) all[i] = {squared_distance(query, points[i]), i};
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.idx < b.idx);
  });

  NeighborList out;
  out.idx.resize(k);
  out.sq_dist.resize(k);
  for (int i = 0; i < k; ++i) {
    out.idx[i] = all[i].idx;
    out.sq_dist[i] = all[i].sq_dist;
  }
  return out;
}

std::vector<NeighborList> knn_batch(std::span<const Point3> points,
                                    std::span<const Point3> queries, int k) {
  std::vector<NeighborList> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out[i] = knn_bruteforce(points, queries[i], k);
    out[i].query = static_cast<int>(i);
  }
  return out;
}

std::vector<int> farthest_point_sample(std::span<const Point3> points, int m) {
  const int n = static_cast<int>(points.size());
  if (m < 1 || m > n) {
    throw std::out_of_range("farthest_point_sample: m=" + std::to_string(m) +
                            " outside [1, " + std::to_string(n) + "]");
  }

  std::array<double, 3> sums{};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> comp(n);
    for (int i = 0; i < n; ++i) {
      comp[i] = c == 0 ? points[i].x : (c == 1 ? points[i].y : points[i].z);
    }
    std::sort(comp.begin(), comp.end());
    double s = 0.0;
    for (double v : comp) s += v;
    sums[c] = s;
  }

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

  std::vector<int> selected{start};
  while (static_cast<int>(selected.size()) < m) {
    int next = 0;
    double far = -1.0;
    for (int i = 0; i < n; ++i) {
      double d2 = std::numeric_limits<double>::infinity();
      for (int s : selected) d2 = std::min(d2, squared_distance(points[i], points[s]));
      if (d2 > far) {
        far = d2;
        next = i;
      }
    }
    selected.push_back(next);
  }
  return selected;
}

}  // namespace uff::ref
