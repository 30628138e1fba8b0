#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "uff/types.hpp"

namespace helpers {

// Continuous coordinates: distance ties between distinct pairs have
// probability ~0, so order-sensitive tie-breaking never fires.
inline uff::PointCloud random_cloud(int n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  uff::PointCloud c;
  c.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

// Coordinates on the 2^-16 grid in [-1, 1]. Adding a same-grid offset keeps
// every coordinate, pairwise difference, and squared distance exactly
// representable, which is what makes translation invariance testable as
// bitwise equality rather than a tolerance.
inline uff::PointCloud dyadic_cloud(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-(1 << 16), 1 << 16);
  const double s = std::ldexp(1.0, -16);
  uff::PointCloud c;
  c.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    c.points.push_back({u(rng) * s, u(rng) * s, u(rng) * s});
  }
  return c;
}

inline uff::Point3 dyadic_offset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-(1 << 16), 1 << 16);
  const double s = std::ldexp(1.0, -16);
  return {u(rng) * s, u(rng) * s, u(rng) * s};
}

inline uff::PointCloud translate(const uff::PointCloud& c, const uff::Point3& t) {
  uff::PointCloud out;
  out.points.reserve(c.size());
  for (const uff::Point3& p : c.points) out.points.push_back(p + t);
  return out;
}

inline uff::PointCloud permute(const uff::PointCloud& c, std::uint64_t seed) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  uff::PointCloud out;
  out.points.reserve(c.size());
  for (std::size_t i : order) out.points.push_back(c.points[i]);
  return out;
}

inline uff::Matrix random_matrix(int rows, int cols, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  uff::Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

}  // namespace helpers
