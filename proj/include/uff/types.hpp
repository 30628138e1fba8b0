#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace uff {

// Attribute matrices are row-per-point, so row-major keeps a point's
// attribute vector contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Point3 operator-(const Point3& a, const Point3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

inline Point3 operator+(const Point3& a, const Point3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

static_assert(sizeof(Point3) == 3 * sizeof(double), "Point3 must be a packed xyz triple");

/// An ordered list of 3D points. Index identity is meaningful: per-point
/// labels and feature rows refer to positions in this list.
struct PointCloud {
  std::vector<Point3> points;

  int size() const { return static_cast<int>(points.size()); }
  bool empty() const { return points.empty(); }

  std::span<const Point3> span() const { return {points.data(), points.size()}; }

  /// N x 3 matrix view over the packed point storage (no copy).
  Eigen::Map<const Matrix> coords() const {
    return {reinterpret_cast<const double*>(points.data()),
            static_cast<Eigen::Index>(points.size()), 3};
  }
};

}  // namespace uff
