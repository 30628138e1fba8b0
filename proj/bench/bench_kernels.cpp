// Timing comparison: serial reference kernels vs the kd-tree/OpenMP versions.
// Both sides produce a checksum so a speed win can never hide a wrong answer.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <random>
#include <vector>

#include "uff/geometry.hpp"
#include "uff/reference.hpp"

using namespace uff;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

template <typename F>
double time_s(F&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t checksum(const std::vector<NeighborList>& lists) {
  std::uint64_t h = 0;
  for (const NeighborList& nb : lists) {
    for (int i : nb.idx) h = h * 1315423911ULL + static_cast<std::uint64_t>(i);
  }
  return h;
}

std::uint64_t checksum(const std::vector<int>& idx) {
  std::uint64_t h = 0;
  for (int i : idx) h = h * 1315423911ULL + static_cast<std::uint64_t>(i);
  return h;
}

}  // namespace

int main() {
  std::printf("%-22s %10s %12s %12s %9s  %s\n", "kernel", "n", "reference", "production",
              "speedup", "result");

  for (int n : {1024, 4096, 8192}) {
    const PointCloud c = random_cloud(n, 1);
    const int k = 32;
    std::vector<NeighborList> slow, fast;
    const double ts = time_s([&] { slow = ref::knn_batch(c.points, c.points, k); });
    const double tf = time_s([&] { fast = knn_batch(c.points, c.points, k); });
    const bool ok = checksum(slow) == checksum(fast);
    std::printf("%-22s %10d %10.3f s %10.3f s %8.1fx  %s\n", "knn_batch k=32", n, ts, tf,
                ts / tf, ok ? "identical" : "MISMATCH");
  }

  // The reference sampler rescans every pairwise distance per pick, so it goes
  // cubic-ish quickly; stop at 4096 to keep the whole run under ~10 s.
  for (int n : {2048, 4096}) {
    const PointCloud c = random_cloud(n, 2);
    const int m = n / 4;
    std::vector<int> slow, fast;
    const double ts = time_s([&] { slow = ref::farthest_point_sample(c.points, m); });
    const double tf = time_s([&] { fast = farthest_point_sample(c.points, m); });
    const bool ok = checksum(slow) == checksum(fast);
    std::printf("%-22s %10d %10.3f s %10.3f s %8.1fx  %s\n", "fps m=n/4", n, ts, tf, ts / tf,
                ok ? "identical" : "MISMATCH");
  }
  return 0;
}
