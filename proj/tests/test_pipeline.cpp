#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "uff/pipeline.hpp"

using namespace uff;

namespace {

// Row-major flatten, written out longhand so the oracle does not share the
// library's Map shortcut.
Vector flatten(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index p = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(p++) = m(r, c);
  }
  return v;
}

SaabTransform dc_only(Eigen::Index dim) {
  SaabTransform t;
  t.dc_kernel = Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  t.ac_kernels = Matrix(0, dim);
  t.energies = Vector::Ones(1);
  t.bias = Vector::Zero(1);
  return t;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.num_layers = 3;
  c.points_per_layer = {64, 32, 16};
  c.encoder_k = {8, 8, 8};
  c.decoder_k = {4, 4};
  KeepPolicy kp;
  kp.threshold = 0.999;
  kp.max_dim = 12;
  c.encoder_keep.assign(3, kp);
  c.decoder_keep.assign(2, kp);
  return c;
}

bool same_points(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].x != b[i].x || a[i].y != b[i].y || a[i].z != b[i].z) return false;
  }
  return true;
}

std::vector<PointCloud> make_clouds(int n, int points, std::uint64_t seed, bool dyadic) {
  std::vector<PointCloud> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(dyadic ? helpers::dyadic_cloud(points, seed + static_cast<std::uint64_t>(i))
                         : helpers::random_cloud(points, seed + static_cast<std::uint64_t>(i)));
  }
  return out;
}

struct Fixture {
  PipelineConfig config = small_config();
  std::vector<PointCloud> clouds;
  EncoderModel encoder;
  DecoderModel decoder;
  std::vector<std::vector<LayerRecord>> encoded;
};

Fixture make_fixture(bool dyadic, std::uint64_t seed) {
  Fixture f;
  f.clouds = make_clouds(10, 64, seed, dyadic);
  f.encoder = fit_encoder(f.clouds, f.config, &f.encoded);
  f.decoder = fit_decoder(f.encoded, f.config);
  return f;
}

}  // namespace

TEST_CASE("aggregate analytic examples") {
  Vector v(2);
  v << 3.0, -4.0;
  const Eigen::Vector4d a = aggregate(v);
  CHECK(a(0) == -0.5);
  CHECK(a(1) == 7.0);
  CHECK(a(2) == 5.0);
  CHECK(a(3) == 4.0);

  CHECK(aggregate(Vector::Zero(5)) == Eigen::Vector4d::Zero());
  CHECK_THROWS(aggregate(Vector(0)));

  // Non-negative inputs: the linf entry is plain max pooling.
  Vector nn(4);
  nn << 0.5, 2.0, 0.0, 1.25;
  CHECK(aggregate(nn)(3) == 2.0);

  const std::vector<AggScheme> two{AggScheme::Linf, AggScheme::Mean};
  const Vector sel = aggregate_selected(v, two);
  REQUIRE(sel.size() == 2);
  CHECK(sel(0) == 4.0);
  CHECK(sel(1) == -0.5);
}

TEST_CASE("aggregate ignores element order") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v = helpers::random_matrix(1, 23, rng()).row(0).transpose();
    Vector shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(aggregate(v) == aggregate(shuffled));
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(PipelineConfig::defaults(2048).validate());
  CHECK(PipelineConfig::defaults(2048).points_per_layer == std::vector<int>{2048, 1024, 512, 256});

  PipelineConfig c = small_config();
  c.points_per_layer = {64, 32};  // wrong length
  CHECK_THROWS(c.validate());

  c = small_config();
  c.points_per_layer = {64, 16, 32};  // not non-increasing
  CHECK_THROWS(c.validate());

  c = small_config();
  c.encoder_k[2] = 17;  // k above the layer's point count
  CHECK_THROWS(c.validate());

  c = small_config();
  c.num_layers = 1;
  CHECK_THROWS(c.validate());

  c = small_config();
  c.schemes.clear();
  CHECK_THROWS(c.validate());
}

TEST_CASE("shape feature dimensions") {
  // Fake records with channel widths 8/16/32/64: M=4 aggregations give 480.
  std::vector<LayerRecord> records;
  std::mt19937_64 rng(5);
  int n = 64;
  for (int d : {8, 16, 32, 64}) {
    LayerRecord rec;
    rec.coords = helpers::random_cloud(n, rng()).points;
    rec.attributes = helpers::random_matrix(n, d, rng());
    records.push_back(std::move(rec));
    n /= 2;
  }
  const std::vector<AggScheme> all{AggScheme::Mean, AggScheme::L1, AggScheme::L2, AggScheme::Linf};
  const Vector f = shape_feature(records, all);
  CHECK(f.size() == 480);

  // Permuting a layer's points (coords and attribute rows together) changes
  // nothing: every aggregation is order-free.
  std::vector<LayerRecord> shuffled = records;
  std::vector<int> order(static_cast<std::size_t>(shuffled[1].size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  LayerRecord moved;
  for (int i : order) {
    moved.coords.push_back(records[1].coords[static_cast<std::size_t>(i)]);
  }
  moved.attributes = Matrix(records[1].attributes.rows(), records[1].attributes.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    moved.attributes.row(static_cast<Eigen::Index>(i)) = records[1].attributes.row(order[i]);
  }
  shuffled[1] = std::move(moved);
  CHECK(shape_feature(shuffled, all) == f);
}

TEST_CASE("shape feature of a single-point layer") {
  LayerRecord rec;
  rec.coords = {{0, 0, 0}};
  rec.attributes = Matrix(1, 2);
  rec.attributes << -3.0, 2.0;
  const std::vector<AggScheme> all{AggScheme::Mean, AggScheme::L1, AggScheme::L2, AggScheme::Linf};
  const Vector f = shape_feature(std::vector<LayerRecord>{rec}, all);
  REQUIRE(f.size() == 8);
  // Row-major M x D layout: means first, then l1, l2, linf.
  CHECK(f(0) == -3.0);  // mean keeps the sign
  CHECK(f(1) == 2.0);
  CHECK(f(2) == 3.0);  // l1 = |value|
  CHECK(f(3) == 2.0);
  CHECK(f(4) == 3.0);  // l2 = |value|
  CHECK(f(5) == 2.0);
  CHECK(f(6) == 3.0);  // linf = |value|
  CHECK(f(7) == 2.0);
}

TEST_CASE("pointhop unit fit basics") {
  std::vector<LayerRecord> records;
  LayerRecord rec;
  rec.coords = helpers::random_cloud(40, 31).points;
  rec.attributes = Matrix(40, 0);
  records.push_back(rec);

  KeepPolicy kp;
  kp.mode = KeepPolicy::Mode::Fixed;
  kp.max_dim = 24;
  const SaabTransform t = pointhop_unit_fit(records, 6, kp, true);
  CHECK(t.input_dim() == 24);  // 8 octants x 3 offset components

  CHECK_THROWS(pointhop_unit_fit(std::vector<LayerRecord>{}, 6, kp, true));

  // Duplicating the dataset scales the scatter without moving eigenvectors.
  std::vector<LayerRecord> doubled{rec, rec};
  const SaabTransform t2 = pointhop_unit_fit(doubled, 6, kp, true);
  CHECK(t2.output_dim() == t.output_dim());
  CHECK((t2.kernel_matrix() - t.kernel_matrix()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((t2.energies - t.energies).cwiseAbs().maxCoeff() < 1e-10);

  // All-zero attributes leave only the DC channel, with zero energy.
  LayerRecord zero;
  zero.coords = rec.coords;
  zero.attributes = Matrix::Zero(40, 2);
  const SaabTransform tz = pointhop_unit_fit(std::vector<LayerRecord>{zero}, 6, kp, false);
  CHECK(tz.output_dim() == 1);
  CHECK(tz.energies(0) == 0.0);
}

TEST_CASE("pointhop unit apply matches the per-point oracle") {
  LayerRecord rec;
  rec.coords = helpers::random_cloud(50, 77).points;
  rec.attributes = helpers::random_matrix(50, 4, 78);

  KeepPolicy kp;
  kp.threshold = 0.999;
  kp.max_dim = 16;
  const SaabTransform t = pointhop_unit_fit(std::vector<LayerRecord>{rec}, 7, kp, false);
  const Matrix out = pointhop_unit_apply(t, rec, 7, false);
  REQUIRE(out.rows() == 50);
  REQUIRE(out.cols() == t.output_dim());

  for (int i = 0; i < 50; ++i) {
    const NeighborList nb = knn(rec.coords, rec.coords[static_cast<std::size_t>(i)], 7);
    const Matrix stack =
        quadrant_mean_stack(rec.coords[static_cast<std::size_t>(i)], nb, rec.coords,
                            rec.attributes);
    const Vector expected = t.apply(flatten(stack));
    CHECK((out.row(i).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-10);
  }

  CHECK_THROWS(pointhop_unit_apply(t, rec, 51, false));
}

TEST_CASE("pointhop unit apply permutes with its input") {
  LayerRecord rec;
  rec.coords = helpers::random_cloud(48, 101).points;
  rec.attributes = Matrix(48, 0);
  KeepPolicy kp;
  kp.max_dim = 12;
  kp.threshold = 0.999;
  const SaabTransform t = pointhop_unit_fit(std::vector<LayerRecord>{rec}, 6, kp, true);
  const Matrix base = pointhop_unit_apply(t, rec, 6, true);

  std::vector<int> order(48);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(order.begin(), order.end(), rng);
  LayerRecord shuffled;
  for (int i : order) shuffled.coords.push_back(rec.coords[static_cast<std::size_t>(i)]);
  shuffled.attributes = Matrix(48, 0);
  const Matrix permuted = pointhop_unit_apply(t, shuffled, 6, true);
  for (int i = 0; i < 48; ++i) {
    CHECK(permuted.row(i) == base.row(order[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("k=1 stacks hold only the point itself") {
  // The sole neighbor of each query is itself; its zero offset lands in
  // octant 7 (all boundary components count as non-negative).
  LayerRecord rec;
  rec.coords = helpers::random_cloud(10, 3).points;
  rec.attributes = helpers::random_matrix(10, 2, 4);
  for (int i = 0; i < 10; ++i) {
    const NeighborList nb = knn(rec.coords, rec.coords[static_cast<std::size_t>(i)], 1);
    CHECK(nb.idx == std::vector<int>{i});
    const Matrix stack = quadrant_mean_stack(rec.coords[static_cast<std::size_t>(i)], nb,
                                             rec.coords, rec.attributes);
    CHECK(stack.row(7) == rec.attributes.row(i));
    CHECK(stack.topRows(7).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("encode follows the schedule and matches fit-time records") {
  const Fixture f = make_fixture(false, 900);
  for (std::size_t c = 0; c < f.clouds.size(); ++c) {
    const std::vector<LayerRecord> records = encode(f.encoder, f.clouds[c]);
    REQUIRE(records.size() == 3);
    CHECK(records[0].size() == 64);
    CHECK(records[1].size() == 32);
    CHECK(records[2].size() == 16);
    for (int l = 0; l < 3; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      CHECK(records[lu].attributes == f.encoded[c][lu].attributes);
      CHECK(same_points(records[lu].coords, f.encoded[c][lu].coords));
    }
  }

  PointCloud tiny = helpers::random_cloud(8, 1);
  CHECK_THROWS(encode(f.encoder, tiny));
}

TEST_CASE("fit_encoder is deterministic and duplication-invariant") {
  const std::vector<PointCloud> clouds = make_clouds(6, 64, 42, false);
  const PipelineConfig config = small_config();
  const EncoderModel a = fit_encoder(clouds, config);
  const EncoderModel b = fit_encoder(clouds, config);
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].kernel_matrix() == b.layers[l].kernel_matrix());
    CHECK(a.layers[l].energies == b.layers[l].energies);
    CHECK(a.layers[l].bias == b.layers[l].bias);
  }

  std::vector<PointCloud> doubled = clouds;
  doubled.insert(doubled.end(), clouds.begin(), clouds.end());
  const EncoderModel d = fit_encoder(doubled, config);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    REQUIRE(d.layers[l].output_dim() == a.layers[l].output_dim());
    CHECK((d.layers[l].kernel_matrix() - a.layers[l].kernel_matrix()).cwiseAbs().maxCoeff() <
          1e-8);
  }
}

TEST_CASE("translation leaves attributes and features bitwise unchanged") {
  const Fixture f = make_fixture(true, 4000);
  const std::vector<AggScheme>& schemes = f.config.schemes;

  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud c = helpers::dyadic_cloud(64, 5000 + static_cast<std::uint64_t>(trial));
    const Point3 t = helpers::dyadic_offset(6000 + static_cast<std::uint64_t>(trial));
    const std::vector<LayerRecord> base = encode(f.encoder, c);
    const std::vector<LayerRecord> moved = encode(f.encoder, helpers::translate(c, t));
    for (std::size_t l = 0; l < base.size(); ++l) {
      CHECK(moved[l].attributes == base[l].attributes);
      // Recorded coordinates move rigidly with the cloud.
      for (int i = 0; i < base[l].size(); ++i) {
        const Point3 expect = base[l].coords[static_cast<std::size_t>(i)] + t;
        const Point3& got = moved[l].coords[static_cast<std::size_t>(i)];
        CHECK(got.x == expect.x);
        CHECK(got.y == expect.y);
        CHECK(got.z == expect.z);
      }
    }
    CHECK(shape_feature(moved, schemes) == shape_feature(base, schemes));
    CHECK(point_features(moved, f.decoder, f.config) ==
          point_features(base, f.decoder, f.config));
  }

  // Fitting on a translated dataset reproduces the very same transforms.
  const Point3 shift = helpers::dyadic_offset(31);
  std::vector<PointCloud> moved_clouds;
  for (const PointCloud& c : f.clouds) moved_clouds.push_back(helpers::translate(c, shift));
  const EncoderModel refit = fit_encoder(moved_clouds, f.config);
  for (std::size_t l = 0; l < refit.layers.size(); ++l) {
    CHECK(refit.layers[l].kernel_matrix() == f.encoder.layers[l].kernel_matrix());
    CHECK(refit.layers[l].bias == f.encoder.layers[l].bias);
  }
}

TEST_CASE("point permutation leaves the shape feature bitwise unchanged") {
  const Fixture f = make_fixture(false, 7100);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud c = helpers::random_cloud(64, 7200 + static_cast<std::uint64_t>(trial));
    const PointCloud p = helpers::permute(c, 7300 + static_cast<std::uint64_t>(trial));
    const std::vector<LayerRecord> base = encode(f.encoder, c);
    const std::vector<LayerRecord> perm = encode(f.encoder, p);
    CHECK(shape_feature(perm, f.config.schemes) == shape_feature(base, f.config.schemes));
    // Deeper layers re-order into the FPS selection sequence, which tracks
    // physical points, not storage order.
    CHECK(perm[1].attributes == base[1].attributes);
    CHECK(perm[2].attributes == base[2].attributes);
  }
}

TEST_CASE("point feature map rows follow the input order") {
  const Fixture f = make_fixture(false, 801);
  const PointCloud c = helpers::random_cloud(64, 802);
  const std::vector<LayerRecord> base = encode(f.encoder, c);
  const Matrix pf = point_features(base, f.decoder, f.config);
  CHECK(pf.rows() == 64);
  CHECK(pf.cols() == f.decoder.steps.back().output_dim() + base[0].attributes.cols());

  std::vector<std::size_t> order(64);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(803);
  std::shuffle(order.begin(), order.end(), rng);
  PointCloud shuffled;
  for (std::size_t i : order) shuffled.points.push_back(c.points[i]);
  const Matrix pf2 = point_features(encode(f.encoder, shuffled), f.decoder, f.config);
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(pf2.row(static_cast<Eigen::Index>(i)) ==
          pf.row(static_cast<Eigen::Index>(order[i])));
  }
}

TEST_CASE("decoder step constant field and single-neighbor arithmetic") {
  LayerRecord finer;
  finer.coords = helpers::random_cloud(12, 61).points;
  finer.attributes = Matrix(12, 0);

  LayerRecord coarser;
  coarser.coords = {{0.25, -0.5, 0.75}};
  coarser.attributes = Matrix(1, 0);

  Matrix incoming(1, 1);
  incoming << 2.0;
  const std::vector<AggScheme> all{AggScheme::Mean, AggScheme::L1, AggScheme::L2, AggScheme::Linf};
  const SaabTransform t = dc_only(4);
  const Matrix out = decoder_step(finer, coarser, incoming, t, 1, all);
  REQUIRE(out.rows() == 12);
  REQUIRE(out.cols() == 1);
  // Stack per point: v=2 in one octant; aggregates (2/8, 2, 2, 2); dc kernel
  // sums them over sqrt(4).
  for (int i = 0; i < 12; ++i) CHECK(out(i, 0) == (0.25 + 2.0 + 2.0 + 2.0) / 2.0);

  // Identical incoming attributes give identical rows whenever the octant
  // occupancy count cannot vary: with k'=1 exactly one octant is filled per
  // point, whichever coarser point gets picked.
  LayerRecord coarse8;
  coarse8.coords = helpers::random_cloud(8, 62).points;
  coarse8.attributes = Matrix(8, 0);
  Matrix constant_rows = Matrix::Ones(8, 3);
  constant_rows.col(1) *= -0.5;
  const SaabTransform t12 = dc_only(12);
  const Matrix cf = decoder_step(finer, coarse8, constant_rows, t12, 1, all);
  for (int i = 1; i < 12; ++i) CHECK(cf.row(i) == cf.row(0));

  // ... and with the coarser set at cube corners around tightly clustered
  // finer points, k'=8 fills all eight octants for everyone.
  LayerRecord corners;
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      for (double sz : {-1.0, 1.0}) corners.coords.push_back({sx, sy, sz});
    }
  }
  corners.attributes = Matrix(8, 0);
  LayerRecord center_cluster;
  center_cluster.coords = helpers::random_cloud(10, 63, 0.1).points;
  center_cluster.attributes = Matrix(10, 0);
  const Matrix cf8 = decoder_step(center_cluster, corners, constant_rows, t12, 8, all);
  for (int i = 1; i < 10; ++i) CHECK(cf8.row(i) == cf8.row(0));

  CHECK_THROWS(decoder_step(finer, coarse8, constant_rows, t12, 9, all));   // k' too large
  CHECK_THROWS(decoder_step(finer, coarse8, incoming, t12, 3, all));        // row mismatch
}

TEST_CASE("point features equal the unfused decoder cascade") {
  const Fixture f = make_fixture(false, 88);
  const PointCloud c = helpers::random_cloud(64, 89);
  const std::vector<LayerRecord> records = encode(f.encoder, c);
  const Matrix fused = point_features(records, f.decoder, f.config);

  // Step-by-step oracle built from public operations only.
  Matrix incoming = records[2].attributes;
  for (std::size_t s = 0; s < 2; ++s) {
    const LayerRecord& coarser = records[2 - s];
    const LayerRecord& finer = records[1 - s];
    const SaabTransform& t = f.decoder.steps[s];
    const int k = f.config.decoder_k[s];

    Matrix out(finer.size(), t.output_dim());
    for (int i = 0; i < finer.size(); ++i) {
      const NeighborList nb = knn(coarser.coords, finer.coords[static_cast<std::size_t>(i)], k);
      const Matrix stack = quadrant_mean_stack(finer.coords[static_cast<std::size_t>(i)], nb,
                                               coarser.coords, incoming);
      Matrix agg(4, incoming.cols());
      for (Eigen::Index d = 0; d < incoming.cols(); ++d) {
        agg.col(d) = aggregate_selected(stack.col(d), f.config.schemes);
      }
      out.row(i) = t.apply(flatten(agg)).transpose();
    }
    Matrix next(finer.size(), out.cols() + finer.attributes.cols());
    next << out, finer.attributes;
    incoming = std::move(next);
  }
  REQUIRE(incoming.rows() == fused.rows());
  REQUIRE(incoming.cols() == fused.cols());
  CHECK((incoming - fused).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("receptive field grows with depth") {
  const Fixture f = make_fixture(false, 221);
  const auto avg_pairwise = [](const std::vector<Point3>& pts) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        sum += std::sqrt(squared_distance(pts[i], pts[j]));
        ++count;
      }
    }
    return sum / count;
  };

  int monotone = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud c = helpers::random_cloud(64, 9000 + static_cast<std::uint64_t>(trial));
    const std::vector<LayerRecord> records = encode(f.encoder, c);
    bool ok = true;
    for (std::size_t l = 0; l + 1 < records.size(); ++l) {
      if (avg_pairwise(records[l + 1].coords) < avg_pairwise(records[l].coords)) ok = false;
    }
    monotone += ok;
  }
  CHECK(monotone >= 95);
}
