#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "uff/io.hpp"
#include "uff/manifest.hpp"
#include "uff/model_io.hpp"
#include "uff/run_config.hpp"
#include "uff/synth.hpp"

using namespace uff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uff_app_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

UffModel make_model() {
  PipelineConfig config;
  config.num_layers = 3;
  config.points_per_layer = {32, 16, 8};
  config.encoder_k = {6, 6, 4};
  config.decoder_k = {4, 4};
  KeepPolicy kp;
  kp.threshold = 0.999;
  kp.max_dim = 8;
  config.encoder_keep.assign(3, kp);
  config.decoder_keep.assign(2, kp);

  std::vector<PointCloud> clouds;
  for (int i = 0; i < 4; ++i) clouds.push_back(helpers::random_cloud(32, 40 + i));

  UffModel model;
  model.config = config;
  std::vector<std::vector<LayerRecord>> encoded;
  model.encoder = fit_encoder(clouds, config, &encoded);
  model.decoder = fit_decoder(encoded, config);

  Matrix shape_rows(4, shape_feature(encoded[0], config.schemes).size());
  for (int i = 0; i < 4; ++i) {
    shape_rows.row(i) = shape_feature(encoded[static_cast<std::size_t>(i)],
                                      config.schemes).transpose();
  }
  const std::vector<int> labels{0, 1, 0, 1};
  model.cls_lsq = lsq_fit(shape_rows, labels, 2, 1e-6);
  RfParams params;
  params.trees = 5;
  model.cls_rf = rf_fit(shape_rows, labels, 2, params, 3);

  SegTrainGroup g;
  g.object_class = 0;
  g.vocabulary = {0, 1};
  g.features = helpers::random_matrix(10, 3, 9);
  for (int i = 0; i < 10; ++i) g.part_labels.push_back(i % 2);
  model.seg_heads = fit_segmentation_heads(std::vector<SegTrainGroup>{g}, params, 4);

  model.run_settings = "seed = 1\nlayers = 3\n";
  return model;
}

}  // namespace

TEST_CASE("ascii cloud parsing") {
  const fs::path dir = scratch("ascii");
  const fs::path p = dir / "cloud.xyz";
  write_text(p,
             "# a comment\n"
             "0 0 0\n"
             "\n"
             "0.5 -1.25 3.0   # trailing comment\n"
             "1e-3 2 3\n");
  const PointCloud c = load_cloud(p);
  REQUIRE(c.size() == 3);
  CHECK(c.points[1].x == 0.5);
  CHECK(c.points[1].y == -1.25);
  CHECK(c.points[2].x == 1e-3);

  write_text(p, "0 0 0\n1 2\n");
  CHECK(error_of([&] { load_cloud(p); }).find("line 2") != std::string::npos);

  write_text(p, "0 0 0\nnan 1 2\n");  // stream extraction rejects nan tokens
  CHECK(error_of([&] { load_cloud(p); }).find("line 2") != std::string::npos);

  CHECK_THROWS(load_cloud(dir / "missing.xyz"));
}

TEST_CASE("binary cloud round trip is exact") {
  const fs::path dir = scratch("binary");
  // Dyadic coordinates survive the float32 payload unchanged.
  const PointCloud c = helpers::dyadic_cloud(100, 17);
  const fs::path p = dir / "cloud.bin";
  save_cloud_binary(p, c);
  const PointCloud back = load_cloud(p);
  REQUIRE(back.size() == c.size());
  for (int i = 0; i < c.size(); ++i) {
    CHECK(back.points[static_cast<std::size_t>(i)].x == c.points[static_cast<std::size_t>(i)].x);
    CHECK(back.points[static_cast<std::size_t>(i)].y == c.points[static_cast<std::size_t>(i)].y);
    CHECK(back.points[static_cast<std::size_t>(i)].z == c.points[static_cast<std::size_t>(i)].z);
  }
  const fs::path p2 = dir / "again.bin";
  save_cloud_binary(p2, back);
  CHECK(read_bytes(p) == read_bytes(p2));

  // Truncation and bad payloads report byte offsets.
  const std::string good = read_bytes(p);
  write_text(dir / "short.bin", good.substr(0, 10));
  CHECK(error_of([&] { load_cloud(dir / "short.bin"); }).find("byte offset") !=
        std::string::npos);
  std::string bad = good;
  bad.resize(bad.size() - 4);  // count no longer matches the payload
  write_text(dir / "bad.bin", bad);
  CHECK(error_of([&] { load_cloud(dir / "bad.bin"); }).find("byte offset") != std::string::npos);

  std::string nan_payload = good;
  nan_payload[12] = '\x00';
  nan_payload[13] = '\x00';
  nan_payload[14] = '\xc0';
  nan_payload[15] = '\x7f';  // first float -> quiet NaN
  write_text(dir / "nan.bin", nan_payload);
  CHECK(error_of([&] { load_cloud(dir / "nan.bin"); }).find("non-finite") != std::string::npos);
}

TEST_CASE("off vertices match the ascii parse") {
  const fs::path dir = scratch("off");
  const std::string coords =
      "-1 -1 -1\n1 -1 -1\n1 1 -1\n-1 1 -1\n-1 -1 1\n1 -1 1\n1 1 1\n-1 1 1\n";
  write_text(dir / "cube.xyz", coords);
  write_text(dir / "cube.off",
             "OFF\n8 1 0\n" + coords + "4 0 1 2 3\n");
  const PointCloud a = load_cloud(dir / "cube.xyz");
  const PointCloud o = load_cloud(dir / "cube.off");
  REQUIRE(a.size() == 8);
  REQUIRE(o.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(o.points[static_cast<std::size_t>(i)].x == a.points[static_cast<std::size_t>(i)].x);
    CHECK(o.points[static_cast<std::size_t>(i)].y == a.points[static_cast<std::size_t>(i)].y);
    CHECK(o.points[static_cast<std::size_t>(i)].z == a.points[static_cast<std::size_t>(i)].z);
  }

  write_text(dir / "bad.off", "OFF\n8 0 0\n0 0 0\n");  // vertex list too short
  CHECK_THROWS(load_cloud(dir / "bad.off"));
}

TEST_CASE("label files round trip") {
  const fs::path dir = scratch("labels");
  const std::vector<int> labels{3, 0, 0, 7, 2};
  save_labels(dir / "l.txt", labels);
  CHECK(load_labels(dir / "l.txt") == labels);
  CHECK(load_labels(dir / "l.txt", 5) == labels);
  CHECK_THROWS(load_labels(dir / "l.txt", 4));  // declared length mismatch

  write_text(dir / "bad.txt", "1\nx\n");
  CHECK(error_of([&] { load_labels(dir / "bad.txt"); }).find("line 2") != std::string::npos);
}

TEST_CASE("ply export") {
  const fs::path dir = scratch("ply");
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  const std::vector<int> parts{0, 1, 2, 0, 1};
  export_ply(dir / "seg.ply", c, parts);
  const std::string text = read_bytes(dir / "seg.ply");
  CHECK(text.rfind("ply\n", 0) == 0);
  CHECK(text.find("element vertex 5") != std::string::npos);
  CHECK(text.find("property uchar red") != std::string::npos);
  const auto header_end = text.find("end_header\n");
  REQUIRE(header_end != std::string::npos);
  const std::string body = text.substr(header_end + 11);
  CHECK(std::count(body.begin(), body.end(), '\n') == 5);

  CHECK_THROWS(export_ply(dir / "bad.ply", c, std::vector<int>{0, 1}));  // length mismatch
}

TEST_CASE("unit sphere normalization") {
  const PointCloud c = helpers::random_cloud(200, 3, 5.0);
  const PointCloud n = normalize_unit_sphere(c);
  double cx = 0.0, cy = 0.0, cz = 0.0, rmax = 0.0;
  for (const Point3& p : n.points) {
    cx += p.x;
    cy += p.y;
    cz += p.z;
  }
  cx /= n.size();
  cy /= n.size();
  cz /= n.size();
  CHECK(std::abs(cx) < 1e-12);
  CHECK(std::abs(cy) < 1e-12);
  CHECK(std::abs(cz) < 1e-12);
  for (const Point3& p : n.points) {
    rmax = std::max(rmax, std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z));
  }
  CHECK(rmax == doctest::Approx(1.0).epsilon(1e-12));

  // Dyadic coordinates so the centroid subtraction is exact.
  PointCloud flat;
  flat.points.assign(6, Point3{0.25, -0.5, 0.75});
  const PointCloud fn = normalize_unit_sphere(flat);
  for (const Point3& p : fn.points) {
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.z == 0.0);
  }
}

TEST_CASE("feature files round trip") {
  const fs::path dir = scratch("features");
  const Matrix m = helpers::random_matrix(7, 13, 21);
  save_features(m, dir / "f.ufff");
  CHECK(load_features(dir / "f.ufff") == m);

  write_text(dir / "junk.ufff", "not a feature file at all");
  CHECK_THROWS(load_features(dir / "junk.ufff"));
}

TEST_CASE("model files round trip bit-exactly") {
  const fs::path dir = scratch("model");
  const UffModel model = make_model();
  const fs::path a = dir / "a.uffm";
  save_model(model, a);
  const UffModel loaded = load_model(a);
  CHECK(model_fingerprint(loaded) == model_fingerprint(model));
  CHECK(loaded.run_settings == model.run_settings);
  REQUIRE(loaded.cls_lsq.has_value());
  REQUIRE(loaded.cls_rf.has_value());
  REQUIRE(loaded.seg_heads.size() == 1);
  CHECK(loaded.cls_lsq->weights == model.cls_lsq->weights);

  const fs::path b = dir / "b.uffm";
  save_model(loaded, b);
  CHECK(read_bytes(a) == read_bytes(b));

  // The loaded pipeline reproduces the original encode bit-for-bit.
  const PointCloud probe = helpers::random_cloud(32, 90);
  const auto r1 = encode(model.encoder, probe);
  const auto r2 = encode(loaded.encoder, probe);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t l = 0; l < r1.size(); ++l) CHECK(r1[l].attributes == r2[l].attributes);
  CHECK(point_features(r1, model.decoder, model.config) ==
        point_features(r2, loaded.decoder, loaded.config));
}

TEST_CASE("model loading rejects damage") {
  const fs::path dir = scratch("damage");
  const UffModel model = make_model();
  const fs::path p = dir / "m.uffm";
  save_model(model, p);
  const std::string good = read_bytes(p);

  std::string flipped = good;
  flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x40);
  write_text(dir / "flip.uffm", flipped);
  CHECK(error_of([&] { load_model(dir / "flip.uffm"); }).find("fingerprint") !=
        std::string::npos);

  // Foreign version with a recomputed checksum: the version check itself fires.
  std::string vbump = good;
  vbump[8] = 99;
  vbump[9] = vbump[10] = vbump[11] = 0;
  const std::string body = vbump.substr(0, vbump.size() - 8);
  const std::uint64_t h = fnv1a64(body);
  for (int i = 0; i < 8; ++i) {
    vbump[body.size() + static_cast<std::size_t>(i)] =
        static_cast<char>((h >> (8 * i)) & 0xff);
  }
  write_text(dir / "vers.uffm", vbump);
  CHECK(error_of([&] { load_model(dir / "vers.uffm"); }).find("version") != std::string::npos);

  write_text(dir / "magic.uffm", "XXXXXXXX" + good.substr(8));
  CHECK(error_of([&] { load_model(dir / "magic.uffm"); }).find("magic") != std::string::npos);

  write_text(dir / "short.uffm", good.substr(0, 16));
  CHECK_THROWS(load_model(dir / "short.uffm"));
}

TEST_CASE("synthetic datasets are loadable and deterministic") {
  const fs::path d1 = scratch("synth1");
  const fs::path d2 = scratch("synth2");
  write_synth_dataset(d1, "cls", 3, 2, 1, 64, 5);
  write_synth_dataset(d2, "cls", 3, 2, 1, 64, 5);

  const DatasetManifest m = load_manifest(d1 / "manifest.json");
  CHECK(m.point_count == 64);
  CHECK(m.class_names == std::vector<std::string>{"sphere", "cube", "cylinder"});
  REQUIRE(m.split("train").size() == 6);
  REQUIRE(m.split("test").size() == 3);
  CHECK(m.split("val").empty());
  for (const SampleRef& s : m.train) {
    CHECK(s.label >= 0);
    CHECK(s.label < 3);
    CHECK(s.parts.empty());
    const PointCloud c = load_cloud(m.resolve(s.cloud));
    CHECK(c.size() == 64);
  }

  CHECK(read_bytes(d1 / "manifest.json") == read_bytes(d2 / "manifest.json"));
  CHECK(read_bytes(m.resolve(m.train[0].cloud)) ==
        read_bytes(d2 / m.train[0].cloud));
}

TEST_CASE("segmentation datasets carry part labels") {
  const fs::path dir = scratch("synthseg");
  write_synth_dataset(dir, "seg", 2, 2, 2, 80, 9);
  const DatasetManifest m = load_manifest(dir / "manifest.json");
  REQUIRE(m.class_parts.size() == 2);
  CHECK(m.class_parts.at(0) == synth_seg_vocabulary(0));
  CHECK(m.class_parts.at(1) == synth_seg_vocabulary(1));
  for (const SampleRef& s : m.train) {
    REQUIRE_FALSE(s.parts.empty());
    const std::vector<int> parts = load_labels(m.resolve(s.parts), 80);
    const std::vector<int>& vocab = m.class_parts.at(s.label);
    for (int p : parts) {
      CHECK(std::find(vocab.begin(), vocab.end(), p) != vocab.end());
    }
  }

  // Both parts of every class actually appear somewhere.
  for (const SampleRef& s : m.train) {
    const std::vector<int> parts = load_labels(m.resolve(s.parts));
    const std::vector<int>& vocab = m.class_parts.at(s.label);
    for (int v : vocab) {
      CHECK(std::count(parts.begin(), parts.end(), v) > 0);
    }
  }
}

TEST_CASE("manifest loading verifies referenced files") {
  const fs::path dir = scratch("manifest");
  write_synth_dataset(dir, "cls", 2, 1, 1, 32, 3);
  const DatasetManifest m = load_manifest(dir / "manifest.json");
  fs::remove(m.resolve(m.train[0].cloud));
  CHECK_THROWS(load_manifest(dir / "manifest.json"));
  CHECK_THROWS(load_manifest(dir / "nope.json"));
  CHECK_THROWS(m.split("validation"));  // not a split name
}

TEST_CASE("run config defaults and overrides") {
  RunConfig cfg;
  CHECK(cfg.get("layers") == "4");
  CHECK(cfg.get_int("keep_cap") == 64);
  CHECK(cfg.get_double("ridge") == 1e-6);
  CHECK(cfg.get_u64("seed") == 1);
  CHECK(cfg.rf_params().trees == 100);
  CHECK(cfg.seg_rf_params().min_leaf == 1);

  CHECK_THROWS(cfg.set("no_such_key", "1"));
  CHECK_THROWS(cfg.set("layers", ""));
  CHECK_THROWS(cfg.get("no_such_key"));

  cfg.load_text("layers = 3  # fewer layers\n\nencoder_k = 8\n");
  CHECK(cfg.get_int("layers") == 3);
  CHECK_THROWS(cfg.load_text("this line has no equals sign\n"));
  CHECK(error_of([&] { cfg.load_text("layers\n"); }).find("line 1") != std::string::npos);

  // echo() re-parses to itself.
  RunConfig other;
  other.load_text(cfg.echo());
  CHECK(other.echo() == cfg.echo());
}

TEST_CASE("run config resolves the pipeline") {
  RunConfig cfg;
  const PipelineConfig def = cfg.pipeline(2048);
  CHECK(def.points_per_layer == std::vector<int>{2048, 1024, 512, 256});
  CHECK(def.encoder_k == std::vector<int>{32, 32, 32, 32});
  CHECK(def.decoder_k == std::vector<int>{8, 8, 8});
  CHECK(def.encoder_keep[0].threshold == 0.999);
  CHECK(def.encoder_keep[0].max_dim == 64);
  CHECK(def.schemes.size() == 4);

  cfg.set("layers", "3");
  cfg.set("schedule", "64,32,16");
  cfg.set("encoder_k", "8");
  cfg.set("decoder_k", "4,4");
  const PipelineConfig small = cfg.pipeline(0);  // explicit schedule ignores the manifest
  CHECK(small.points_per_layer == std::vector<int>{64, 32, 16});
  CHECK(small.encoder_k == std::vector<int>{8, 8, 8});

  cfg.set("schedule", "auto");
  CHECK_THROWS(cfg.pipeline(0));  // auto needs a declared point count

  cfg.set("schedule", "64,32,16");
  cfg.set("encoder_k", "8,8");  // wrong list length
  CHECK_THROWS(cfg.pipeline(0));
  cfg.set("encoder_k", "8");

  cfg.set("aggregations", "mean,max");
  CHECK_THROWS(cfg.pipeline(0));
  cfg.set("aggregations", "l2,linf");
  CHECK(cfg.pipeline(0).schemes ==
        std::vector<AggScheme>{AggScheme::L2, AggScheme::Linf});

  cfg.set("stats_fraction", "0");
  CHECK_THROWS(cfg.pipeline(0));
  cfg.set("stats_fraction", "0.5");
  cfg.set("cls_head", "svm");
  CHECK_THROWS(cfg.pipeline(0));
  cfg.set("cls_head", "rf");
  cfg.set("normalize", "cube");
  CHECK_THROWS(cfg.pipeline(0));
  cfg.set("normalize", "none");
  CHECK_NOTHROW(cfg.pipeline(0));
}
