#include "uff/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace uff {

namespace {

constexpr char kModelMagic[8] = {'U', 'F', 'F', 'M', 'D', 'L', '0', '1'};
constexpr char kFeatMagic[8] = {'U', 'F', 'F', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kModelVersion = 1;

enum Section : std::uint32_t {
  kEnd = 0,
  kConfig = 1,
  kEncoder = 2,
  kDecoder = 3,
  kClsLsq = 4,
  kClsRf = 5,
  kSegHeads = 6,
  kRunSettings = 7,
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Writer {
  std::string out;

  void bytes(const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i32(x);
  }
  void vec(const Vector& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
};

struct Reader {
  const std::string& in;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("model file: " + what + " at byte offset " + std::to_string(pos));
  }
  void need(std::size_t n) const {
    if (pos + n > in.size()) fail("truncated data");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in[pos++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > in.size()) fail("implausible element count");
    return static_cast<std::size_t>(n);
  }
  std::vector<int> ints() {
    std::vector<int> v(count());
    for (int& x : v) x = i32();
    return v;
  }
  Vector vec() {
    Vector v(static_cast<Eigen::Index>(count()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }
  Matrix mat() {
    const std::size_t rows = count();
    const std::size_t cols = count();
    if (rows * cols > (in.size() - pos) / 8) fail("implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
    return m;
  }
};

void write_keep(Writer& w, const KeepPolicy& kp) {
  w.u8(kp.mode == KeepPolicy::Mode::Fixed ? 1 : 0);
  w.f64(kp.threshold);
  w.i32(kp.max_dim);
}

KeepPolicy read_keep(Reader& r) {
  KeepPolicy kp;
  kp.mode = r.u8() == 1 ? KeepPolicy::Mode::Fixed : KeepPolicy::Mode::Energy;
  kp.threshold = r.f64();
  kp.max_dim = r.i32();
  return kp;
}

void write_config(Writer& w, const PipelineConfig& c) {
  w.i32(c.num_layers);
  w.ints(c.points_per_layer);
  w.ints(c.encoder_k);
  w.ints(c.decoder_k);
  w.u64(c.encoder_keep.size());
  for (const KeepPolicy& kp : c.encoder_keep) write_keep(w, kp);
  w.u64(c.decoder_keep.size());
  for (const KeepPolicy& kp : c.decoder_keep) write_keep(w, kp);
  w.u64(c.schemes.size());
  for (AggScheme s : c.schemes) w.u8(static_cast<std::uint8_t>(s));
}

PipelineConfig read_config(Reader& r) {
  PipelineConfig c;
  c.num_layers = r.i32();
  c.points_per_layer = r.ints();
  c.encoder_k = r.ints();
  c.decoder_k = r.ints();
  c.encoder_keep.resize(r.count());
  for (KeepPolicy& kp : c.encoder_keep) kp = read_keep(r);
  c.decoder_keep.resize(r.count());
  for (KeepPolicy& kp : c.decoder_keep) kp = read_keep(r);
  c.schemes.resize(r.count());
  for (AggScheme& s : c.schemes) {
    const std::uint8_t v = r.u8();
    if (v > 3) r.fail("unknown aggregation scheme");
    s = static_cast<AggScheme>(v);
  }
  return c;
}

void write_transform(Writer& w, const SaabTransform& t) {
  w.vec(t.dc_kernel);
  w.mat(t.ac_kernels);
  w.vec(t.energies);
  w.vec(t.bias);
}

SaabTransform read_transform(Reader& r) {
  SaabTransform t;
  t.dc_kernel = r.vec();
  t.ac_kernels = r.mat();
  t.energies = r.vec();
  t.bias = r.vec();
  return t;
}

void write_forest(Writer& w, const RandomForest& f) {
  w.i32(f.num_classes);
  w.i32(f.params.trees);
  w.i32(f.params.max_features);
  w.i32(f.params.min_leaf);
  w.u64(f.seed);
  w.u64(f.trees.size());
  for (const DecisionTree& tree : f.trees) {
    w.u64(tree.nodes.size());
    for (const DecisionTree::Node& n : tree.nodes) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.u64(n.histogram.size());
      for (std::uint64_t h : n.histogram) w.u64(h);
    }
  }
}

RandomForest read_forest(Reader& r) {
  RandomForest f;
  f.num_classes = r.i32();
  f.params.trees = r.i32();
  f.params.max_features = r.i32();
  f.params.min_leaf = r.i32();
  f.seed = r.u64();
  f.trees.resize(r.count());
  for (DecisionTree& tree : f.trees) {
    tree.nodes.resize(r.count());
    for (DecisionTree::Node& n : tree.nodes) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.histogram.resize(r.count());
      for (std::uint64_t& h : n.histogram) h = r.u64();
    }
  }
  return f;
}

std::string serialize(const UffModel& model) {
  Writer w;
  w.bytes(kModelMagic, 8);
  w.u32(kModelVersion);

  auto section = [&w](std::uint32_t tag, const std::string& payload) {
    w.u32(tag);
    w.u64(payload.size());
    w.out += payload;
  };

  {
    Writer p;
    write_config(p, model.config);
    section(kConfig, p.out);
  }
  {
    Writer p;
    p.u64(model.encoder.layers.size());
    for (const SaabTransform& t : model.encoder.layers) write_transform(p, t);
    section(kEncoder, p.out);
  }
  {
    Writer p;
    p.u64(model.decoder.steps.size());
    for (const SaabTransform& t : model.decoder.steps) write_transform(p, t);
    section(kDecoder, p.out);
  }
  if (model.cls_lsq) {
    Writer p;
    p.mat(model.cls_lsq->weights);
    p.vec(model.cls_lsq->mean);
    p.vec(model.cls_lsq->scale);
    section(kClsLsq, p.out);
  }
  if (model.cls_rf) {
    Writer p;
    write_forest(p, *model.cls_rf);
    section(kClsRf, p.out);
  }
  if (!model.seg_heads.empty()) {
    Writer p;
    p.u64(model.seg_heads.size());
    for (const SegmentationHead& h : model.seg_heads) {
      p.i32(h.object_class);
      p.ints(h.vocabulary);
      write_forest(p, h.forest);
    }
    section(kSegHeads, p.out);
  }
  if (!model.run_settings.empty()) {
    Writer p;
    p.u64(model.run_settings.size());
    p.bytes(model.run_settings.data(), model.run_settings.size());
    section(kRunSettings, p.out);
  }

  w.u32(kEnd);
  w.u64(0);
  return w.out;
}

}  // namespace

void save_model(const UffModel& model, const std::filesystem::path& path) {
  const std::string body = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  Writer tail;
  tail.u64(fnv1a(body));
  out.write(tail.out.data(), static_cast<std::streamsize>(tail.out.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint64_t model_fingerprint(const UffModel& model) { return fnv1a(serialize(model)); }

UffModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 + 4 + 4 + 8 + 8) throw std::runtime_error(path.string() + ": truncated");
  if (std::memcmp(bytes.data(), kModelMagic, 8) != 0) {
    throw std::runtime_error(path.string() + ": not a model file (bad magic)");
  }

  const std::string body = bytes.substr(0, bytes.size() - 8);
  Reader tail{bytes, bytes.size() - 8};
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a(body)) {
    throw std::runtime_error(path.string() + ": fingerprint mismatch; the file is corrupted");
  }

  Reader r{body, 8};
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw std::runtime_error(path.string() + ": unsupported model version " +
                             std::to_string(version));
  }

  UffModel model;
  bool done = false;
  while (!done) {
    const std::uint32_t tag = r.u32();
    const std::uint64_t size = r.u64();
    const std::size_t start = r.pos;
    r.need(static_cast<std::size_t>(size));
    switch (tag) {
      case kEnd:
        done = true;
        break;
      case kConfig:
        model.config = read_config(r);
        break;
      case kEncoder: {
        model.encoder.layers.resize(r.count());
        for (SaabTransform& t : model.encoder.layers) t = read_transform(r);
        break;
      }
      case kDecoder: {
        model.decoder.steps.resize(r.count());
        for (SaabTransform& t : model.decoder.steps) t = read_transform(r);
        break;
      }
      case kClsLsq: {
        LsqClassifier clf;
        clf.weights = r.mat();
        clf.mean = r.vec();
        clf.scale = r.vec();
        model.cls_lsq = std::move(clf);
        break;
      }
      case kClsRf:
        model.cls_rf = read_forest(r);
        break;
      case kSegHeads: {
        model.seg_heads.resize(r.count());
        for (SegmentationHead& h : model.seg_heads) {
          h.object_class = r.i32();
          h.vocabulary = r.ints();
          h.forest = read_forest(r);
        }
        break;
      }
      case kRunSettings: {
        const std::size_t len = r.count();
        r.need(len);
        model.run_settings.assign(body, r.pos, len);
        r.pos += len;
        break;
      }
      default:
        r.fail("unknown section tag " + std::to_string(tag));
    }
    if (r.pos != start + size) r.fail("section size mismatch");
  }

  model.encoder.config = model.config;
  return model;
}

void save_features(const Matrix& features, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kFeatMagic, 8);
  w.mat(features);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Matrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kFeatMagic, 8) != 0) {
    throw std::runtime_error(path.string() + ": not a feature file (bad magic)");
  }
  Reader r{bytes, 8};
  Matrix m = r.mat();
  if (r.pos != bytes.size()) r.fail("trailing bytes");
  return m;
}

}  // namespace uff
