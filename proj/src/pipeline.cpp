#include "uff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace uff {

namespace {

double sorted_sum(std::vector<double>& vals) {
  std::sort(vals.begin(), vals.end());
  double s = 0.0;
  for (double v : vals) s += v;
  return s;
}

Vector flatten_rows(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());  // Matrix is row-major
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Flattened octant stack feeding one encoder-layer Saab application.
Vector encoder_stack(const LayerRecord& rec, const KdTree& tree, int i, int k,
                     bool center_relative) {
  const NeighborList nb = tree.knn(rec.coords[i], k);
  const Matrix stack =
      center_relative ? quadrant_offset_stack(rec.coords[i], nb, rec.coords)
                      : quadrant_mean_stack(rec.coords[i], nb, rec.coords, rec.attributes);
  return flatten_rows(stack);
}

// All stacks of one record as rows.
Matrix unit_stacks(const LayerRecord& rec, int k, bool center_relative) {
  if (k < 1 || k > rec.size()) {
    throw std::out_of_range("pointhop: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(rec.size()) + "]");
  }
  if (!center_relative && rec.attributes.rows() != rec.size()) {
    throw std::invalid_argument("pointhop: record has " + std::to_string(rec.size()) +
                                " points but " + std::to_string(rec.attributes.rows()) +
                                " attribute rows");
  }
  const KdTree tree(rec.coords);
  const Eigen::Index dim = center_relative ? 24 : 8 * rec.attributes.cols();
  Matrix out(rec.size(), dim);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rec.size(); ++i) {
    out.row(i) = encoder_stack(rec, tree, i, k, center_relative).transpose();
  }
  return out;
}

// Flattened M x D aggregate of one decoder gather.
Vector decoder_gather(const Point3& query, const KdTree& tree, std::span<const Point3> coarse,
                      const Matrix& incoming, int k, std::span<const AggScheme> schemes) {
  const NeighborList nb = tree.knn(query, k);
  const Matrix stack = quadrant_mean_stack(query, nb, coarse, incoming);
  Matrix agg(static_cast<Eigen::Index>(schemes.size()), incoming.cols());
  for (Eigen::Index d = 0; d < incoming.cols(); ++d) {
    const Vector col = stack.col(d);
    agg.col(d) = aggregate_selected(col, schemes);
  }
  return flatten_rows(agg);
}

Matrix decoder_gather_rows(const LayerRecord& finer, const LayerRecord& coarser,
                           const Matrix& incoming, int k, std::span<const AggScheme> schemes) {
  if (incoming.rows() != coarser.size()) {
    throw std::invalid_argument("decoder_step: incoming has " + std::to_string(incoming.rows()) +
                                " rows but the coarser layer has " +
                                std::to_string(coarser.size()) + " points");
  }
  if (k < 1 || k > coarser.size()) {
    throw std::out_of_range("decoder_step: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(coarser.size()) + "]");
  }
  const KdTree tree(coarser.coords);
  Matrix out(finer.size(), static_cast<Eigen::Index>(schemes.size()) * incoming.cols());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < finer.size(); ++i) {
    out.row(i) =
        decoder_gather(finer.coords[i], tree, coarser.coords, incoming, k, schemes).transpose();
  }
  return out;
}

std::vector<Point3> take_points(const std::vector<Point3>& pts, const std::vector<int>& idx) {
  std::vector<Point3> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(pts[i]);
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::defaults(int input_points) {
  PipelineConfig c;
  c.num_layers = 4;
  c.points_per_layer = {input_points, input_points / 2, input_points / 4, input_points / 8};
  c.encoder_k = {32, 32, 32, 32};
  c.decoder_k = {8, 8, 8};
  KeepPolicy kp;
  kp.threshold = 0.999;
  kp.max_dim = 64;
  c.encoder_keep.assign(4, kp);
  c.decoder_keep.assign(3, kp);
  return c;
}

void PipelineConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument("pipeline config: " + msg);
  };
  const std::size_t layers = static_cast<std::size_t>(num_layers);
  if (num_layers < 2) fail("need at least 2 layers");
  if (points_per_layer.size() != layers) fail("points_per_layer length != num_layers");
  if (encoder_k.size() != layers) fail("encoder_k length != num_layers");
  if (encoder_keep.size() != layers) fail("encoder_keep length != num_layers");
  if (decoder_k.size() != layers - 1) fail("decoder_k length != num_layers - 1");
  if (decoder_keep.size() != layers - 1) fail("decoder_keep length != num_layers - 1");
  if (schemes.empty()) fail("need at least one aggregation scheme");
  for (std::size_t l = 0; l < layers; ++l) {
    if (points_per_layer[l] < 1) fail("points_per_layer must be positive");
    if (l > 0 && points_per_layer[l] > points_per_layer[l - 1]) {
      fail("points_per_layer must be non-increasing");
    }
    if (encoder_k[l] < 1 || encoder_k[l] > points_per_layer[l]) {
      fail("encoder_k[" + std::to_string(l) + "] outside [1, points_per_layer]");
    }
  }
  for (std::size_t s = 0; s + 1 < layers; ++s) {
    const int coarser = points_per_layer[layers - 1 - s];
    if (decoder_k[s] < 1 || decoder_k[s] > coarser) {
      fail("decoder_k[" + std::to_string(s) + "] outside [1, coarser layer size]");
    }
  }
  auto check_keep = [&](const std::vector<KeepPolicy>& kps) {
    for (const KeepPolicy& kp : kps) {
      if (kp.mode == KeepPolicy::Mode::Energy &&
          !(kp.threshold > 0.0 && kp.threshold <= 1.0)) {
        fail("energy threshold must be in (0, 1]");
      }
      if (kp.max_dim < 0) fail("max_dim must be >= 0");
      if (kp.mode == KeepPolicy::Mode::Fixed && kp.max_dim < 1) {
        fail("fixed keep policy needs max_dim >= 1");
      }
    }
  };
  check_keep(encoder_keep);
  check_keep(decoder_keep);
}

Eigen::Vector4d aggregate(const Eigen::Ref<const Vector>& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw std::out_of_range("aggregate: empty vector");
  std::vector<double> work(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) work[static_cast<std::size_t>(i)] = v(i);
  const double mean = sorted_sum(work) / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) work[static_cast<std::size_t>(i)] = std::abs(v(i));
  const double l1 = sorted_sum(work);
  for (Eigen::Index i = 0; i < n; ++i) work[static_cast<std::size_t>(i)] = v(i) * v(i);
  const double l2 = std::sqrt(sorted_sum(work));
  const double linf = v.cwiseAbs().maxCoeff();
  return {mean, l1, l2, linf};
}

Vector aggregate_selected(const Eigen::Ref<const Vector>& v,
                          std::span<const AggScheme> schemes) {
  const Eigen::Vector4d all = aggregate(v);
  Vector out(static_cast<Eigen::Index>(schemes.size()));
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = all(static_cast<int>(schemes[i]));
  }
  return out;
}

SaabTransform pointhop_unit_fit(std::span<const LayerRecord> records, int k,
                                const KeepPolicy& keep, bool center_relative) {
  if (records.empty()) throw std::runtime_error("pointhop_unit_fit: no records to fit on");
  const Eigen::Index attr_dim = records[0].attributes.cols();
  for (const LayerRecord& rec : records) {
    if (!center_relative && rec.attributes.cols() != attr_dim) {
      throw std::invalid_argument("pointhop_unit_fit: records disagree on attribute dimension");
    }
  }

  SaabStats stats(center_relative ? 24 : 8 * attr_dim);
  for (const LayerRecord& rec : records) {
    stats.accumulate_batch(unit_stacks(rec, k, center_relative));
  }
  SaabTransform t = saab_fit(stats, keep);
  for (const LayerRecord& rec : records) {
    t.record_bias(unit_stacks(rec, k, center_relative));
  }
  return t;
}

Matrix pointhop_unit_apply(const SaabTransform& t, const LayerRecord& record, int k,
                           bool center_relative) {
  return t.apply_rows(unit_stacks(record, k, center_relative));
}

std::vector<LayerRecord> encode(const EncoderModel& model, const PointCloud& cloud) {
  const PipelineConfig& cfg = model.config;
  cfg.validate();
  if (model.layers.size() != static_cast<std::size_t>(cfg.num_layers)) {
    throw std::invalid_argument("encode: model has " + std::to_string(model.layers.size()) +
                                " fitted layers for " + std::to_string(cfg.num_layers));
  }
  if (cloud.empty()) throw std::out_of_range("encode: empty cloud");
  if (static_cast<int>(cloud.size()) < cfg.points_per_layer.back()) {
    throw std::out_of_range("encode: cloud of " + std::to_string(cloud.size()) +
                            " points is below the layer schedule minimum " +
                            std::to_string(cfg.points_per_layer.back()));
  }

  std::vector<LayerRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.num_layers));

  LayerRecord working{cloud.points, Matrix(static_cast<Eigen::Index>(cloud.size()), 0)};
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (l > 0) {
      const int target = cfg.points_per_layer[static_cast<std::size_t>(l)];
      const LayerRecord& prev = records.back();
      if (target > prev.size()) {
        throw std::out_of_range("encode: layer " + std::to_string(l + 1) + " wants " +
                                std::to_string(target) + " points but only " +
                                std::to_string(prev.size()) + " are available");
      }
      const std::vector<int> idx = farthest_point_sample(prev.coords, target);
      working = {take_points(prev.coords, idx), take_rows(prev.attributes, idx)};
    }
    Matrix attrs = pointhop_unit_apply(model.layers[static_cast<std::size_t>(l)], working,
                                       cfg.encoder_k[static_cast<std::size_t>(l)], l == 0);
    records.push_back({std::move(working.coords), std::move(attrs)});
  }
  return records;
}

EncoderModel fit_encoder(std::span<const PointCloud> clouds, const PipelineConfig& config,
                         std::vector<std::vector<LayerRecord>>* encoded_out) {
  config.validate();
  if (clouds.empty()) throw std::runtime_error("fit_encoder: empty dataset");
  for (const PointCloud& c : clouds) {
    if (static_cast<int>(c.size()) < config.points_per_layer.back()) {
      throw std::out_of_range("fit_encoder: cloud of " + std::to_string(c.size()) +
                              " points is below the layer schedule minimum");
    }
  }

  const int n = static_cast<int>(clouds.size());
  std::vector<LayerRecord> working(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    working[static_cast<std::size_t>(c)] = {
        clouds[static_cast<std::size_t>(c)].points,
        Matrix(static_cast<Eigen::Index>(clouds[static_cast<std::size_t>(c)].size()), 0)};
  }

  EncoderModel model;
  model.config = config;
  std::vector<std::vector<LayerRecord>> encoded(static_cast<std::size_t>(n));

  for (int l = 0; l < config.num_layers; ++l) {
    const int k = config.encoder_k[static_cast<std::size_t>(l)];
    const bool first = l == 0;
    SaabTransform t =
        pointhop_unit_fit(working, k, config.encoder_keep[static_cast<std::size_t>(l)], first);

    for (int c = 0; c < n; ++c) {
      auto& w = working[static_cast<std::size_t>(c)];
      Matrix attrs = pointhop_unit_apply(t, w, k, first);
      encoded[static_cast<std::size_t>(c)].push_back({w.coords, std::move(attrs)});
    }
    model.layers.push_back(std::move(t));

    if (l + 1 < config.num_layers) {
      const int target = config.points_per_layer[static_cast<std::size_t>(l) + 1];
      for (int c = 0; c < n; ++c) {
        const LayerRecord& rec = encoded[static_cast<std::size_t>(c)].back();
        if (target > rec.size()) {
          throw std::out_of_range("fit_encoder: layer schedule exceeds cloud size");
        }
        const std::vector<int> idx = farthest_point_sample(rec.coords, target);
        working[static_cast<std::size_t>(c)] = {take_points(rec.coords, idx),
                                                take_rows(rec.attributes, idx)};
      }
    }
  }

  if (encoded_out) *encoded_out = std::move(encoded);
  return model;
}

Matrix decoder_step(const LayerRecord& finer, const LayerRecord& coarser, const Matrix& incoming,
                    const SaabTransform& t, int k, std::span<const AggScheme> schemes) {
  return t.apply_rows(decoder_gather_rows(finer, coarser, incoming, k, schemes));
}

DecoderModel fit_decoder(std::span<const std::vector<LayerRecord>> encoded,
                         const PipelineConfig& config) {
  config.validate();
  if (encoded.empty()) throw std::runtime_error("fit_decoder: empty dataset");
  const std::size_t layers = static_cast<std::size_t>(config.num_layers);
  for (const auto& rec : encoded) {
    if (rec.size() != layers) {
      throw std::invalid_argument("fit_decoder: encoded records do not match num_layers");
    }
  }

  const std::size_t n = encoded.size();
  std::vector<Matrix> incoming(n);
  for (std::size_t c = 0; c < n; ++c) incoming[c] = encoded[c][layers - 1].attributes;

  DecoderModel model;
  for (std::size_t s = 0; s + 1 < layers; ++s) {
    const std::size_t coarser = layers - 1 - s;
    const std::size_t finer = coarser - 1;
    const int k = config.decoder_k[s];

    SaabStats stats(static_cast<Eigen::Index>(config.schemes.size()) * incoming[0].cols());
    for (std::size_t c = 0; c < n; ++c) {
      stats.accumulate_batch(decoder_gather_rows(encoded[c][finer], encoded[c][coarser],
                                                 incoming[c], k, config.schemes));
    }
    SaabTransform t = saab_fit(stats, config.decoder_keep[s]);
    for (std::size_t c = 0; c < n; ++c) {
      t.record_bias(decoder_gather_rows(encoded[c][finer], encoded[c][coarser], incoming[c], k,
                                        config.schemes));
    }

    for (std::size_t c = 0; c < n; ++c) {
      Matrix out = t.apply_rows(decoder_gather_rows(encoded[c][finer], encoded[c][coarser],
                                                    incoming[c], k, config.schemes));
      incoming[c] = hconcat(out, encoded[c][finer].attributes);
    }
    model.steps.push_back(std::move(t));
  }
  return model;
}

Vector shape_feature(std::span<const LayerRecord> records, std::span<const AggScheme> schemes) {
  if (records.empty()) throw std::invalid_argument("shape_feature: no layer records");
  const Eigen::Index m = static_cast<Eigen::Index>(schemes.size());
  Eigen::Index total = 0;
  for (const LayerRecord& rec : records) total += rec.attributes.cols();

  Vector out(m * total);
  Eigen::Index offset = 0;
  for (const LayerRecord& rec : records) {
    const Eigen::Index d = rec.attributes.cols();
    Matrix agg(m, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vector col = rec.attributes.col(j);
      agg.col(j) = aggregate_selected(col, schemes);
    }
    out.segment(offset, m * d) = flatten_rows(agg);
    offset += m * d;
  }
  return out;
}

Matrix point_features(std::span<const LayerRecord> records, const DecoderModel& decoder,
                      const PipelineConfig& config) {
  config.validate();
  const std::size_t layers = static_cast<std::size_t>(config.num_layers);
  if (records.size() != layers) {
    throw std::invalid_argument("point_features: record count does not match num_layers");
  }
  if (decoder.steps.size() != layers - 1) {
    throw std::invalid_argument("point_features: decoder has " +
                                std::to_string(decoder.steps.size()) + " steps, expected " +
                                std::to_string(layers - 1));
  }

  Matrix incoming = records[layers - 1].attributes;
  for (std::size_t s = 0; s + 1 < layers; ++s) {
    const std::size_t coarser = layers - 1 - s;
    const std::size_t finer = coarser - 1;
    Matrix out = decoder_step(records[finer], records[coarser], incoming, decoder.steps[s],
                              config.decoder_k[s], config.schemes);
    incoming = hconcat(out, records[finer].attributes);
  }
  return incoming;
}

}  // namespace uff
