#pragma once

#include <span>
#include <vector>

#include "uff/geometry.hpp"
#include "uff/saab.hpp"
#include "uff/types.hpp"

namespace uff {

enum class AggScheme { Mean, L1, L2, Linf };

/// Structural settings for the encoder/decoder cascade.
struct PipelineConfig {
  int num_layers = 4;
  std::vector<int> points_per_layer;   // N^1..N^L, non-increasing
  std::vector<int> encoder_k;          // neighborhood size per encoder layer
  std::vector<int> decoder_k;          // neighborhood size per decoder step (L-1 entries)
  std::vector<KeepPolicy> encoder_keep;
  std::vector<KeepPolicy> decoder_keep;
  std::vector<AggScheme> schemes = {AggScheme::Mean, AggScheme::L1, AggScheme::L2,
                                    AggScheme::Linf};

  /// Defaults for a given input resolution: schedule N, N/2, N/4, N/8,
  /// k = 32 per encoder layer, k' = 8 per decoder step, energy threshold
  /// 0.999 capped at 64 kept channels.
  static PipelineConfig defaults(int input_points);

  void validate() const;  // throws invalid_argument on inconsistency
};

/// One encoder layer's output: the sampled coordinates and their attributes.
struct LayerRecord {
  std::vector<Point3> coords;  // N^l points
  Matrix attributes;           // N^l x D^l

  int size() const { return static_cast<int>(coords.size()); }
};

struct EncoderModel {
  PipelineConfig config;
  std::vector<SaabTransform> layers;  // one per encoder layer
};

struct DecoderModel {
  std::vector<SaabTransform> steps;  // step i refines layer L-i to layer L-i-1
};

/// (mean, l1, l2, linf) of a vector, each reduction summed in ascending
/// value order so the result is independent of element order.
Eigen::Vector4d aggregate(const Eigen::Ref<const Vector>& v);

/// The subset of aggregate() selected by `schemes`, in scheme order.
Vector aggregate_selected(const Eigen::Ref<const Vector>& v, std::span<const AggScheme> schemes);

/// Fit one Saab transform on the flattened 8 x D octant stacks of every
/// point of every record. With `center_relative` the stacked attribute of a
/// neighbor is its coordinate offset from the query point (the first layer,
/// where no prior attributes exist). Bias is recorded over the same data.
SaabTransform pointhop_unit_fit(std::span<const LayerRecord> records, int k,
                                const KeepPolicy& keep, bool center_relative = false);

/// Transform every point of `record`: k-NN inside the record, octant stack,
/// Saab. Returns N x K attribute matrix in point order.
Matrix pointhop_unit_apply(const SaabTransform& t, const LayerRecord& record, int k,
                           bool center_relative = false);

/// Run the fitted encoder: layer 1 on all input points, then FPS pooling to
/// the configured schedule before each further layer.
std::vector<LayerRecord> encode(const EncoderModel& model, const PointCloud& cloud);

/// Fit all encoder layers over the dataset, feeding each layer's outputs to
/// the next layer's statistics. If `encoded_out` is given it receives every
/// cloud's layer records (saving a re-encode for decoder fitting).
EncoderModel fit_encoder(std::span<const PointCloud> clouds, const PipelineConfig& config,
                         std::vector<std::vector<LayerRecord>>* encoded_out = nullptr);

/// One decoder refinement: for each point of `finer`, k'-NN among the
/// `coarser` points, octant stack of their `incoming` attributes, per-column
/// aggregation over the 8 octants, Saab. Skip concatenation with the finer
/// encoder attributes is the caller's step.
Matrix decoder_step(const LayerRecord& finer, const LayerRecord& coarser, const Matrix& incoming,
                    const SaabTransform& t, int k, std::span<const AggScheme> schemes);

/// Fit the decoder steps L -> L-1 -> ... -> 1 over the encoded dataset,
/// feeding each step's skip-concatenated outputs to the next step.
DecoderModel fit_decoder(std::span<const std::vector<LayerRecord>> encoded,
                         const PipelineConfig& config);

/// Global descriptor: per layer, aggregate every attribute column over the
/// layer's points (M values each), concatenated over layers. Length
/// M * sum(D^l).
Vector shape_feature(std::span<const LayerRecord> records, std::span<const AggScheme> schemes);

/// Per-point descriptors at input resolution: the decoder cascade with skip
/// connections, final columns = decoder layer-1 output then encoder layer-1
/// attributes. One row per input point, in input order.
Matrix point_features(std::span<const LayerRecord> records, const DecoderModel& decoder,
                      const PipelineConfig& config);

}  // namespace uff
