#pragma once

#include <cstdint>

#include "uff/types.hpp"

namespace uff {

/// Streaming second-order statistics for fitting one Saab transform.
/// Residuals are taken against the analytic DC direction (1/sqrt(D))*1, not
/// the empirical mean, so accumulation stays one-pass and mergeable.
struct SaabStats {
  std::uint64_t n = 0;
  Vector sum;            // per-dimension input sum
  Matrix scatter;        // sum of r r^T over DC-removed residuals r
  double max_norm = 0.0; // running max of input L2 norms
  double dc_sq_sum = 0.0;  // sum of squared DC projections; the DC share of energy

  SaabStats() = default;
  explicit SaabStats(Eigen::Index dim);

  Eigen::Index dim() const { return sum.size(); }
  bool empty() const { return n == 0; }

  void accumulate(const Eigen::Ref<const Vector>& sample);
  /// One call per row of `samples`; equals row-by-row accumulation up to
  /// floating-point reassociation.
  void accumulate_batch(const Eigen::Ref<const Matrix>& samples);
  void merge(const SaabStats& other);
};

/// How many output channels a fit keeps.
struct KeepPolicy {
  enum class Mode { Energy, Fixed };
  Mode mode = Mode::Energy;
  double threshold = 0.999;  // Energy mode: smallest K whose cumulative energy share reaches this
  int max_dim = 0;           // cap on K; exact K in Fixed mode; 0 = uncapped (Energy mode only)
};

/// Fitted Saab transform: one analytic DC kernel plus PCA-derived AC kernels
/// on the subspace orthogonal to it, with a per-channel bias that makes every
/// response non-negative over the fitting set.
struct SaabTransform {
  Vector dc_kernel;   // (1/sqrt(D)) * ones
  Matrix ac_kernels;  // (K-1) x D, descending eigenvalue order
  Vector energies;    // K energy shares of total input energy, sorted descending
  Vector bias;        // K non-negative shifts; zero until recorded

  Eigen::Index input_dim() const { return dc_kernel.size(); }
  Eigen::Index output_dim() const { return ac_kernels.rows() + 1; }

  /// All kernels as rows, DC first.
  Matrix kernel_matrix() const;

  /// Raw responses (no bias), one output row per input row. Accumulation
  /// runs in a fixed scalar order so a row's response never depends on which
  /// rows surround it.
  Matrix project_rows(const Eigen::Ref<const Matrix>& rows) const;

  /// Responses plus bias.
  Matrix apply_rows(const Eigen::Ref<const Matrix>& rows) const;
  Vector apply(const Eigen::Ref<const Vector>& sample) const;

  /// Grow bias to cover |response| over `rows` (the second fitting pass).
  void record_bias(const Eigen::Ref<const Matrix>& rows);
};

/// Fit from accumulated statistics. Bias comes back zero; callers record it
/// with a pass over the fitting set. Throws on n < 2 or non-finite stats.
SaabTransform saab_fit(const SaabStats& stats, const KeepPolicy& keep);

}  // namespace uff
