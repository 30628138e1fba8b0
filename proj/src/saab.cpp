#include "uff/saab.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace uff {

namespace {

void check_dim(Eigen::Index got, Eigen::Index want, const char* caller) {
  if (got != want) {
    throw std::invalid_argument(std::string(caller) + ": dimension " + std::to_string(got) +
                                " does not match " + std::to_string(want));
  }
}

}  // namespace

SaabStats::SaabStats(Eigen::Index dim) {
  if (dim < 1) throw std::invalid_argument("SaabStats: dimension must be >= 1");
  sum = Vector::Zero(dim);
  scatter = Matrix::Zero(dim, dim);
}

void SaabStats::accumulate(const Eigen::Ref<const Vector>& sample) {
  check_dim(sample.size(), dim(), "saab accumulate");
  const double dc_coeff = sample.sum() / std::sqrt(static_cast<double>(dim()));
  const Vector resid =
      sample - Vector::Constant(dim(), dc_coeff / std::sqrt(static_cast<double>(dim())));
  n += 1;
  sum += sample;
  scatter.noalias() += resid * resid.transpose();
  max_norm = std::max(max_norm, sample.norm());
  dc_sq_sum += dc_coeff * dc_coeff;
}

void SaabStats::accumulate_batch(const Eigen::Ref<const Matrix>& samples) {
  if (samples.rows() == 0) return;
  check_dim(samples.cols(), dim(), "saab accumulate");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim()));
  const Vector dc_coeffs = samples.rowwise().sum() * inv_sqrt_d;
  Matrix resid = samples;
  resid.noalias() -= dc_coeffs * (Vector::Constant(dim(), inv_sqrt_d).transpose());

  n += static_cast<std::uint64_t>(samples.rows());
  sum += samples.colwise().sum().transpose();
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(resid.transpose());
  scatter.triangularView<Eigen::StrictlyUpper>() =
      scatter.triangularView<Eigen::StrictlyLower>().transpose();
  max_norm = std::max(max_norm, samples.rowwise().norm().maxCoeff());
  dc_sq_sum += dc_coeffs.squaredNorm();
}

void SaabStats::merge(const SaabStats& other) {
  if (other.empty()) return;
  if (empty() && dim() == 0) {
    *this = other;
    return;
  }
  check_dim(other.dim(), dim(), "saab merge");
  n += other.n;
  sum += other.sum;
  scatter += other.scatter;
  max_norm = std::max(max_norm, other.max_norm);
  dc_sq_sum += other.dc_sq_sum;
}

Matrix SaabTransform::kernel_matrix() const {
  Matrix k(output_dim(), input_dim());
  k.row(0) = dc_kernel.transpose();
  if (ac_kernels.rows() > 0) k.bottomRows(ac_kernels.rows()) = ac_kernels;
  return k;
}

Matrix SaabTransform::project_rows(const Eigen::Ref<const Matrix>& rows) const {
  check_dim(rows.cols(), input_dim(), "saab apply");
  const Matrix kernels = kernel_matrix();
  const Eigen::Index d = input_dim();
  const Eigen::Index kk = output_dim();
  Matrix out(rows.rows(), kk);
  // Plain scalar loops: a row's responses are bit-identical no matter how
  // the rows are ordered or batched, which the pipeline's exact invariance
  // guarantees rely on. Rows are independent, so splitting them across
  // threads cannot change any value.
#pragma omp parallel for schedule(static) if (rows.rows() >= 256)
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index k = 0; k < kk; ++k) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) acc += kernels(k, j) * rows(r, j);
      out(r, k) = acc;
    }
  }
  return out;
}

Matrix SaabTransform::apply_rows(const Eigen::Ref<const Matrix>& rows) const {
  Matrix out = project_rows(rows);
  out.rowwise() += bias.transpose();
  return out;
}

Vector SaabTransform::apply(const Eigen::Ref<const Vector>& sample) const {
  return apply_rows(sample.transpose()).row(0).transpose();
}

void SaabTransform::record_bias(const Eigen::Ref<const Matrix>& rows) {
  if (rows.rows() == 0) return;
  const Matrix resp = project_rows(rows);
  bias = bias.cwiseMax(resp.cwiseAbs().colwise().maxCoeff().transpose());
}

SaabTransform saab_fit(const SaabStats& stats, const KeepPolicy& keep) {
  const Eigen::Index d = stats.dim();
  if (d < 1) throw std::invalid_argument("saab_fit: statistics were never initialized");
  if (stats.n < 2) {
    throw std::runtime_error("saab_fit: need at least 2 samples, have " +
                             std::to_string(stats.n));
  }
  if (!stats.scatter.allFinite() || !std::isfinite(stats.dc_sq_sum)) {
    throw std::runtime_error("saab_fit: non-finite statistics");
  }
  if (keep.mode == KeepPolicy::Mode::Fixed && keep.max_dim < 1) {
    throw std::invalid_argument("saab_fit: fixed keep policy needs max_dim >= 1");
  }

  SaabTransform t;
  t.dc_kernel = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));

  const double total = stats.dc_sq_sum + stats.scatter.trace();

  struct AcCandidate {
    double eigenvalue;
    Vector kernel;
  };
  std::vector<AcCandidate> cands;

  if (d > 1 && total > 0.0) {
    // Householder reflection taking e1 to -dc; its remaining columns are an
    // orthonormal basis of the subspace orthogonal to the DC direction.
    Vector v = t.dc_kernel;
    v(0) += 1.0;
    Matrix h = Matrix::Identity(d, d) - (2.0 / v.squaredNorm()) * (v * v.transpose());
    const Matrix basis = h.rightCols(d - 1);

    const Matrix reduced = basis.transpose() * stats.scatter * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(reduced);
    if (solver.info() != Eigen::Success) {
      throw std::runtime_error("saab_fit: eigendecomposition failed");
    }

    const double drop = 1e-12 * total;
    for (Eigen::Index i = d - 2; i >= 0; --i) {  // solver returns ascending order
      const double lambda = solver.eigenvalues()(i);
      if (!(lambda > drop)) continue;
      Vector kern = basis * solver.eigenvectors().col(i);
      // Sign convention: the first nonzero component is positive, where
      // "nonzero" means above a relative threshold so components that are
      // only FP noise around an analytic zero cannot flip the sign.
      const double tiny = 1e-9 * kern.cwiseAbs().maxCoeff();
      for (Eigen::Index c = 0; c < kern.size(); ++c) {
        if (std::abs(kern(c)) > tiny) {
          if (kern(c) < 0.0) kern = -kern;
          break;
        }
      }
      cands.push_back({lambda, std::move(kern)});
    }
    // Equal eigenvalues: fall back to lexicographic kernel order so the fit
    // is a pure function of the statistics.
    std::stable_sort(cands.begin(), cands.end(), [](const AcCandidate& a, const AcCandidate& b) {
      if (a.eigenvalue != b.eigenvalue) return a.eigenvalue > b.eigenvalue;
      return std::lexicographical_compare(a.kernel.begin(), a.kernel.end(), b.kernel.begin(),
                                          b.kernel.end());
    });
  }

  int keep_ac = static_cast<int>(cands.size());
  if (keep.mode == KeepPolicy::Mode::Fixed) {
    keep_ac = std::min(keep_ac, keep.max_dim - 1);
  } else {
    if (total > 0.0) {
      double cumulative = stats.dc_sq_sum;
      const double target = keep.threshold * total;
      int need = 0;
      while (need < static_cast<int>(cands.size()) && cumulative < target) {
        cumulative += cands[need].eigenvalue;
        ++need;
      }
      keep_ac = need;
    }
    if (keep.max_dim > 0) keep_ac = std::min(keep_ac, keep.max_dim - 1);
  }
  keep_ac = std::max(keep_ac, 0);

  t.ac_kernels = Matrix(keep_ac, d);
  std::vector<double> shares;
  shares.push_back(total > 0.0 ? stats.dc_sq_sum / total : 0.0);
  for (int i = 0; i < keep_ac; ++i) {
    t.ac_kernels.row(i) = cands[i].kernel.transpose();
    shares.push_back(cands[i].eigenvalue / total);
  }
  std::sort(shares.begin(), shares.end(), std::greater<double>());
  t.energies = Eigen::Map<const Vector>(shares.data(), static_cast<Eigen::Index>(shares.size()));
  t.bias = Vector::Zero(t.output_dim());
  return t;
}

}  // namespace uff
