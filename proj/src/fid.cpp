#include "fidsearch/fid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fidsearch/errors.hpp"

namespace fidsearch {
namespace {

void check_symmetric(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) throw_validation(std::string(name) + " is not square");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double tol = 1e-9 * std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        throw_validation(std::string(name) + " is not symmetric at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }
    }
  }
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Symmetric PSD square root, negative eigenvalues clamped to 0.
Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(a));
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed in matrix square root");
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

// Sum of sqrt of the clamped eigenvalues of a symmetric matrix, ascending order.
double sum_sqrt_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed in trace of square root");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) sum += std::sqrt(std::max(0.0, eig.eigenvalues()(i)));
  return sum;
}

bool needs_regularization(double value, double scale) {
  return !std::isfinite(value) || value < -1e-8 * std::max(scale, 1e-300);
}

}  // namespace

Matrix to_matrix(const FeatureTable& table, std::span<const std::size_t> rows) {
  const std::size_t n = rows.empty() ? table.rows() : rows.size();
  const std::size_t d = table.dim();
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rows.empty() ? i : rows[i];
    auto src = table.row(r);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = static_cast<double>(src[j]);
  }
  return out;
}

GaussianStats summarize(const Matrix& rows) {
  if (rows.rows() < 2) throw_validation("summarize needs at least 2 rows, got " + std::to_string(rows.rows()));
  if (rows.cols() < 1) throw_validation("summarize needs at least 1 column");
  if (!rows.allFinite()) throw_validation("summarize input contains non-finite values");
  GaussianStats out;
  out.count = static_cast<std::size_t>(rows.rows());
  out.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - out.mean.transpose();
  out.cov = symmetrized((centered.transpose() * centered) / static_cast<double>(rows.rows() - 1));
  return out;
}

GaussianStats summarize(const FeatureTable& table, std::span<const std::size_t> rows) {
  return summarize(to_matrix(table, rows));
}

void validate_stats(const GaussianStats& stats) {
  if (stats.count < 2) throw_validation("Gaussian summary needs count >= 2");
  if (stats.cov.rows() != stats.mean.size()) throw_validation("covariance and mean dimensions differ");
  check_symmetric(stats.cov, "covariance");
  const double d = static_cast<double>(stats.cov.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(stats.cov), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed while validating covariance");
  const double floor = -1e-6 * std::abs(stats.cov.trace()) / d;
  if (eig.eigenvalues().minCoeff() < floor) throw_validation("covariance is not positive semi-definite");
}

double trace_sqrt_product(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw_validation("trace_sqrt_product dimension mismatch: " + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()));
  }
  check_symmetric(a, "first covariance");
  check_symmetric(b, "second covariance");
  const Matrix root = psd_sqrt(a);
  return sum_sqrt_eigenvalues(root * b * root);
}

FidResult fid_detailed(const GaussianStats& s, const GaussianStats& t) {
  if (s.dim() != t.dim() || s.cov.rows() != t.cov.rows()) {
    throw_validation("fid dimension mismatch: " + std::to_string(s.dim()) + " vs " + std::to_string(t.dim()));
  }
  const double mean_term = (s.mean - t.mean).squaredNorm();
  const double trace_s = s.cov.trace();
  const double trace_t = t.cov.trace();
  const double scale = mean_term + std::abs(trace_s) + std::abs(trace_t);

  FidResult out;
  double value = std::numeric_limits<double>::quiet_NaN();
  try {
    value = mean_term + trace_s + trace_t - 2.0 * trace_sqrt_product(s.cov, t.cov);
  } catch (const NumericError&) {
  }
  if (needs_regularization(value, scale)) {
    const double d = static_cast<double>(s.dim());
    double eps = 1e-6 * (trace_s + trace_t) / (2.0 * d);
    if (!(eps > 0.0)) eps = 1e-6;
    const Matrix eye = Matrix::Identity(s.cov.rows(), s.cov.cols());
    const Matrix cs = s.cov + eps * eye;
    const Matrix ct = t.cov + eps * eye;
    value = mean_term + cs.trace() + ct.trace() - 2.0 * trace_sqrt_product(cs, ct);
    out.regularized = true;
    if (!std::isfinite(value)) throw NumericError("fid is non-finite even after regularization");
  }
  out.value = std::max(0.0, value);
  return out;
}

double fid(const GaussianStats& s, const GaussianStats& t) { return fid_detailed(s, t).value; }

SampleFactor SampleFactor::from_rows(const Matrix& rows) {
  if (rows.rows() < 2) throw_validation("sample factor needs at least 2 rows, got " + std::to_string(rows.rows()));
  if (!rows.allFinite()) throw_validation("sample factor input contains non-finite values");
  SampleFactor out;
  out.count = static_cast<std::size_t>(rows.rows());
  out.mean = rows.colwise().mean().transpose();
  out.centered = (rows.rowwise() - out.mean.transpose()) / std::sqrt(static_cast<double>(rows.rows() - 1));
  out.cov_trace = out.centered.squaredNorm();
  return out;
}

double fid_factored(const SampleFactor& s, const SampleFactor& t) {
  if (s.mean.size() != t.mean.size()) {
    throw_validation("fid dimension mismatch: " + std::to_string(s.mean.size()) + " vs " +
                     std::to_string(t.mean.size()));
  }
  // Tr((Ys^T Ys Yt^T Yt)^{1/2}) equals the sum of singular values of Ys Yt^T.
  const Matrix cross = s.centered * t.centered.transpose();
  Eigen::BDCSVD<Matrix> svd(cross);
  const double nuclear = svd.singularValues().sum();
  const double value = (s.mean - t.mean).squaredNorm() + s.cov_trace + t.cov_trace - 2.0 * nuclear;
  if (!std::isfinite(value)) throw NumericError("factored fid is non-finite");
  return std::max(0.0, value);
}

bool prefers_factored(std::size_t count, std::size_t target_count, std::size_t dim) {
  return std::min(count, target_count) <= dim;
}

FidReference::FidReference(const Matrix& target_rows)
    : stats_(summarize(target_rows)), factor_(SampleFactor::from_rows(target_rows)) {
  cov_trace_ = stats_.cov.trace();
  if (static_cast<std::size_t>(target_rows.rows()) > stats_.dim()) cov_sqrt_ = psd_sqrt(stats_.cov);
}

double FidReference::distance(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != dim()) {
    throw_validation("fid dimension mismatch: " + std::to_string(rows.cols()) + " vs " + std::to_string(dim()));
  }
  const auto n = static_cast<std::size_t>(rows.rows());
  if (prefers_factored(n, stats_.count, dim())) return fid_factored(SampleFactor::from_rows(rows), factor_);

  const GaussianStats s = summarize(rows);
  const double mean_term = (s.mean - stats_.mean).squaredNorm();
  const double trace_s = s.cov.trace();
  double value = std::numeric_limits<double>::quiet_NaN();
  try {
    value = mean_term + trace_s + cov_trace_ - 2.0 * sum_sqrt_eigenvalues(cov_sqrt_ * s.cov * cov_sqrt_);
  } catch (const NumericError&) {
  }
  if (needs_regularization(value, mean_term + std::abs(trace_s) + std::abs(cov_trace_))) {
    return fid_detailed(s, stats_).value;
  }
  return std::max(0.0, value);
}

}  // namespace fidsearch
