#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>

#include "fidsearch/features_io.hpp"

namespace fidsearch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gaussian summary (mean, unbiased covariance) of a feature set.
struct GaussianStats {
  Vector mean;
  Matrix cov;
  std::size_t count = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

// Copies the selected float rows (all rows when `rows` is empty) into an n x d double matrix.
Matrix to_matrix(const FeatureTable& table, std::span<const std::size_t> rows = {});

// Column means and (n-1)-divisor covariance, symmetrized. Requires n >= 2 and finite values.
GaussianStats summarize(const Matrix& rows);
GaussianStats summarize(const FeatureTable& table, std::span<const std::size_t> rows = {});

// Throws ValidationError unless count >= 2, cov is square, symmetric within
// 1e-9 * max(1, |cov_ij|) and its smallest eigenvalue is >= -1e-6 * trace / d.
void validate_stats(const GaussianStats& stats);

// Tr((a b)^{1/2}) as the sum of square roots of the eigenvalues of the
// symmetric sandwich a^{1/2} b a^{1/2}. Negative eigenvalues are clamped to 0.
double trace_sqrt_product(const Matrix& a, const Matrix& b);

struct FidResult {
  double value = 0.0;
  bool regularized = false;  // epsilon * I was added to both covariances
};

// ||mu_s - mu_t||^2 + Tr(S_s) + Tr(S_t) - 2 Tr((S_s S_t)^{1/2}), clamped at 0.
// Falls back to covariances + eps*I (eps = 1e-6 * mean diagonal of the pair)
// when the plain evaluation is non-finite or negative beyond round-off.
FidResult fid_detailed(const GaussianStats& s, const GaussianStats& t);
double fid(const GaussianStats& s, const GaussianStats& t);

// Centered, (n-1)^{-1/2}-scaled samples Y so that cov = Y^T Y. Keeps the
// covariance in factored form, which is what makes FID against small subsets
// cheap when n << d.
struct SampleFactor {
  Vector mean;
  Matrix centered;  // n x d
  std::size_t count = 0;
  double cov_trace = 0.0;

  static SampleFactor from_rows(const Matrix& rows);
};

// Same quantity as `fid`, computed as ||Ys Yt^T||_* (nuclear norm) for the
// cross term; exact for any ranks, no regularization needed.
double fid_factored(const SampleFactor& s, const SampleFactor& t);

// A target distribution prepared for many FID evaluations against subsets of
// a pool. Picks the factored route when either side has fewer samples than
// dimensions, and otherwise the dense route with the target's matrix square
// root computed once.
class FidReference {
 public:
  explicit FidReference(const Matrix& target_rows);

  double distance(const Matrix& rows) const;
  double distance(const FeatureTable& table, std::span<const std::size_t> rows) const {
    return distance(to_matrix(table, rows));
  }

  const GaussianStats& stats() const { return stats_; }
  std::size_t dim() const { return stats_.dim(); }

 private:
  GaussianStats stats_;
  SampleFactor factor_;
  Matrix cov_sqrt_;
  double cov_trace_ = 0.0;
};

// True when the factored route is used for subsets of `count` rows against
// a target of `target_count` rows in dimension `dim`.
bool prefers_factored(std::size_t count, std::size_t target_count, std::size_t dim);

}  // namespace fidsearch
