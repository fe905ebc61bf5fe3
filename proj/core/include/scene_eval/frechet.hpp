#pragma once

#include <cstddef>
#include <vector>

#include "scene_eval/linalg.hpp"
#include "scene_eval/store.hpp"

namespace scene_eval {

/// Sample mean and unbiased (N-1) covariance of an embedding set.
class GaussianStats {
 public:
  /// Symmetrizes cov; throws if n < 2 or shapes disagree.
  GaussianStats(std::vector<double> mean, SquareMatrix cov, std::size_t n);

  const std::vector<double>& mean() const { return mean_; }
  const SquareMatrix& cov() const { return cov_; }
  std::size_t n() const { return n_; }
  std::size_t dim() const { return mean_.size(); }

 private:
  std::vector<double> mean_;
  SquareMatrix cov_;
  std::size_t n_;
};

GaussianStats fit_gaussian(const EmbeddingSet& set);

/// Tr((A B)^{1/2}) for symmetric PSD A, B via A = Q L Q^T and the
/// eigenvalues of L^{1/2} Q^T B Q L^{1/2}. Eigenvalues within
/// [-1e-8 * max|lambda|, 0) are clamped to zero; anything more negative is a
/// NumericalError.
double sqrtm_product(const SquareMatrix& a, const SquareMatrix& b);

/// ||mu_x - mu_y||^2 + Tr(S_x) + Tr(S_y) - 2 Tr((S_x S_y)^{1/2}).
double frechet_distance(const GaussianStats& x, const GaussianStats& y);

double fid(const EmbeddingSet& x, const EmbeddingSet& y);

struct FidReport {
  double fid = 0;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  std::size_t dim = 0;
  std::size_t cov_rank_x = 0;
  std::size_t cov_rank_y = 0;
};

FidReport fid_report(const EmbeddingSet& x, const EmbeddingSet& y);

/// Eigenvalues above 1e-10 * lambda_max.
std::size_t numerical_rank(const SquareMatrix& symmetric);

}  // namespace scene_eval
