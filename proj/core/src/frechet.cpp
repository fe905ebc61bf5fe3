#include "scene_eval/frechet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scene_eval/errors.hpp"
#include "scene_eval/parallel.hpp"

namespace scene_eval {

namespace {

constexpr double kSymmetryTolerance = 1e-8;
constexpr double kEigenClamp = 1e-8;
constexpr double kNegativeFidTolerance = 1e-6;
constexpr double kRankTolerance = 1e-10;

void require_symmetric(const SquareMatrix& m, const char* name) {
  const double scale = std::max(1.0, m.max_abs());
  if (m.asymmetry() > kSymmetryTolerance * scale) {
    throw ValidationError(std::string(name) + " is not symmetric within tolerance");
  }
}

// Clamps round-off negatives to zero; rejects genuinely indefinite input.
void clamp_psd(std::vector<double>& values, const char* name) {
  double largest = 0.0;
  for (double v : values) largest = std::max(largest, std::abs(v));
  const double floor = -kEigenClamp * largest;
  for (double& v : values) {
    if (v >= 0.0) continue;
    if (v >= floor) {
      v = 0.0;
    } else {
      throw NumericalError(std::string(name) + " is not positive semi-definite (eigenvalue " +
                           std::to_string(v) + ")");
    }
  }
}

}  // namespace

GaussianStats::GaussianStats(std::vector<double> mean, SquareMatrix cov, std::size_t n)
    : mean_(std::move(mean)), cov_(std::move(cov)), n_(n) {
  if (n_ < 2) throw ValidationError("Gaussian fit needs at least 2 samples, got " + std::to_string(n_));
  if (cov_.size() != mean_.size()) throw ValidationError("mean and covariance sizes differ");
  cov_.symmetrize();
}

GaussianStats fit_gaussian(const EmbeddingSet& set) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  if (n < 2) throw ValidationError("Gaussian fit needs at least 2 samples, got " + std::to_string(n));

  // Column-major centered copy so every covariance entry is a dot product of
  // two contiguous columns, each summed in row order.
  std::vector<double> mean(d, 0.0);
  std::vector<double> centered(d * n);
  parallel_for(d, [&](std::size_t c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += static_cast<double>(set.row(r)[c]);
    const double mu = sum / static_cast<double>(n);
    mean[c] = mu;
    double* col = centered.data() + c * n;
    for (std::size_t r = 0; r < n; ++r) col[r] = static_cast<double>(set.row(r)[c]) - mu;
  });

  SquareMatrix cov(d);
  const double denom = static_cast<double>(n - 1);
  parallel_for(d, [&](std::size_t i) {
    const double* ci = centered.data() + i * n;
    for (std::size_t j = i; j < d; ++j) {
      const double* cj = centered.data() + j * n;
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += ci[r] * cj[r];
      cov(i, j) = s / denom;
    }
  });
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) cov(i, j) = cov(j, i);
  }
  return GaussianStats(std::move(mean), std::move(cov), n);
}

double sqrtm_product(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw ValidationError("covariance sizes differ");
  require_symmetric(a, "first covariance");
  require_symmetric(b, "second covariance");
  const std::size_t d = a.size();

  auto ea = symmetric_eigen(a);
  clamp_psd(ea.values, "first covariance");

  // S = L^{1/2} Q^T B Q L^{1/2}
  const SquareMatrix& q = ea.vectors;
  SquareMatrix s = q.transposed() * b * q;
  for (std::size_t i = 0; i < d; ++i) {
    const double si = std::sqrt(ea.values[i]);
    for (std::size_t j = 0; j < d; ++j) s(i, j) *= si * std::sqrt(ea.values[j]);
  }
  s.symmetrize();

  auto es = symmetric_eigen(s);
  clamp_psd(es.values, "product");
  double trace = 0.0;
  for (double v : es.values) trace += std::sqrt(v);
  return trace;
}

double frechet_distance(const GaussianStats& x, const GaussianStats& y) {
  if (x.dim() != y.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                          std::to_string(y.dim()));
  }
  double mean_term = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double diff = x.mean()[i] - y.mean()[i];
    mean_term += diff * diff;
  }
  const double value = mean_term + x.cov().trace() + y.cov().trace() -
                       2.0 * sqrtm_product(x.cov(), y.cov());
  if (value >= 0.0) return value;
  if (value > -kNegativeFidTolerance) return 0.0;
  throw NumericalError("Frechet distance evaluated to " + std::to_string(value));
}

double fid(const EmbeddingSet& x, const EmbeddingSet& y) {
  if (x.dim() != y.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                          std::to_string(y.dim()));
  }
  return frechet_distance(fit_gaussian(x), fit_gaussian(y));
}

std::size_t numerical_rank(const SquareMatrix& symmetric) {
  auto e = symmetric_eigen(symmetric);
  if (e.values.empty() || e.values.front() <= 0.0) return 0;
  const double cutoff = kRankTolerance * e.values.front();
  return static_cast<std::size_t>(
      std::count_if(e.values.begin(), e.values.end(), [&](double v) { return v > cutoff; }));
}

FidReport fid_report(const EmbeddingSet& x, const EmbeddingSet& y) {
  if (x.dim() != y.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                          std::to_string(y.dim()));
  }
  auto sx = fit_gaussian(x);
  auto sy = fit_gaussian(y);
  FidReport r;
  r.fid = frechet_distance(sx, sy);
  r.n_x = x.size();
  r.n_y = y.size();
  r.dim = x.dim();
  r.cov_rank_x = numerical_rank(sx.cov());
  r.cov_rank_y = numerical_rank(sy.cov());
  return r;
}

}  // namespace scene_eval
