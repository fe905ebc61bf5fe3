#include "scene_eval/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scene_eval/errors.hpp"

namespace scene_eval {

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
  if (data_.size() != n * n) throw ValidationError("matrix data does not match n*n");
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::diagonal(std::span<const double> values) {
  SquareMatrix m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

double SquareMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SquareMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double SquareMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double SquareMatrix::asymmetry() const {
  double m = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
  }
  return m;
}

void SquareMatrix::symmetrize() {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
      (*this)(i, j) = v;
      (*this)(j, i) = v;
    }
  }
}

SquareMatrix SquareMatrix::transposed() const {
  SquareMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw ValidationError("matrix size mismatch in product");
  const std::size_t n = a.size();
  SquareMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw ValidationError("matrix size mismatch in difference");
  std::vector<double> d(a.data().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.data()[i] - b.data()[i];
  return SquareMatrix(a.size(), std::move(d));
}

namespace {

double off_diagonal_norm(const SquareMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

// Zeroes a(p, q) with one plane rotation. vt holds the eigenvectors as rows
// so the accumulation touches contiguous memory.
void rotate(SquareMatrix& a, SquareMatrix& vt, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);
  const std::size_t n = a.size();

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    const double nrp = arp - s * (arq + tau * arp);
    const double nrq = arq + s * (arp - tau * arq);
    a(r, p) = nrp;
    a(p, r) = nrp;
    a(r, q) = nrq;
    a(q, r) = nrq;
  }
  double* vp = &vt(p, 0);
  double* vq = &vt(q, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const double vrp = vp[r];
    const double vrq = vq[r];
    vp[r] = vrp - s * (vrq + tau * vrp);
    vq[r] = vrq + s * (vrp - tau * vrq);
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(const SquareMatrix& input, const JacobiOptions& options) {
  const std::size_t n = input.size();
  SquareMatrix a = input;
  a.symmetrize();
  SquareMatrix vt = SquareMatrix::identity(n);
  const double norm = a.frobenius_norm();

  if (norm > 0.0) {
    const double target = options.off_diagonal_tolerance * norm;
    int sweep = 0;
    while (off_diagonal_norm(a) > target) {
      if (++sweep > options.max_sweeps) {
        throw NumericalError("Jacobi eigensolver did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps");
      }
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          if (a(p, q) != 0.0) rotate(a, vt, p, q);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = SquareMatrix(n);
  for (std::size_t col = 0; col < n; ++col) {
    out.values[col] = a(order[col], order[col]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, col) = vt(order[col], r);
  }

  if (norm > 0.0) {
    SquareMatrix scaled = out.vectors;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) scaled(r, c) *= out.values[c];
    }
    SquareMatrix sym = input;
    sym.symmetrize();
    const double rel = (scaled * out.vectors.transposed() - sym).frobenius_norm() / norm;
    if (!(rel <= options.reconstruction_tolerance)) {
      throw NumericalError("eigendecomposition reconstruction error " + std::to_string(rel) +
                           " exceeds tolerance");
    }
  }
  return out;
}

}  // namespace scene_eval
