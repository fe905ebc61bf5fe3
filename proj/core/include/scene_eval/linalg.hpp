#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace scene_eval {

/// Dense row-major square matrix of doubles.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  SquareMatrix(std::size_t n, std::vector<double> data);

  static SquareMatrix identity(std::size_t n);
  static SquareMatrix diagonal(std::span<const double> values);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
  const std::vector<double>& data() const { return data_; }

  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;
  /// max |a_ij - a_ji|
  double asymmetry() const;
  void symmetrize();

  SquareMatrix transposed() const;
  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);
  friend SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b);

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct SymmetricEigen {
  std::vector<double> values;  // descending
  SquareMatrix vectors;        // column j pairs with values[j]
};

struct JacobiOptions {
  double off_diagonal_tolerance = 1e-12;  // relative to ||A||_F
  int max_sweeps = 100;
  double reconstruction_tolerance = 1e-8;  // ||Q L Q^T - A||_F / ||A||_F
};

/// Cyclic Jacobi eigendecomposition. The input is symmetrized first. Throws
/// NumericalError if the sweep limit is hit or the reconstruction check fails.
SymmetricEigen symmetric_eigen(const SquareMatrix& a, const JacobiOptions& options = {});

}  // namespace scene_eval
