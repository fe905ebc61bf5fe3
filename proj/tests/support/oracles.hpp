#pragma once

// Brute-force reference computations used as test oracles. None of these call
// into the library's metric code; they share only the data types.

#include <cstddef>
#include <optional>
#include <vector>

#include "scene_eval/linalg.hpp"
#include "scene_eval/store.hpp"

namespace scene_eval::oracle {

/// Sum of squared differences in double, then sqrt.
double distance(const EmbeddingSet& a, std::size_t i, const EmbeddingSet& b, std::size_t j);

/// Full sort of every non-self pool distance; returns the k-th.
std::vector<double> radii(const EmbeddingSet& targets, const EmbeddingSet& pool, int k,
                          const std::vector<std::optional<std::size_t>>& self_rows);

struct Member {
  bool inside = false;
  std::optional<std::size_t> ref;
};

/// Tests every sphere; the reference is the nearest covering point, lowest index on ties.
Member membership(const EmbeddingSet& queries, std::size_t q, const EmbeddingSet& points,
                  const std::vector<double>& radii);

double inside_fraction(const EmbeddingSet& queries, const EmbeddingSet& points,
                       const std::vector<double>& radii);

double iou(const ClassSet& a, const ClassSet& b);

double consistency(const EmbeddingSet& generated, const EmbeddingSet& points,
                   const std::vector<double>& radii, const ConditioningMap& conds);

/// Tr((A B)^{1/2}) from the eigenvalues of the (non-symmetric) product A B,
/// computed with Eigen's general eigensolver.
double trace_sqrt_product(const SquareMatrix& a, const SquareMatrix& b);

/// FID with mean/covariance from Eigen and the trace term above.
double fid(const EmbeddingSet& x, const EmbeddingSet& y);

/// Eigen's self-adjoint solver; eigenvalues ascending.
std::vector<double> eigenvalues(const SquareMatrix& a);

/// Minimal normalized-histogram L1 over every size-`size` subset of the
/// per-item histograms (given as dense count vectors).
double exhaustive_min_l1(const std::vector<std::vector<long>>& items,
                         const std::vector<long>& target, std::size_t size);

double l1(const std::vector<long>& a, const std::vector<long>& b);

/// Predicted class of each crop: class of the nearest other crop after a full
/// (distance, row) sort.
std::vector<ClassId> one_nn_predictions(const EmbeddingSet& crops);

/// Per-conditioning mean of all same-conditioning cross-seed pair distances,
/// then (mean, population std) across conditionings.
std::pair<double, double> diversity(const EmbeddingSet& generated);

}  // namespace scene_eval::oracle
