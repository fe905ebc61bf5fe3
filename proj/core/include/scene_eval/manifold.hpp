#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "scene_eval/store.hpp"

namespace scene_eval {

inline constexpr int kDefaultNeighbors = 5;

/// Euclidean distance accumulated in double: sum of squared differences in
/// index order, then sqrt. Every distance in this module goes through here.
double euclidean_distance(std::span<const float> a, std::span<const float> b);

/// Union of hyperspheres around reference points. radii[i] is the distance
/// from point i to its k-th nearest neighbour in the pool it was built from.
class Manifold {
 public:
  Manifold(EmbeddingSet points, std::vector<double> radii, int k);

  const EmbeddingSet& points() const { return points_; }
  const std::vector<double>& radii() const { return radii_; }
  const EmbeddingRecord& record_ref(std::size_t i) const { return points_.record(i); }
  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.dim(); }
  int k() const { return k_; }

 private:
  EmbeddingSet points_;
  std::vector<double> radii_;
  int k_;
};

/// Radii of `targets` against `pool`. A target row whose record and vector
/// both match an (unclaimed) pool row is treated as that pool row, and it is
/// excluded from its own neighbour list. Targets may therefore be a subset of
/// the pool, disjoint from it, or a mix.
Manifold compute_radii(const EmbeddingSet& targets, const EmbeddingSet& radius_pool,
                       int k = kDefaultNeighbors);

/// Same, with the self-row mapping given explicitly (self_rows[i] is the pool
/// row that target i must not count as a neighbour).
Manifold compute_radii(const EmbeddingSet& targets, const EmbeddingSet& radius_pool,
                       int k, std::span<const std::optional<std::size_t>> self_rows);

struct MembershipResult {
  bool inside = false;
  std::optional<std::size_t> nearest_covering_ref;
};

/// inside iff some ||query - p_i|| <= r_i. The attributed reference is the
/// nearest covering point, lowest index on ties.
MembershipResult membership(std::span<const float> query, const Manifold& manifold);

std::vector<MembershipResult> memberships(const EmbeddingSet& queries,
                                          const Manifold& manifold);

/// Fraction of generated rows inside the real manifold.
double precision(const EmbeddingSet& generated, const Manifold& real_manifold);

/// Fraction of real rows inside the generated manifold.
double recall(const EmbeddingSet& real, const Manifold& generated_manifold);

/// |A n B| / |A u B| of two coarse label sets (1 when both are empty).
double set_iou(const ClassSet& a, const ClassSet& b);

/// Mean over generated rows of the coarse-set IoU with the attributed real
/// reference; rows outside the manifold contribute 0.
double consistency(const EmbeddingSet& generated, const Manifold& real_manifold,
                   const ConditioningMap& conditionings);

struct CoverageScores {
  double precision = 0;
  double consistency = 0;
};

/// precision and consistency from a single membership pass.
CoverageScores coverage_scores(const EmbeddingSet& generated, const Manifold& real_manifold,
                               const ConditioningMap& conditionings);

}  // namespace scene_eval
