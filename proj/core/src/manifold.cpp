#include "scene_eval/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>

#include "scene_eval/errors.hpp"
#include "scene_eval/parallel.hpp"

namespace scene_eval {

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

Manifold::Manifold(EmbeddingSet points, std::vector<double> radii, int k)
    : points_(std::move(points)), radii_(std::move(radii)), k_(k) {
  if (radii_.size() != points_.size()) {
    throw ValidationError("manifold: " + std::to_string(radii_.size()) + " radii for " +
                          std::to_string(points_.size()) + " points");
  }
  for (double r : radii_) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("manifold: invalid radius");
  }
  if (k_ < 1) throw ValidationError("manifold: k must be positive");
}

namespace {

std::size_t row_hash(const EmbeddingSet& set, std::size_t i) {
  const auto& r = set.record(i);
  std::size_t h = std::hash<std::string>{}(r.conditioning_id);
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
  mix(r.seed);
  mix(static_cast<std::size_t>(r.kind));
  mix(static_cast<std::size_t>(r.granularity));
  mix(r.object_class ? r.object_class->value + 1 : 0);
  auto row = set.row(i);
  mix(std::hash<std::string_view>{}(
      std::string_view(reinterpret_cast<const char*>(row.data()), row.size_bytes())));
  return h;
}

bool same_row(const EmbeddingSet& a, std::size_t i, const EmbeddingSet& b, std::size_t j) {
  if (a.record(i) != b.record(j)) return false;
  auto ra = a.row(i);
  auto rb = b.row(j);
  return std::memcmp(ra.data(), rb.data(), ra.size_bytes()) == 0;
}

std::vector<std::optional<std::size_t>> match_self_rows(const EmbeddingSet& targets,
                                                        const EmbeddingSet& pool) {
  std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t j = 0; j < pool.size(); ++j) buckets[row_hash(pool, j)].push_back(j);

  std::vector<bool> claimed(pool.size(), false);
  std::vector<std::optional<std::size_t>> self(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto it = buckets.find(row_hash(targets, i));
    if (it == buckets.end()) continue;
    for (std::size_t j : it->second) {
      if (!claimed[j] && same_row(targets, i, pool, j)) {
        claimed[j] = true;
        self[i] = j;
        break;
      }
    }
  }
  return self;
}

void check_dims(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

Manifold compute_radii(const EmbeddingSet& targets, const EmbeddingSet& radius_pool, int k) {
  check_dims(targets.dim(), radius_pool.dim());
  auto self = match_self_rows(targets, radius_pool);
  return compute_radii(targets, radius_pool, k, self);
}

Manifold compute_radii(const EmbeddingSet& targets, const EmbeddingSet& radius_pool, int k,
                       std::span<const std::optional<std::size_t>> self_rows) {
  if (k < 1) throw ValidationError("k must be positive, got " + std::to_string(k));
  check_dims(targets.dim(), radius_pool.dim());
  if (self_rows.size() != targets.size()) {
    throw ValidationError("self-row mapping length does not match target count");
  }
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const bool overlaps = self_rows[i].has_value();
    if (overlaps && *self_rows[i] >= radius_pool.size()) {
      throw ValidationError("self-row index out of range");
    }
    const std::size_t needed = kk + (overlaps ? 1 : 0);
    if (radius_pool.size() < needed) {
      throw ValidationError("radius pool too small: k=" + std::to_string(k) + " needs at least " +
                            std::to_string(needed) + " rows, pool has " +
                            std::to_string(radius_pool.size()));
    }
  }

  std::vector<double> radii(targets.size(), 0.0);
  parallel_for_chunks(targets.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> dist;
    dist.reserve(radius_pool.size());
    for (std::size_t i = begin; i < end; ++i) {
      dist.clear();
      auto query = targets.row(i);
      for (std::size_t j = 0; j < radius_pool.size(); ++j) {
        if (self_rows[i] && *self_rows[i] == j) continue;
        dist.push_back(euclidean_distance(query, radius_pool.row(j)));
      }
      std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
      radii[i] = dist[kk - 1];
    }
  });
  return Manifold(targets, std::move(radii), k);
}

MembershipResult membership(std::span<const float> query, const Manifold& manifold) {
  check_dims(query.size(), manifold.dim());
  MembershipResult result;
  double best = std::numeric_limits<double>::infinity();
  const auto& radii = manifold.radii();
  for (std::size_t i = 0; i < manifold.size(); ++i) {
    const double d = euclidean_distance(query, manifold.points().row(i));
    if (d <= radii[i] && d < best) {
      best = d;
      result.inside = true;
      result.nearest_covering_ref = i;
    }
  }
  return result;
}

std::vector<MembershipResult> memberships(const EmbeddingSet& queries, const Manifold& manifold) {
  check_dims(queries.dim(), manifold.dim());
  std::vector<MembershipResult> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = membership(queries.row(i), manifold); });
  return out;
}

namespace {

double inside_fraction(const EmbeddingSet& queries, const Manifold& manifold, const char* what) {
  if (queries.empty()) throw ValidationError(std::string(what) + ": empty query set");
  auto results = memberships(queries, manifold);
  std::size_t inside = 0;
  for (const auto& m : results) inside += m.inside ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(results.size());
}

const Conditioning& lookup(const ConditioningMap& conds, const std::string& id) {
  auto it = conds.find(id);
  if (it == conds.end()) throw ValidationError("unresolvable conditioning_id '" + id + "'");
  return it->second;
}

}  // namespace

double precision(const EmbeddingSet& generated, const Manifold& real_manifold) {
  return inside_fraction(generated, real_manifold, "precision");
}

double recall(const EmbeddingSet& real, const Manifold& generated_manifold) {
  return inside_fraction(real, generated_manifold, "recall");
}

double set_iou(const ClassSet& a, const ClassSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& c : a) common += b.count(c);
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

CoverageScores coverage_scores(const EmbeddingSet& generated, const Manifold& real_manifold,
                               const ConditioningMap& conditionings) {
  if (generated.empty()) throw ValidationError("consistency: empty generated set");
  for (const auto& r : generated.records()) lookup(conditionings, r.conditioning_id);
  for (std::size_t i = 0; i < real_manifold.size(); ++i) {
    lookup(conditionings, real_manifold.record_ref(i).conditioning_id);
  }

  auto results = memberships(generated, real_manifold);
  std::size_t inside = 0;
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].inside) continue;
    ++inside;
    const auto& gen = lookup(conditionings, generated.record(i).conditioning_id);
    const auto& ref =
        lookup(conditionings, real_manifold.record_ref(*results[i].nearest_covering_ref).conditioning_id);
    iou_sum += set_iou(gen.coarse(), ref.coarse());
  }
  const auto n = static_cast<double>(results.size());
  return {static_cast<double>(inside) / n, iou_sum / n};
}

double consistency(const EmbeddingSet& generated, const Manifold& real_manifold,
                   const ConditioningMap& conditionings) {
  return coverage_scores(generated, real_manifold, conditionings).consistency;
}

}  // namespace scene_eval
