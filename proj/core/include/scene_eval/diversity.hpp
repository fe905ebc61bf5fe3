#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <tuple>

#include "scene_eval/store.hpp"

namespace scene_eval {

/// Externally computed pairwise distances between generations of the same
/// conditioning, keyed by (conditioning_id, seed_i, seed_j) with seed_i < seed_j.
class PairwiseDistanceTable {
 public:
  using Key = std::tuple<std::string, std::uint32_t, std::uint32_t>;

  /// Seeds are stored ordered; throws on self-pairs, negative or non-finite
  /// distances, and duplicate pairs.
  void add(std::string conditioning_id, std::uint32_t seed_a, std::uint32_t seed_b,
           double distance);

  const std::map<Key, double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<Key, double> entries_;
};

PairwiseDistanceTable load_distance_table(const std::filesystem::path& path);
void save_distance_table(const PairwiseDistanceTable& table,
                         const std::filesystem::path& path);

enum class DsMode { lpips_table, embedding_euclidean };
std::string_view to_string(DsMode mode);

/// Mean over conditionings of the per-conditioning mean pair distance, with the
/// population std across conditionings.
struct DiversityScore {
  double mean = 0;
  double std = 0;
  std::size_t conditionings = 0;
  DsMode mode = DsMode::lpips_table;
};

DiversityScore ds_from_table(const PairwiseDistanceTable& table);

/// Euclidean distance between same-conditioning embeddings of different seeds
/// stands in for the perceptual distance. Every conditioning needs at least two
/// distinct seeds, and a seed may appear only once per conditioning.
DiversityScore ds_from_embeddings(const EmbeddingSet& generated);

}  // namespace scene_eval
