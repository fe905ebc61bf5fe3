#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scene_eval/store.hpp"

namespace scene_eval::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

ClassTable make_classes(const std::vector<std::string>& names);
ClassTable make_classes(const std::vector<std::string>& names, const std::vector<bool>& is_thing,
                        const std::vector<std::string>& superclass);

Conditioning make_cond(const std::string& id, const std::vector<std::uint32_t>& classes);

EmbeddingRecord scene_record(const std::string& cond, std::uint32_t seed = 0);
EmbeddingRecord object_record(const std::string& cond, std::uint32_t cls, std::uint32_t seed = 0);

EmbeddingSet make_set(std::size_t dim, const std::vector<std::vector<float>>& rows,
                      const std::vector<EmbeddingRecord>& records);

/// N rows of standard normal noise (scaled and shifted), scene records with
/// conditioning ids "c<i>" and the given kind/seed.
EmbeddingSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim, Kind kind,
                        std::uint32_t seed = 0, float scale = 1.0f, float shift = 0.0f);

/// Same vectors, new records.
EmbeddingSet with_records(const EmbeddingSet& set, std::vector<EmbeddingRecord> records);

/// Random conditioning corpus over `num_classes` classes, ids prefixed.
std::vector<Conditioning> random_conditionings(std::mt19937_64& rng, std::size_t count,
                                               std::uint32_t num_classes, std::size_t max_instances,
                                               const std::string& prefix);

}  // namespace scene_eval::testing
