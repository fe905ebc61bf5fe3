#include "fixtures.hpp"

#include <atomic>
#include <chrono>

namespace scene_eval::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          ("scene_eval_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

ClassTable make_classes(const std::vector<std::string>& names) {
  return ClassTable(names, std::vector<bool>(names.size(), true),
                    std::vector<std::string>(names.size(), "thing"));
}

ClassTable make_classes(const std::vector<std::string>& names, const std::vector<bool>& is_thing,
                        const std::vector<std::string>& superclass) {
  return ClassTable(names, is_thing, superclass);
}

Conditioning make_cond(const std::string& id, const std::vector<std::uint32_t>& classes) {
  std::vector<ObjectInstance> inst;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const double x = 0.05 * static_cast<double>(i % 10);
    inst.push_back({ClassId{classes[i]}, Box{x, 0.1, 0.3, 0.4}});
  }
  return Conditioning(id, std::move(inst));
}

EmbeddingRecord scene_record(const std::string& cond, std::uint32_t seed) {
  EmbeddingRecord r;
  r.conditioning_id = cond;
  r.seed = seed;
  r.kind = seed == 0 ? Kind::real : Kind::generated;
  r.granularity = Granularity::scene;
  return r;
}

EmbeddingRecord object_record(const std::string& cond, std::uint32_t cls, std::uint32_t seed) {
  EmbeddingRecord r = scene_record(cond, seed);
  r.granularity = Granularity::object;
  r.object_class = ClassId{cls};
  return r;
}

EmbeddingSet make_set(std::size_t dim, const std::vector<std::vector<float>>& rows,
                      const std::vector<EmbeddingRecord>& records) {
  std::vector<float> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return EmbeddingSet(dim, std::move(flat), records);
}

EmbeddingSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim, Kind kind,
                        std::uint32_t seed, float scale, float shift) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> flat(n * dim);
  for (auto& v : flat) v = normal(rng) * scale + shift;
  std::vector<EmbeddingRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord r;
    r.conditioning_id = "c" + std::to_string(i);
    r.kind = kind;
    r.seed = kind == Kind::real ? 0 : seed;
    records.push_back(r);
  }
  return EmbeddingSet(dim, std::move(flat), std::move(records));
}

EmbeddingSet with_records(const EmbeddingSet& set, std::vector<EmbeddingRecord> records) {
  return EmbeddingSet(set.dim(), set.vectors(), std::move(records));
}

std::vector<Conditioning> random_conditionings(std::mt19937_64& rng, std::size_t count,
                                               std::uint32_t num_classes, std::size_t max_instances,
                                               const std::string& prefix) {
  std::uniform_int_distribution<std::uint32_t> cls(0, num_classes - 1);
  std::uniform_int_distribution<std::size_t> len(1, max_instances);
  std::vector<Conditioning> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint32_t> classes(len(rng));
    for (auto& c : classes) c = cls(rng);
    out.push_back(make_cond(prefix + std::to_string(i), classes));
  }
  return out;
}

}  // namespace scene_eval::testing
