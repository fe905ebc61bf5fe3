#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scene_eval {

/// Index into a ClassTable.
struct ClassId {
  std::uint32_t value = 0;
  auto operator<=>(const ClassId&) const = default;
};

using ClassSet = std::set<ClassId>;

/// Ordered category list with the things/stuff flag and the superclass
/// grouping. Names are unique and non-empty.
class ClassTable {
 public:
  ClassTable() = default;
  ClassTable(std::vector<std::string> names, std::vector<bool> is_thing,
             std::vector<std::string> superclass);

  std::size_t size() const { return names_.size(); }
  bool contains(ClassId id) const { return id.value < names_.size(); }

  const std::string& name(ClassId id) const;
  bool is_thing(ClassId id) const;
  const std::string& superclass(ClassId id) const;

  std::optional<ClassId> find(std::string_view name) const;
  /// Like find() but throws ValidationError("unknown class ...").
  ClassId resolve(std::string_view name) const;

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<bool> is_thing_;
  std::vector<std::string> superclass_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

ClassTable load_class_table(const std::filesystem::path& path);
void save_class_table(const ClassTable& table, const std::filesystem::path& path);

/// Normalized (x, y, w, h) box.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

struct ObjectInstance {
  ClassId cls;
  Box box;
  bool operator==(const ObjectInstance&) const = default;
};

/// A finegrained layout. The coarse label set is always derived from the
/// instances and never stored separately.
class Conditioning {
 public:
  Conditioning(std::string id, std::vector<ObjectInstance> instances);

  const std::string& id() const { return id_; }
  const std::vector<ObjectInstance>& instances() const { return instances_; }
  const ClassSet& coarse() const { return coarse_; }

  bool operator==(const Conditioning& other) const {
    return id_ == other.id_ && instances_ == other.instances_;
  }

 private:
  std::string id_;
  std::vector<ObjectInstance> instances_;
  ClassSet coarse_;
};

using ConditioningMap = std::unordered_map<std::string, Conditioning>;

std::vector<Conditioning> load_conditionings(const std::filesystem::path& path,
                                             const ClassTable& classes);
void save_conditionings(std::span<const Conditioning> conds,
                        const std::filesystem::path& path,
                        const ClassTable& classes);
/// Throws on duplicate ids.
ConditioningMap index_conditionings(std::span<const Conditioning> conds);

enum class Kind : std::uint8_t { real, generated };
enum class Granularity : std::uint8_t { scene, object };

std::string_view to_string(Kind kind);
std::string_view to_string(Granularity granularity);

struct EmbeddingRecord {
  std::string conditioning_id;
  std::uint32_t seed = 0;
  Kind kind = Kind::real;
  Granularity granularity = Granularity::scene;
  std::optional<ClassId> object_class;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Throws ValidationError when the record breaks its invariants.
void validate_record(const EmbeddingRecord& record);

/// N x dim float32 matrix (row-major) with one metadata record per row.
/// Immutable after construction.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t dim, std::vector<float> vectors,
               std::vector<EmbeddingRecord> records);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {vectors_.data() + i * dim_, dim_};
  }
  const EmbeddingRecord& record(std::size_t i) const { return records_[i]; }
  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const std::vector<float>& vectors() const { return vectors_; }

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::size_t dim_ = 1;
  std::vector<float> vectors_;
  std::vector<EmbeddingRecord> records_;
};

/// Reads a `.cseb` matrix and its `.meta.jsonl` metadata. Row i of the matrix
/// belongs to metadata line i.
EmbeddingSet load_embedding_set(const std::filesystem::path& matrix_path,
                                const std::filesystem::path& metadata_path,
                                const ClassTable& classes);
void save_embedding_set(const EmbeddingSet& set,
                        const std::filesystem::path& matrix_path,
                        const std::filesystem::path& metadata_path,
                        const ClassTable& classes);

/// `<prefix>.cseb` + `<prefix>.meta.jsonl`.
EmbeddingSet load_embedding_prefix(const std::string& prefix, const ClassTable& classes);
void save_embedding_prefix(const EmbeddingSet& set, const std::string& prefix,
                           const ClassTable& classes);

using RecordPredicate = std::function<bool(const EmbeddingRecord&)>;

EmbeddingSet filter(const EmbeddingSet& set, const RecordPredicate& keep);
/// Row-wise concatenation; all parts must share one dim.
EmbeddingSet concat(std::span<const EmbeddingSet> parts);

inline constexpr char kMatrixMagic[4] = {'C', 'S', 'E', 'B'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 20;

}  // namespace scene_eval

template <>
struct std::hash<scene_eval::ClassId> {
  std::size_t operator()(const scene_eval::ClassId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
