#include "scene_eval/store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "io_util.hpp"
#include "scene_eval/errors.hpp"

namespace scene_eval {

using nlohmann::json;

namespace {

constexpr double kBoxSlack = 1e-9;

template <class T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
}

template <class T>
T get_le(const unsigned char* bytes) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

void validate_box(const Box& b) {
  bool ok = b.x >= 0 && b.y >= 0 && b.w > 0 && b.h > 0 && b.x + b.w <= 1 + kBoxSlack &&
            b.y + b.h <= 1 + kBoxSlack;
  if (!ok) {
    std::ostringstream msg;
    msg << "invalid box (" << b.x << ", " << b.y << ", " << b.w << ", " << b.h
        << "): expected 0 <= x, y; w, h > 0; x + w <= 1; y + h <= 1";
    throw ValidationError(msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------- ClassTable

ClassTable::ClassTable(std::vector<std::string> names, std::vector<bool> is_thing,
                       std::vector<std::string> superclass)
    : names_(std::move(names)), is_thing_(std::move(is_thing)), superclass_(std::move(superclass)) {
  if (is_thing_.size() != names_.size() || superclass_.size() != names_.size()) {
    throw ValidationError("class table: names, is_thing and superclass must have equal length");
  }
  for (std::uint32_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ValidationError("class table: empty class name");
    if (!index_.emplace(names_[i], i).second) {
      throw ValidationError("class table: duplicate class name '" + names_[i] + "'");
    }
  }
}

const std::string& ClassTable::name(ClassId id) const {
  if (!contains(id)) throw ValidationError("class id " + std::to_string(id.value) + " out of range");
  return names_[id.value];
}

bool ClassTable::is_thing(ClassId id) const {
  if (!contains(id)) throw ValidationError("class id " + std::to_string(id.value) + " out of range");
  return is_thing_[id.value];
}

const std::string& ClassTable::superclass(ClassId id) const {
  if (!contains(id)) throw ValidationError("class id " + std::to_string(id.value) + " out of range");
  return superclass_[id.value];
}

std::optional<ClassId> ClassTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return ClassId{it->second};
}

ClassId ClassTable::resolve(std::string_view name) const {
  auto id = find(name);
  if (!id) throw ValidationError("unknown class '" + std::string(name) + "'");
  return *id;
}

ClassTable load_class_table(const std::filesystem::path& path) {
  json doc = detail::read_json(path);
  try {
    return ClassTable(doc.at("names").get<std::vector<std::string>>(),
                      doc.at("is_thing").get<std::vector<bool>>(),
                      doc.at("superclass").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed class table: " + e.what());
  }
}

void save_class_table(const ClassTable& table, const std::filesystem::path& path) {
  json doc;
  doc["names"] = table.names();
  std::vector<bool> things;
  std::vector<std::string> supers;
  for (std::uint32_t i = 0; i < table.size(); ++i) {
    things.push_back(table.is_thing(ClassId{i}));
    supers.push_back(table.superclass(ClassId{i}));
  }
  doc["is_thing"] = things;
  doc["superclass"] = supers;
  detail::write_text(path, doc.dump(2) + "\n");
}

// -------------------------------------------------------------- Conditioning

Conditioning::Conditioning(std::string id, std::vector<ObjectInstance> instances)
    : id_(std::move(id)), instances_(std::move(instances)) {
  if (id_.empty()) throw ValidationError("conditioning with empty id");
  if (instances_.empty()) throw ValidationError("conditioning '" + id_ + "' has no instances");
  for (const auto& inst : instances_) {
    validate_box(inst.box);
    coarse_.insert(inst.cls);
  }
}

std::vector<Conditioning> load_conditionings(const std::filesystem::path& path,
                                             const ClassTable& classes) {
  std::vector<Conditioning> out;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    auto id = detail::field<std::string>(obj, "id", path, line);
    auto it = obj.find("instances");
    if (it == obj.end() || !it->is_array()) detail::fail_line(path, line, "missing 'instances' array");
    std::vector<ObjectInstance> instances;
    for (const auto& inst : *it) {
      if (!inst.is_object()) detail::fail_line(path, line, "instance must be an object");
      auto name = detail::field<std::string>(inst, "class", path, line);
      auto box = detail::field<std::vector<double>>(inst, "box", path, line);
      if (box.size() != 4) detail::fail_line(path, line, "box must have 4 numbers");
      try {
        instances.push_back({classes.resolve(name), Box{box[0], box[1], box[2], box[3]}});
      } catch (const ValidationError& e) {
        detail::fail_line(path, line, e.what());
      }
    }
    try {
      out.emplace_back(std::move(id), std::move(instances));
    } catch (const ValidationError& e) {
      detail::fail_line(path, line, e.what());
    }
  });
  return out;
}

void save_conditionings(std::span<const Conditioning> conds, const std::filesystem::path& path,
                        const ClassTable& classes) {
  std::string text;
  for (const auto& c : conds) {
    json obj;
    obj["id"] = c.id();
    json instances = json::array();
    for (const auto& inst : c.instances()) {
      instances.push_back({{"class", classes.name(inst.cls)},
                           {"box", {inst.box.x, inst.box.y, inst.box.w, inst.box.h}}});
    }
    obj["instances"] = std::move(instances);
    text += obj.dump();
    text += '\n';
  }
  detail::write_text(path, text);
}

ConditioningMap index_conditionings(std::span<const Conditioning> conds) {
  ConditioningMap map;
  map.reserve(conds.size());
  for (const auto& c : conds) {
    if (!map.emplace(c.id(), c).second) {
      throw ValidationError("duplicate conditioning id '" + c.id() + "'");
    }
  }
  return map;
}

// ------------------------------------------------------------------- records

std::string_view to_string(Kind kind) { return kind == Kind::real ? "real" : "generated"; }

std::string_view to_string(Granularity granularity) {
  return granularity == Granularity::scene ? "scene" : "object";
}

void validate_record(const EmbeddingRecord& r) {
  if (r.conditioning_id.empty()) throw ValidationError("record with empty conditioning_id");
  if ((r.granularity == Granularity::object) != r.object_class.has_value()) {
    throw ValidationError("record for '" + r.conditioning_id +
                          "': object_class must be present exactly for object granularity");
  }
  if (r.kind == Kind::real && r.seed != 0) {
    throw ValidationError("record for '" + r.conditioning_id + "': real rows must have seed 0");
  }
}

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<float> vectors,
                           std::vector<EmbeddingRecord> records)
    : dim_(dim), vectors_(std::move(vectors)), records_(std::move(records)) {
  if (dim_ == 0) throw ValidationError("embedding dim must be positive");
  if (vectors_.size() != records_.size() * dim_) {
    throw ValidationError("row-count mismatch: " + std::to_string(records_.size()) +
                          " records for " + std::to_string(vectors_.size() / dim_) + " rows");
  }
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (!std::isfinite(vectors_[i])) {
      throw ValidationError("non-finite value at row " + std::to_string(i / dim_) + ", column " +
                            std::to_string(i % dim_));
    }
  }
  for (const auto& r : records_) validate_record(r);
}

// ------------------------------------------------------------------ file I/O

namespace {

std::vector<EmbeddingRecord> load_metadata(const std::filesystem::path& path,
                                           const ClassTable& classes) {
  static const std::array<std::string_view, 5> kAllowed = {"conditioning_id", "seed", "kind",
                                                           "granularity", "object_class"};
  std::vector<EmbeddingRecord> records;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    for (const auto& [key, _] : obj.items()) {
      if (std::find(kAllowed.begin(), kAllowed.end(), key) == kAllowed.end()) {
        detail::fail_line(path, line, "unexpected field '" + key + "'");
      }
    }
    EmbeddingRecord r;
    r.conditioning_id = detail::field<std::string>(obj, "conditioning_id", path, line);
    auto seed = detail::field<std::int64_t>(obj, "seed", path, line);
    if (seed < 0 || seed > std::numeric_limits<std::uint32_t>::max()) {
      detail::fail_line(path, line, "seed out of range");
    }
    r.seed = static_cast<std::uint32_t>(seed);
    auto kind = detail::field<std::string>(obj, "kind", path, line);
    if (kind == "real") {
      r.kind = Kind::real;
    } else if (kind == "generated") {
      r.kind = Kind::generated;
    } else {
      detail::fail_line(path, line, "kind must be 'real' or 'generated'");
    }
    auto gran = detail::field<std::string>(obj, "granularity", path, line);
    if (gran == "scene") {
      r.granularity = Granularity::scene;
    } else if (gran == "object") {
      r.granularity = Granularity::object;
    } else {
      detail::fail_line(path, line, "granularity must be 'scene' or 'object'");
    }
    if (obj.contains("object_class") && !obj["object_class"].is_null()) {
      auto name = detail::field<std::string>(obj, "object_class", path, line);
      try {
        r.object_class = classes.resolve(name);
      } catch (const ValidationError& e) {
        detail::fail_line(path, line, e.what());
      }
    }
    try {
      validate_record(r);
    } catch (const ValidationError& e) {
      detail::fail_line(path, line, e.what());
    }
    records.push_back(std::move(r));
  });
  return records;
}

}  // namespace

EmbeddingSet load_embedding_set(const std::filesystem::path& matrix_path,
                                const std::filesystem::path& metadata_path,
                                const ClassTable& classes) {
  auto in = detail::open_input(matrix_path, std::ios::in | std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = matrix_path.string() + ": ";

  if (bytes.size() < kMatrixHeaderBytes) {
    throw ValidationError(where + "malformed header: file shorter than the " +
                          std::to_string(kMatrixHeaderBytes) + "-byte header");
  }
  if (std::memcmp(raw, kMatrixMagic, 4) != 0) throw ValidationError(where + "malformed header: bad magic");
  auto version = get_le<std::uint32_t>(raw + 4);
  if (version != kMatrixVersion) {
    throw ValidationError(where + "malformed header: unsupported version " + std::to_string(version));
  }
  auto rows = get_le<std::uint64_t>(raw + 8);
  auto dim = get_le<std::uint32_t>(raw + 16);
  if (dim == 0) throw ValidationError(where + "malformed header: dim is 0");
  const std::uint64_t body = bytes.size() - kMatrixHeaderBytes;
  if (rows > body / (4ull * dim) || body != rows * dim * 4ull) {
    throw ValidationError(where + "malformed header: declares " + std::to_string(rows) + "x" +
                          std::to_string(dim) + " floats but the body holds " +
                          std::to_string(body) + " bytes");
  }

  std::vector<float> vectors(rows * dim);
  const unsigned char* p = raw + kMatrixHeaderBytes;
  for (std::size_t i = 0; i < vectors.size(); ++i, p += 4) {
    vectors[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
  }

  auto records = load_metadata(metadata_path, classes);
  if (records.size() != rows) {
    throw ValidationError("row-count mismatch: matrix declares " + std::to_string(rows) +
                          " rows, metadata has " + std::to_string(records.size()) + " lines");
  }
  return EmbeddingSet(dim, std::move(vectors), std::move(records));
}

void save_embedding_set(const EmbeddingSet& set, const std::filesystem::path& matrix_path,
                        const std::filesystem::path& metadata_path, const ClassTable& classes) {
  std::string bytes;
  bytes.reserve(kMatrixHeaderBytes + set.vectors().size() * 4);
  bytes.append(kMatrixMagic, 4);
  put_le<std::uint32_t>(bytes, kMatrixVersion);
  put_le<std::uint64_t>(bytes, set.size());
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(set.dim()));
  for (float v : set.vectors()) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
  detail::write_text(matrix_path, bytes);

  std::string meta;
  for (const auto& r : set.records()) {
    json obj;
    obj["conditioning_id"] = r.conditioning_id;
    obj["seed"] = r.seed;
    obj["kind"] = to_string(r.kind);
    obj["granularity"] = to_string(r.granularity);
    if (r.object_class) obj["object_class"] = classes.name(*r.object_class);
    meta += obj.dump();
    meta += '\n';
  }
  detail::write_text(metadata_path, meta);
}

EmbeddingSet load_embedding_prefix(const std::string& prefix, const ClassTable& classes) {
  return load_embedding_set(prefix + ".cseb", prefix + ".meta.jsonl", classes);
}

void save_embedding_prefix(const EmbeddingSet& set, const std::string& prefix,
                           const ClassTable& classes) {
  save_embedding_set(set, prefix + ".cseb", prefix + ".meta.jsonl", classes);
}

// ---------------------------------------------------------------- transforms

EmbeddingSet filter(const EmbeddingSet& set, const RecordPredicate& keep) {
  std::vector<float> vectors;
  std::vector<EmbeddingRecord> records;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!keep(set.record(i))) continue;
    auto row = set.row(i);
    vectors.insert(vectors.end(), row.begin(), row.end());
    records.push_back(set.record(i));
  }
  return EmbeddingSet(set.dim(), std::move(vectors), std::move(records));
}

EmbeddingSet concat(std::span<const EmbeddingSet> parts) {
  if (parts.empty()) throw ValidationError("concat of zero embedding sets");
  const std::size_t dim = parts.front().dim();
  std::vector<float> vectors;
  std::vector<EmbeddingRecord> records;
  for (const auto& part : parts) {
    if (part.dim() != dim) {
      throw ValidationError("dimension mismatch: " + std::to_string(part.dim()) + " vs " +
                            std::to_string(dim));
    }
    vectors.insert(vectors.end(), part.vectors().begin(), part.vectors().end());
    records.insert(records.end(), part.records().begin(), part.records().end());
  }
  return EmbeddingSet(dim, std::move(vectors), std::move(records));
}

}  // namespace scene_eval
