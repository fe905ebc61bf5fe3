#include "scene_eval/labelmetrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "io_util.hpp"
#include "scene_eval/errors.hpp"

namespace scene_eval {

using nlohmann::json;

namespace {

std::uint32_t read_seed(const json& obj, const std::filesystem::path& path, std::size_t line) {
  auto seed = detail::field<std::int64_t>(obj, "seed", path, line);
  if (seed < 0 || seed > std::numeric_limits<std::uint32_t>::max()) {
    detail::fail_line(path, line, "seed out of range");
  }
  return static_cast<std::uint32_t>(seed);
}

ClassId resolve_at(const ClassTable& classes, const std::string& name,
                   const std::filesystem::path& path, std::size_t line) {
  auto id = classes.find(name);
  if (!id) detail::fail_line(path, line, "unknown class '" + name + "'");
  return *id;
}

}  // namespace

std::vector<ScenePrediction> load_scene_predictions(const std::filesystem::path& path,
                                                    const ClassTable& classes) {
  std::vector<ScenePrediction> out;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    ScenePrediction p;
    p.conditioning_id = detail::field<std::string>(obj, "conditioning_id", path, line);
    p.seed = read_seed(obj, path, line);
    for (const auto& name : detail::field<std::vector<std::string>>(obj, "labels", path, line)) {
      p.labels.insert(resolve_at(classes, name, path, line));
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<ObjectPrediction> load_object_predictions(const std::filesystem::path& path,
                                                      const ClassTable& classes) {
  std::vector<ObjectPrediction> out;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    ObjectPrediction p;
    p.conditioning_id = detail::field<std::string>(obj, "conditioning_id", path, line);
    p.seed = read_seed(obj, path, line);
    p.predicted = resolve_at(classes, detail::field<std::string>(obj, "label", path, line), path, line);
    p.truth = resolve_at(classes, detail::field<std::string>(obj, "object_class", path, line), path, line);
    out.push_back(std::move(p));
  });
  return out;
}

double f1_score(const ClassSet& predicted, const ClassSet& target) {
  if (predicted.empty() && target.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& c : predicted) common += target.count(c);
  return 2.0 * static_cast<double>(common) / static_cast<double>(predicted.size() + target.size());
}

double mean_f1(std::span<const ScenePrediction> predictions, const ConditioningMap& conditionings) {
  if (predictions.empty()) throw ValidationError("mean_f1: no predictions");
  double sum = 0.0;
  for (const auto& p : predictions) {
    auto it = conditionings.find(p.conditioning_id);
    if (it == conditionings.end()) {
      throw ValidationError("unresolvable conditioning_id '" + p.conditioning_id + "'");
    }
    sum += f1_score(p.labels, it->second.coarse());
  }
  return sum / static_cast<double>(predictions.size());
}

AccuracyResult object_accuracy(std::span<const ObjectPrediction> predictions) {
  if (predictions.empty()) throw ValidationError("object_accuracy: no predictions");
  std::map<ClassId, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    const bool hit = p.predicted == p.truth;
    correct += hit ? 1 : 0;
    auto& [c, t] = per_class[p.truth];
    c += hit ? 1 : 0;
    ++t;
  }
  double balanced = 0.0;
  for (const auto& [cls, ct] : per_class) {
    balanced += static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  AccuracyResult r;
  r.n = predictions.size();
  r.acc_instance = static_cast<double>(correct) / static_cast<double>(r.n);
  r.acc_class_balanced = balanced / static_cast<double>(per_class.size());
  return r;
}

std::map<ClassId, ClassMetrics> per_class_report(const EmbeddingSet& real,
                                                 const EmbeddingSet& generated,
                                                 const Manifold& real_manifold,
                                                 const Manifold& generated_manifold,
                                                 const ConditioningMap& conditionings,
                                                 std::span<const ClassId> class_filter) {
  auto require_objects = [](const EmbeddingSet& set, const char* what) {
    for (const auto& r : set.records()) {
      if (r.granularity != Granularity::object) {
        throw ValidationError(std::string("per-class report needs object rows in the ") + what + " set");
      }
    }
  };
  require_objects(real, "real");
  require_objects(generated, "generated");

  std::map<ClassId, ClassMetrics> out;
  for (ClassId cls : class_filter) {
    auto of_class = [cls](const EmbeddingRecord& r) { return r.object_class == cls; };
    auto real_c = filter(real, of_class);
    auto gen_c = filter(generated, of_class);
    if (real_c.empty() || gen_c.empty()) continue;
    auto cov = coverage_scores(gen_c, real_manifold, conditionings);
    ClassMetrics m;
    m.precision = cov.precision;
    m.consistency = cov.consistency;
    m.recall = recall(real_c, generated_manifold);
    m.n_real = real_c.size();
    m.n_generated = gen_c.size();
    out.emplace(cls, m);
  }
  return out;
}

namespace {

TopClasses top_from_counts(const std::map<ClassId, std::size_t>& counts, std::size_t k) {
  if (counts.empty()) throw ValidationError("top_k_classes: no class occurrences");
  if (k == 0) throw ValidationError("top_k_classes: k must be positive");
  std::vector<std::pair<ClassId, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  TopClasses out;
  out.truncated = k > ranked.size();
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.classes.push_back(ranked[i].first);
  return out;
}

}  // namespace

TopClasses top_k_classes(std::span<const Conditioning> conditionings, std::size_t k) {
  std::map<ClassId, std::size_t> counts;
  for (const auto& c : conditionings) {
    for (const auto& inst : c.instances()) ++counts[inst.cls];
  }
  return top_from_counts(counts, k);
}

TopClasses top_k_classes(const EmbeddingSet& object_records, std::size_t k) {
  std::map<ClassId, std::size_t> counts;
  for (const auto& r : object_records.records()) {
    if (!r.object_class) throw ValidationError("top_k_classes: record without object_class");
    ++counts[*r.object_class];
  }
  return top_from_counts(counts, k);
}

}  // namespace scene_eval
