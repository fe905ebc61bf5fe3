#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scene_eval/manifold.hpp"
#include "scene_eval/store.hpp"

namespace scene_eval {

struct ScenePrediction {
  std::string conditioning_id;
  std::uint32_t seed = 0;
  ClassSet labels;
};

struct ObjectPrediction {
  std::string conditioning_id;
  std::uint32_t seed = 0;
  ClassId predicted;
  ClassId truth;
};

/// {conditioning_id, seed, labels:[...]}
std::vector<ScenePrediction> load_scene_predictions(const std::filesystem::path& path,
                                                    const ClassTable& classes);
/// {conditioning_id, seed, label, object_class}
std::vector<ObjectPrediction> load_object_predictions(const std::filesystem::path& path,
                                                      const ClassTable& classes);

/// 2|P n T| / (|P| + |T|); two empty sets score 1.
double f1_score(const ClassSet& predicted, const ClassSet& target);

/// Per-image F1 against the coarse set of each record's conditioning,
/// averaged over images.
double mean_f1(std::span<const ScenePrediction> predictions,
               const ConditioningMap& conditionings);

struct AccuracyResult {
  double acc_instance = 0;        // headline
  double acc_class_balanced = 0;  // mean of per-true-class accuracies
  std::size_t n = 0;
};

AccuracyResult object_accuracy(std::span<const ObjectPrediction> predictions);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double consistency = 0;
  std::size_t n_real = 0;
  std::size_t n_generated = 0;
};

/// Manifold metrics with the query rows restricted to one object class. The
/// manifolds themselves are not re-estimated. Classes with no rows on either
/// side are left out of the result.
std::map<ClassId, ClassMetrics> per_class_report(const EmbeddingSet& real,
                                                 const EmbeddingSet& generated,
                                                 const Manifold& real_manifold,
                                                 const Manifold& generated_manifold,
                                                 const ConditioningMap& conditionings,
                                                 std::span<const ClassId> class_filter);

struct TopClasses {
  std::vector<ClassId> classes;
  bool truncated = false;  // fewer distinct classes than requested
};

/// Most frequent classes by instance count, ties by lower class index.
TopClasses top_k_classes(std::span<const Conditioning> conditionings, std::size_t k);
TopClasses top_k_classes(const EmbeddingSet& object_records, std::size_t k);

}  // namespace scene_eval
