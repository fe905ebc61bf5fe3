#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scene_eval/store.hpp"

namespace scene_eval {

/// Row = true class, column = predicted class, row-normalized. Rows with no
/// support are all zero.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::size_t num_classes, std::vector<double> values,
                  std::vector<std::size_t> support);

  std::size_t num_classes() const { return num_classes_; }
  double operator()(ClassId truth, ClassId predicted) const {
    return values_[truth.value * num_classes_ + predicted.value];
  }
  std::size_t support(ClassId truth) const { return support_[truth.value]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::size_t>& supports() const { return support_; }

 private:
  std::size_t num_classes_;
  std::vector<double> values_;
  std::vector<std::size_t> support_;
};

/// Every crop is predicted as the class of its nearest other crop (lowest row
/// on distance ties).
ConfusionMatrix one_nn_confusion(const EmbeddingSet& crops, std::size_t num_classes);

struct StoredConfusion {
  ConfusionMatrix matrix;
  std::string embedding_source;
};

void save_confusion(const ConfusionMatrix& cm, const ClassTable& classes,
                    const std::string& embedding_source,
                    const std::filesystem::path& path);
StoredConfusion load_confusion(const std::filesystem::path& path, const ClassTable& classes);

/// {exclude_classes:[...], exclude_pairs:[[target, candidate], ...], other_suffix}
struct RuleConfig {
  std::vector<std::string> exclude_classes{"person"};
  std::vector<std::pair<std::string, std::string>> exclude_pairs;
  std::string other_suffix = "-other";
};

RuleConfig load_rule_config(const std::filesystem::path& path);

/// The built-in rules for a taxonomy: 'person' is excluded if the table has it.
RuleConfig default_rule_config(const ClassTable& classes);

inline constexpr std::size_t kMaxMergeCandidates = 5;

namespace rules {
inline constexpr const char* kDiagonalThreshold = "diagonal-threshold";
inline constexpr const char* kTopCutoff = "top5-cutoff";
inline constexpr const char* kPersonExclusion = "person-exclusion";
inline constexpr const char* kClassExclusion = "class-exclusion";
inline constexpr const char* kBoxConfusion = "bbox-exclusion";
inline constexpr const char* kOtherSuffix = "other-suffix";
}  // namespace rules

struct RuleDrop {
  ClassId candidate;
  double probability = 0;
  std::string rule;
};

struct MergeProposal {
  ClassId target;
  std::vector<std::pair<ClassId, double>> candidates;  // probability descending
  std::vector<RuleDrop> rule_trace;
};

/// One proposal per class with non-zero support. Candidates are the top five
/// columns confused at least as often as the diagonal, then filtered by the
/// excluded-class, box-confusion and '-other' rules. Every dropped column is
/// listed in the rule trace.
std::vector<MergeProposal> propose_merges(const ConfusionMatrix& cm, const ClassTable& classes,
                                          const RuleConfig& rules);

/// Relabeling map. Construction rejects chains and cycles: map(map(c)) must
/// equal map(c) for every key.
class MergeMap {
 public:
  MergeMap() = default;
  explicit MergeMap(std::map<ClassId, ClassId> mapping);

  ClassId apply(ClassId cls) const;
  const std::map<ClassId, ClassId>& mapping() const { return mapping_; }

 private:
  std::map<ClassId, ClassId> mapping_;
};

/// JSON {from_class_name: to_class_name}.
MergeMap load_merge_map(const std::filesystem::path& path, const ClassTable& classes);

std::vector<Conditioning> apply_merge_map(std::span<const Conditioning> conds,
                                          const MergeMap& merge_map);
EmbeddingSet apply_merge_map(const EmbeddingSet& set, const MergeMap& merge_map);

}  // namespace scene_eval
