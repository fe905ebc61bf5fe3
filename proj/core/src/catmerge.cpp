#include "scene_eval/catmerge.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "io_util.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/manifold.hpp"
#include "scene_eval/parallel.hpp"

namespace scene_eval {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<double> values,
                                 std::vector<std::size_t> support)
    : num_classes_(num_classes), values_(std::move(values)), support_(std::move(support)) {
  if (values_.size() != num_classes_ * num_classes_ || support_.size() != num_classes_) {
    throw ValidationError("confusion matrix shape does not match class count");
  }
  for (std::size_t t = 0; t < num_classes_; ++t) {
    double sum = 0.0;
    for (std::size_t p = 0; p < num_classes_; ++p) {
      const double v = values_[t * num_classes_ + p];
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("confusion entry outside [0, 1]");
      sum += v;
    }
    if (support_[t] == 0 && sum != 0.0) {
      throw ValidationError("confusion row without support must be all zero");
    }
    if (support_[t] > 0 && std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("confusion row " + std::to_string(t) + " does not sum to 1");
    }
  }
}

ConfusionMatrix one_nn_confusion(const EmbeddingSet& crops, std::size_t num_classes) {
  if (crops.size() < 2) throw ValidationError("one_nn_confusion needs at least 2 crops");
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const auto& r = crops.record(i);
    if (r.granularity != Granularity::object || !r.object_class) {
      throw ValidationError("one_nn_confusion: row " + std::to_string(i) + " is not an object crop");
    }
    if (r.object_class->value >= num_classes) {
      throw ValidationError("one_nn_confusion: class id out of range at row " + std::to_string(i));
    }
  }

  std::vector<std::size_t> nearest(crops.size());
  parallel_for(crops.size(), [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = i;
    for (std::size_t j = 0; j < crops.size(); ++j) {
      if (j == i) continue;
      const double d = euclidean_distance(crops.row(i), crops.row(j));
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    nearest[i] = best_j;
  });

  std::vector<std::size_t> counts(num_classes * num_classes, 0);
  std::vector<std::size_t> support(num_classes, 0);
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const auto truth = crops.record(i).object_class->value;
    const auto pred = crops.record(nearest[i]).object_class->value;
    ++counts[truth * num_classes + pred];
    ++support[truth];
  }
  std::vector<double> values(counts.size(), 0.0);
  for (std::size_t t = 0; t < num_classes; ++t) {
    if (support[t] == 0) continue;
    for (std::size_t p = 0; p < num_classes; ++p) {
      values[t * num_classes + p] =
          static_cast<double>(counts[t * num_classes + p]) / static_cast<double>(support[t]);
    }
  }
  return ConfusionMatrix(num_classes, std::move(values), std::move(support));
}

void save_confusion(const ConfusionMatrix& cm, const ClassTable& classes,
                    const std::string& embedding_source, const std::filesystem::path& path) {
  if (cm.num_classes() != classes.size()) {
    throw ValidationError("confusion matrix and class table sizes differ");
  }
  json rows = json::array();
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.num_classes(); ++p) {
      row.push_back(cm(ClassId{static_cast<std::uint32_t>(t)}, ClassId{static_cast<std::uint32_t>(p)}));
    }
    rows.push_back(std::move(row));
  }
  json doc{{"embedding_source", embedding_source},
           {"classes", classes.names()},
           {"support", cm.supports()},
           {"matrix", std::move(rows)}};
  detail::write_text(path, doc.dump(2) + "\n");
}

StoredConfusion load_confusion(const std::filesystem::path& path, const ClassTable& classes) {
  json doc = detail::read_json(path);
  try {
    auto names = doc.at("classes").get<std::vector<std::string>>();
    if (names != classes.names()) {
      throw ValidationError(path.string() + ": class list does not match the class table");
    }
    auto support = doc.at("support").get<std::vector<std::size_t>>();
    auto rows = doc.at("matrix").get<std::vector<std::vector<double>>>();
    std::vector<double> values;
    for (const auto& row : rows) {
      if (row.size() != names.size()) throw ValidationError(path.string() + ": ragged matrix");
      values.insert(values.end(), row.begin(), row.end());
    }
    return {ConfusionMatrix(names.size(), std::move(values), std::move(support)),
            doc.value("embedding_source", std::string("unspecified"))};
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed confusion file: " + e.what());
  }
}

RuleConfig load_rule_config(const std::filesystem::path& path) {
  json doc = detail::read_json(path);
  RuleConfig rules;
  try {
    if (doc.contains("exclude_classes")) {
      rules.exclude_classes = doc["exclude_classes"].get<std::vector<std::string>>();
    }
    if (doc.contains("exclude_pairs")) {
      rules.exclude_pairs.clear();
      for (const auto& pair : doc["exclude_pairs"]) {
        auto names = pair.get<std::vector<std::string>>();
        if (names.size() != 2) throw ValidationError(path.string() + ": exclude_pairs entries need 2 names");
        rules.exclude_pairs.emplace_back(names[0], names[1]);
      }
    }
    if (doc.contains("other_suffix")) rules.other_suffix = doc["other_suffix"].get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed rule config: " + e.what());
  }
  return rules;
}

RuleConfig default_rule_config(const ClassTable& classes) {
  RuleConfig rules;
  std::erase_if(rules.exclude_classes, [&](const std::string& n) { return !classes.find(n); });
  return rules;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return !suffix.empty() && s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<MergeProposal> propose_merges(const ConfusionMatrix& cm, const ClassTable& classes,
                                          const RuleConfig& rules) {
  if (cm.num_classes() != classes.size()) {
    throw ValidationError("confusion matrix and class table sizes differ");
  }
  std::set<ClassId> excluded;
  for (const auto& name : rules.exclude_classes) excluded.insert(classes.resolve(name));
  std::set<std::pair<ClassId, ClassId>> box_pairs;
  for (const auto& [t, c] : rules.exclude_pairs) box_pairs.emplace(classes.resolve(t), classes.resolve(c));

  auto exclusion_rule = [&](ClassId cls) {
    return classes.name(cls) == "person" ? rules::kPersonExclusion : rules::kClassExclusion;
  };
  auto is_other = [&](ClassId cls) {
    return !classes.is_thing(cls) && ends_with(classes.name(cls), rules.other_suffix);
  };

  std::vector<MergeProposal> out;
  for (std::uint32_t ti = 0; ti < cm.num_classes(); ++ti) {
    const ClassId t{ti};
    if (cm.support(t) == 0) continue;
    MergeProposal proposal;
    proposal.target = t;
    const double diagonal = cm(t, t);

    std::vector<std::pair<ClassId, double>> qualifying;
    for (std::uint32_t ji = 0; ji < cm.num_classes(); ++ji) {
      const ClassId j{ji};
      const double p = cm(t, j);
      if (j == t || p <= 0.0) continue;
      if (p >= diagonal) {
        qualifying.emplace_back(j, p);
      } else {
        proposal.rule_trace.push_back({j, p, rules::kDiagonalThreshold});
      }
    }
    std::stable_sort(qualifying.begin(), qualifying.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = kMaxMergeCandidates; i < qualifying.size(); ++i) {
      proposal.rule_trace.push_back({qualifying[i].first, qualifying[i].second, rules::kTopCutoff});
    }
    if (qualifying.size() > kMaxMergeCandidates) qualifying.resize(kMaxMergeCandidates);

    std::vector<std::pair<ClassId, double>> surviving;
    for (const auto& [j, p] : qualifying) {
      if (excluded.count(t)) {
        proposal.rule_trace.push_back({j, p, exclusion_rule(t)});
      } else if (excluded.count(j)) {
        proposal.rule_trace.push_back({j, p, exclusion_rule(j)});
      } else if (box_pairs.count({t, j})) {
        proposal.rule_trace.push_back({j, p, rules::kBoxConfusion});
      } else {
        surviving.emplace_back(j, p);
      }
    }

    // '-other' stuff classes merge only when their whole superclass does.
    std::set<ClassId> merged_group{t};
    for (const auto& [j, _] : surviving) merged_group.insert(j);
    auto superclass_covered = [&](ClassId other) {
      const auto& sc = classes.superclass(other);
      for (std::uint32_t k = 0; k < classes.size(); ++k) {
        if (classes.superclass(ClassId{k}) == sc && !merged_group.count(ClassId{k})) return false;
      }
      return true;
    };
    for (const auto& [j, p] : surviving) {
      bool blocked = false;
      for (ClassId side : {t, j}) {
        if (is_other(side) && !superclass_covered(side)) blocked = true;
      }
      if (blocked) {
        proposal.rule_trace.push_back({j, p, rules::kOtherSuffix});
      } else {
        proposal.candidates.emplace_back(j, p);
      }
    }
    out.push_back(std::move(proposal));
  }
  return out;
}

MergeMap::MergeMap(std::map<ClassId, ClassId> mapping) : mapping_(std::move(mapping)) {
  for (const auto& [from, to] : mapping_) {
    auto it = mapping_.find(to);
    if (it != mapping_.end() && it->second != to) {
      throw ValidationError("merge map is chained or cyclic at class " + std::to_string(from.value) +
                            " -> " + std::to_string(to.value) + " -> " +
                            std::to_string(it->second.value));
    }
  }
}

ClassId MergeMap::apply(ClassId cls) const {
  auto it = mapping_.find(cls);
  return it == mapping_.end() ? cls : it->second;
}

MergeMap load_merge_map(const std::filesystem::path& path, const ClassTable& classes) {
  json doc = detail::read_json(path);
  if (!doc.is_object()) throw ValidationError(path.string() + ": merge map must be a JSON object");
  std::map<ClassId, ClassId> mapping;
  for (const auto& [from, to] : doc.items()) {
    if (!to.is_string()) throw ValidationError(path.string() + ": merge target must be a class name");
    mapping[classes.resolve(from)] = classes.resolve(to.get<std::string>());
  }
  return MergeMap(std::move(mapping));
}

std::vector<Conditioning> apply_merge_map(std::span<const Conditioning> conds,
                                          const MergeMap& merge_map) {
  std::vector<Conditioning> out;
  out.reserve(conds.size());
  for (const auto& c : conds) {
    auto instances = c.instances();
    for (auto& inst : instances) inst.cls = merge_map.apply(inst.cls);
    out.emplace_back(c.id(), std::move(instances));
  }
  return out;
}

EmbeddingSet apply_merge_map(const EmbeddingSet& set, const MergeMap& merge_map) {
  auto records = set.records();
  for (auto& r : records) {
    if (r.object_class) r.object_class = merge_map.apply(*r.object_class);
  }
  return EmbeddingSet(set.dim(), set.vectors(), std::move(records));
}

}  // namespace scene_eval
