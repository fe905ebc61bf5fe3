#include "scene_eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "digest.hpp"
#include "io_util.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/frechet.hpp"
#include "scene_eval/labelmetrics.hpp"
#include "scene_eval/manifold.hpp"

#ifndef SCENE_EVAL_VERSION
#define SCENE_EVAL_VERSION "0.0.0"
#endif

namespace scene_eval {

using nlohmann::json;

std::string toolkit_version() { return SCENE_EVAL_VERSION; }

std::map<std::string, MetricSummary> aggregate(
    const std::map<std::string, std::vector<double>>& per_seed_values) {
  std::map<std::string, MetricSummary> out;
  std::optional<std::size_t> length;
  for (const auto& [name, values] : per_seed_values) {
    if (values.empty()) throw ValidationError("aggregate: metric '" + name + "' has no values");
    if (length && *length != values.size()) {
      throw ValidationError("aggregate: ragged per-seed lists (metric '" + name + "')");
    }
    length = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    out[name] = {mean, std::sqrt(var), values};
  }
  return out;
}

// ------------------------------------------------------------------- config

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

EmbeddingPaths embedding_paths(const json& value, const std::filesystem::path& base,
                               const std::string& where) {
  if (value.is_string()) {
    auto prefix = resolve(base, value.get<std::string>()).string();
    return {prefix + ".cseb", prefix + ".meta.jsonl"};
  }
  if (value.is_object() && value.contains("matrix") && value.contains("metadata")) {
    return {resolve(base, value["matrix"].get<std::string>()),
            resolve(base, value["metadata"].get<std::string>())};
  }
  throw ValidationError("config: '" + where + "' must be a path prefix or {matrix, metadata}");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

PanelConfig load_panel_config(const std::filesystem::path& path) {
  json doc = detail::read_json(path);
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  const auto base = path.parent_path();
  PanelConfig cfg;
  try {
    check_keys(doc, {"classes", "conditionings", "splits", "k", "embedding_source", "scene", "object",
                     "predictions", "ds_table", "per_class_top"},
               "config");
    cfg.classes = resolve(base, doc.at("classes").get<std::string>());
    cfg.conditionings = resolve(base, doc.at("conditionings").get<std::string>());
    cfg.splits = resolve(base, doc.at("splits").get<std::string>());
    cfg.k = doc.value("k", kDefaultNeighbors);
    cfg.embedding_source = doc.value("embedding_source", cfg.embedding_source);
    cfg.per_class_top = doc.value("per_class_top", cfg.per_class_top);
    for (const char* gran : {"scene", "object"}) {
      if (!doc.contains(gran)) continue;
      const auto& g = doc[gran];
      check_keys(g, {"real", "generated"}, gran);
      auto real = embedding_paths(g.at("real"), base, std::string(gran) + ".real");
      auto gen = embedding_paths(g.at("generated"), base, std::string(gran) + ".generated");
      if (std::string(gran) == "scene") {
        cfg.scene_real = real;
        cfg.scene_generated = gen;
      } else {
        cfg.object_real = real;
        cfg.object_generated = gen;
      }
    }
    if (doc.contains("predictions")) {
      const auto& p = doc["predictions"];
      check_keys(p, {"scene", "object"}, "predictions");
      if (p.contains("scene")) cfg.scene_predictions = resolve(base, p["scene"].get<std::string>());
      if (p.contains("object")) cfg.object_predictions = resolve(base, p["object"].get<std::string>());
    }
    if (doc.contains("ds_table")) cfg.ds_table = resolve(base, doc["ds_table"].get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": config schema violation: " + e.what());
  }
  if (cfg.k < 1) throw ValidationError("config: k must be positive");
  if (!cfg.scene_real && !cfg.object_real) {
    throw ValidationError("config: at least one of 'scene' or 'object' is required");
  }
  return cfg;
}

// -------------------------------------------------------------------- panel

namespace {

struct SplitLabel {
  SplitName split;
  const char* name;
};

constexpr SplitLabel kPanelSplits[] = {
    {SplitName::seen, "S_s"}, {SplitName::unseen_fg, "S_u"}, {SplitName::unseen_coarse, "S_u2"}};

struct Inputs {
  ClassTable classes;
  ConditioningMap conditionings;
  SplitAssignment splits;
  std::map<std::string, std::string> digests;
};

void record_digest(Inputs& in, const std::filesystem::path& p) {
  in.digests[p.string()] = detail::sha256_file(p);
}

SplitName split_of(const SplitAssignment& splits, const std::string& id) {
  auto s = splits.find(id);
  if (!s) throw ValidationError("conditioning '" + id + "' is not in the split file");
  return *s;
}

EmbeddingSet load_checked(Inputs& in, const EmbeddingPaths& paths, Kind kind, Granularity gran) {
  auto set = load_embedding_set(paths.matrix, paths.metadata, in.classes);
  record_digest(in, paths.matrix);
  record_digest(in, paths.metadata);
  for (const auto& r : set.records()) {
    if (r.kind != kind || r.granularity != gran) {
      throw ValidationError(paths.metadata.string() + ": expected only " + std::string(to_string(kind)) +
                            " " + std::string(to_string(gran)) + " rows");
    }
    if (!in.conditionings.count(r.conditioning_id)) {
      throw ValidationError(paths.metadata.string() + ": unresolvable conditioning_id '" +
                            r.conditioning_id + "'");
    }
    split_of(in.splits, r.conditioning_id);
  }
  return set;
}

struct PredictionSets {
  std::optional<std::vector<ScenePrediction>> scene;
  std::optional<std::vector<ObjectPrediction>> object;
  std::optional<PairwiseDistanceTable> ds_table;
};

std::string fid_name(Granularity g) { return g == Granularity::scene ? "SFID" : "OFID"; }

MetricReport evaluate_cell(const Inputs& in, const PanelConfig& cfg, const PredictionSets& preds,
                           Granularity gran, const SplitLabel& label, const EmbeddingSet& real_pool,
                           const EmbeddingSet& gen_all, const std::vector<std::uint32_t>& seeds,
                           const EmbeddingSet& real_x, const EmbeddingSet& gen_x) {
  const bool scene = gran == Granularity::scene;
  MetricReport report;
  report.split = label.name;
  report.granularity = gran;
  report.seeds = seeds;

  auto in_split = [&](const std::string& id) { return split_of(in.splits, id) == label.split; };
  const Manifold real_manifold = compute_radii(real_x, real_pool, cfg.k);

  std::vector<ClassId> top;
  if (!scene && cfg.per_class_top > 0) top = top_k_classes(real_pool, cfg.per_class_top).classes;

  std::map<std::string, std::vector<double>> values;
  std::map<ClassId, std::map<std::string, std::vector<double>>> class_values;
  bool fid_skipped = false;
  bool count_mismatch = false;
  std::size_t f1_seeds = 0;
  std::size_t acc_seeds = 0;

  for (std::uint32_t seed : seeds) {
    auto gen_s = filter(gen_x, [seed](const EmbeddingRecord& r) { return r.seed == seed; });
    if (gen_s.empty()) {
      throw ValidationError(std::string(label.name) + " " + std::string(to_string(gran)) +
                            ": seed " + std::to_string(seed) + " has no generated rows");
    }
    auto pool_s = filter(gen_all, [seed](const EmbeddingRecord& r) { return r.seed == seed; });
    const Manifold gen_manifold = compute_radii(gen_s, pool_s, cfg.k);

    auto cov = coverage_scores(gen_s, real_manifold, in.conditionings);
    values[scene ? "SP" : "OP"].push_back(cov.precision);
    values[scene ? "SC" : "OC"].push_back(cov.consistency);
    values[scene ? "SR" : "OR"].push_back(recall(real_x, gen_manifold));

    if (real_x.size() >= 2 && gen_s.size() >= 2) {
      values[fid_name(gran)].push_back(fid(real_x, gen_s));
      if (real_x.size() != gen_s.size()) count_mismatch = true;
    } else {
      fid_skipped = true;
    }

    if (scene && preds.scene) {
      std::vector<ScenePrediction> subset;
      for (const auto& p : *preds.scene) {
        if (p.seed == seed && in_split(p.conditioning_id)) subset.push_back(p);
      }
      if (!subset.empty()) {
        values["F1"].push_back(mean_f1(subset, in.conditionings));
        ++f1_seeds;
      }
    }
    if (!scene && preds.object) {
      std::vector<ObjectPrediction> subset;
      for (const auto& p : *preds.object) {
        if (p.seed == seed && in_split(p.conditioning_id)) subset.push_back(p);
      }
      if (!subset.empty()) {
        auto acc = object_accuracy(subset);
        values["Acc"].push_back(acc.acc_instance);
        values["Acc_class_balanced"].push_back(acc.acc_class_balanced);
        ++acc_seeds;
      }
    }

    if (!top.empty()) {
      auto per_class = per_class_report(real_x, gen_s, real_manifold, gen_manifold,
                                        in.conditionings, top);
      for (const auto& [cls, m] : per_class) {
        auto& cv = class_values[cls];
        cv["precision"].push_back(m.precision);
        cv["recall"].push_back(m.recall);
        cv["consistency"].push_back(m.consistency);
      }
    }
  }

  if (fid_skipped) {
    values.erase(fid_name(gran));
    report.warnings.push_back(fid_name(gran) + " omitted: fewer than 2 rows on one side");
  }
  if (count_mismatch) {
    report.warnings.push_back(fid_name(gran) + " sample counts differ between real (" +
                              std::to_string(real_x.size()) +
                              ") and generated sets; FID values are not comparable across reports");
  }
  if (f1_seeds != 0 && f1_seeds != seeds.size()) {
    throw ValidationError(std::string(label.name) + ": scene predictions missing for some seeds");
  }
  if (acc_seeds != 0 && acc_seeds != seeds.size()) {
    throw ValidationError(std::string(label.name) + ": object predictions missing for some seeds");
  }
  report.metrics = aggregate(values);

  for (const auto& [cls, cv] : class_values) {
    if (cv.at("precision").size() != seeds.size()) continue;
    report.per_class[in.classes.name(cls)] = aggregate(cv);
  }

  std::string ds_mode = "none";
  if (scene) {
    try {
      DiversityScore ds;
      if (preds.ds_table) {
        PairwiseDistanceTable subset;
        for (const auto& [key, d] : preds.ds_table->entries()) {
          if (in.splits.find(std::get<0>(key)) == label.split) {
            subset.add(std::get<0>(key), std::get<1>(key), std::get<2>(key), d);
          }
        }
        ds = ds_from_table(subset);
      } else {
        ds = ds_from_embeddings(gen_x);
      }
      report.diversity = DiversitySummary{ds.mean, ds.std, ds.conditionings, std::string(to_string(ds.mode))};
      ds_mode = report.diversity->mode;
    } catch (const ValidationError& e) {
      report.warnings.push_back(std::string("DS omitted: ") + e.what());
    }
  }

  report.provenance.k = cfg.k;
  report.provenance.embedding_source = cfg.embedding_source;
  report.provenance.n_real = real_x.size();
  report.provenance.n_generated = gen_x.size();
  report.provenance.ds_mode = ds_mode;
  report.provenance.toolkit_version = toolkit_version();
  report.provenance.input_digests = in.digests;
  return report;
}

}  // namespace

Panel run_panel(const PanelConfig& cfg) {
  Inputs in;
  in.classes = load_class_table(cfg.classes);
  record_digest(in, cfg.classes);
  auto conds = load_conditionings(cfg.conditionings, in.classes);
  record_digest(in, cfg.conditionings);
  in.conditionings = index_conditionings(conds);
  in.splits = load_split_assignment(cfg.splits);
  record_digest(in, cfg.splits);

  PredictionSets preds;
  if (cfg.scene_predictions) {
    preds.scene = load_scene_predictions(*cfg.scene_predictions, in.classes);
    record_digest(in, *cfg.scene_predictions);
  }
  if (cfg.object_predictions) {
    preds.object = load_object_predictions(*cfg.object_predictions, in.classes);
    record_digest(in, *cfg.object_predictions);
  }
  if (cfg.ds_table) {
    preds.ds_table = load_distance_table(*cfg.ds_table);
    record_digest(in, *cfg.ds_table);
  }

  struct Source {
    Granularity gran;
    const std::optional<EmbeddingPaths>& real;
    const std::optional<EmbeddingPaths>& generated;
  };
  std::vector<std::pair<Granularity, std::pair<EmbeddingSet, EmbeddingSet>>> sets;
  for (const Source& src : {Source{Granularity::scene, cfg.scene_real, cfg.scene_generated},
                            Source{Granularity::object, cfg.object_real, cfg.object_generated}}) {
    if (!src.real || !src.generated) continue;
    auto real = load_checked(in, *src.real, Kind::real, src.gran);
    auto gen = load_checked(in, *src.generated, Kind::generated, src.gran);
    sets.emplace_back(src.gran, std::make_pair(std::move(real), std::move(gen)));
  }

  Panel panel;
  for (const auto& [gran, pair] : sets) {
    const auto& [real_pool, gen_all] = pair;
    std::set<std::uint32_t> seed_set;
    for (const auto& r : gen_all.records()) seed_set.insert(r.seed);
    const std::vector<std::uint32_t> seeds(seed_set.begin(), seed_set.end());

    for (const auto& label : kPanelSplits) {
      auto member = [&](const EmbeddingRecord& r) {
        return split_of(in.splits, r.conditioning_id) == label.split;
      };
      auto real_x = filter(real_pool, member);
      auto gen_x = filter(gen_all, member);
      if (real_x.empty() || gen_x.empty()) continue;
      panel.reports.push_back(
          evaluate_cell(in, cfg, preds, gran, label, real_pool, gen_all, seeds, real_x, gen_x));
    }
  }
  return panel;
}

// ------------------------------------------------------------ serialization

namespace {

json summary_json(const MetricSummary& s) {
  return json{{"mean", s.mean}, {"std", s.std}, {"per_seed", s.per_seed}};
}

json report_json(const MetricReport& r) {
  json metrics = json::object();
  for (const auto& [name, s] : r.metrics) metrics[name] = summary_json(s);
  json per_class = json::object();
  for (const auto& [cls, ms] : r.per_class) {
    json entry = json::object();
    for (const auto& [name, s] : ms) entry[name] = summary_json(s);
    per_class[cls] = std::move(entry);
  }
  json doc{{"split", r.split},
           {"granularity", std::string(to_string(r.granularity))},
           {"seeds", r.seeds},
           {"metrics", std::move(metrics)},
           {"per_class", std::move(per_class)},
           {"warnings", r.warnings},
           {"provenance",
            {{"k", r.provenance.k},
             {"embedding_source", r.provenance.embedding_source},
             {"n_real", r.provenance.n_real},
             {"n_generated", r.provenance.n_generated},
             {"ds_mode", r.provenance.ds_mode},
             {"ds_std_over", "conditionings"},
             {"std_kind", "population"},
             {"toolkit_version", r.provenance.toolkit_version},
             {"input_digests", r.provenance.input_digests}}}};
  if (r.diversity) {
    doc["diversity"] = {{"DS", r.diversity->mean},
                        {"std", r.diversity->std},
                        {"conditionings", r.diversity->conditionings},
                        {"mode", r.diversity->mode}};
  }
  return doc;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_to_json(const MetricReport& report) { return report_json(report).dump(2) + "\n"; }

std::string panel_to_json(const Panel& panel) {
  json reports = json::array();
  for (const auto& r : panel.reports) reports.push_back(report_json(r));
  json doc{{"toolkit_version", toolkit_version()}, {"reports", std::move(reports)}};
  return doc.dump(2) + "\n";
}

std::string panel_to_csv(const Panel& panel) {
  std::string out = "split,granularity,metric,seed,value\n";
  for (const auto& r : panel.reports) {
    const std::string prefix = r.split + "," + std::string(to_string(r.granularity)) + ",";
    for (const auto& [name, s] : r.metrics) {
      for (std::size_t i = 0; i < s.per_seed.size(); ++i) {
        out += prefix + name + "," + std::to_string(r.seeds[i]) + "," + format_double(s.per_seed[i]) + "\n";
      }
    }
    if (r.diversity) out += prefix + "DS,all," + format_double(r.diversity->mean) + "\n";
  }
  return out;
}

void write_panel(const Panel& panel, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& r : panel.reports) {
    detail::write_text(out_dir / ("report_" + r.split + "_" + std::string(to_string(r.granularity)) + ".json"),
                       report_to_json(r));
  }
  detail::write_text(out_dir / "panel.json", panel_to_json(panel));
  detail::write_text(out_dir / "panel.csv", panel_to_csv(panel));
}

std::string plot_data_csv(const std::filesystem::path& panel_json) {
  json doc = detail::read_json(panel_json);
  std::string out = "split,granularity,metric,mean,std,n\n";
  try {
    for (const auto& r : doc.at("reports")) {
      const std::string prefix =
          r.at("split").get<std::string>() + "," + r.at("granularity").get<std::string>() + ",";
      for (const auto& [name, s] : r.at("metrics").items()) {
        out += prefix + name + "," + format_double(s.at("mean").get<double>()) + "," +
               format_double(s.at("std").get<double>()) + "," +
               std::to_string(s.at("per_seed").size()) + "\n";
      }
      if (r.contains("diversity")) {
        const auto& d = r["diversity"];
        out += prefix + "DS," + format_double(d.at("DS").get<double>()) + "," +
               format_double(d.at("std").get<double>()) + "," +
               std::to_string(d.at("conditionings").get<std::size_t>()) + "\n";
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(panel_json.string() + ": malformed panel file: " + e.what());
  }
  return out;
}

}  // namespace scene_eval
