#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "scene_eval/catmerge.hpp"
#include "scene_eval/diversity.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/frechet.hpp"
#include "scene_eval/labelmetrics.hpp"
#include "scene_eval/manifold.hpp"
#include "scene_eval/parallel.hpp"
#include "scene_eval/report.hpp"
#include "scene_eval/splits.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scene_eval;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config;
  int k = kDefaultNeighbors;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::size_t threads = 0;
  std::optional<PanelConfig> panel;  // loaded from --config
  bool k_given = false;
};

// Path options fall back to the evaluation config when one is given.
struct Paths {
  std::string classes;
  std::string conditionings;
  std::string splits;
};

fs::path need(const std::string& value, const std::optional<fs::path>& fallback, const char* flag) {
  if (!value.empty()) return value;
  if (fallback) return *fallback;
  throw ValidationError(std::string("missing ") + flag + " (and no --config to take it from)");
}

fs::path classes_path(const Globals& g, const Paths& p) {
  return need(p.classes, g.panel ? std::optional(g.panel->classes) : std::nullopt, "--classes");
}
fs::path conditionings_path(const Globals& g, const Paths& p) {
  return need(p.conditionings, g.panel ? std::optional(g.panel->conditionings) : std::nullopt,
              "--conditionings");
}
fs::path splits_path(const Globals& g, const Paths& p) {
  return need(p.splits, g.panel ? std::optional(g.panel->splits) : std::nullopt, "--splits");
}

int effective_k(const Globals& g) {
  if (!g.k_given && g.panel) return g.panel->k;
  return g.k;
}

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << doc.dump(2) << "\n";
}

std::vector<Conditioning> restrict_to_split(std::vector<Conditioning> conds, const fs::path& splits_file,
                                            const std::string& split_name) {
  if (split_name.empty()) return conds;
  auto name = parse_split_name(split_name);
  if (!name) throw ValidationError("unknown split name '" + split_name + "'");
  auto splits = load_split_assignment(splits_file);
  std::vector<Conditioning> out;
  for (auto& c : conds) {
    if (splits.find(c.id()) == *name) out.push_back(std::move(c));
  }
  return out;
}

CountMode count_mode(const std::string& text) {
  auto mode = parse_count_mode(text);
  if (!mode) throw ValidationError("--count must be 'instances' or 'images'");
  return *mode;
}

json class_list(const ClassTable& classes, const std::vector<ClassId>& ids) {
  json out = json::array();
  for (auto c : ids) out.push_back(classes.name(c));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-generation evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Evaluation config (JSON)");
  auto* k_opt = app.add_option("--k", g.k, "Nearest-neighbour k for manifold radii")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (default: SCENE_EVAL_THREADS or all cores)");

  Paths paths;
  auto add_common = [&](CLI::App* cmd, bool conds, bool splits) {
    cmd->add_option("--classes", paths.classes, "classes.json");
    if (conds) cmd->add_option("--conditionings", paths.conditionings, "Conditioning JSONL");
    if (splits) cmd->add_option("--splits", paths.splits, "Split JSON");
  };

  std::function<void()> run;

  // split ------------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "Partition conditionings into seen/unseen/validation");
  std::string train_file, eval_file;
  std::size_t validation_size = 0;
  add_common(split_cmd, false, false);
  split_cmd->add_option("--train", train_file, "Training conditionings")->required();
  split_cmd->add_option("--eval", eval_file, "Evaluation conditionings")->required();
  split_cmd->add_option("--validation-size", validation_size, "Layouts drawn into validation");
  split_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto train = load_conditionings(train_file, classes);
      auto eval = load_conditionings(eval_file, classes);
      auto split = partition(train, eval, validation_size, g.seed);
      auto problems = validate_split(split, train, eval);
      if (!problems.empty()) throw ValidationError("partition failed validation: " + problems.front());
      save_split_assignment(split, fs::path(g.out) / "splits.json");

      json counts = json::object();
      for (auto s : {SplitName::seen, SplitName::unseen_fg, SplitName::unseen_coarse, SplitName::validation}) {
        counts[std::string(to_string(s))] = split.count(s);
      }
      auto head = top_k_classes(train, kLongTailHeadSize);
      auto lt = long_tail_fraction(class_histogram(eval), head.classes);
      emit({{"splits", (fs::path(g.out) / "splits.json").string()},
            {"counts", counts},
            {"eval_long_tail_fraction", lt.fraction},
            {"head_classes", class_list(classes, head.classes)}});
    };
  });

  // subsample --------------------------------------------------------------
  auto* sub_cmd = app.add_subcommand("subsample", "Class-distribution matched subsample");
  std::string source_split, target_split, source_crops, target_crops, count_text = "instances";
  std::size_t sub_size = 0;
  bool greedy_only = false;
  add_common(sub_cmd, true, true);
  sub_cmd->add_option("--source-split", source_split, "Split to draw from (e.g. seen)");
  sub_cmd->add_option("--target-split", target_split, "Split whose histogram is matched");
  sub_cmd->add_option("--source-crops", source_crops, "Object crop embeddings prefix (object-level source)");
  sub_cmd->add_option("--target-crops", target_crops, "Object crop embeddings prefix (object-level target)");
  sub_cmd->add_option("--size", sub_size, "Number of items to select")->required();
  sub_cmd->add_option("--count", count_text, "instances | images");
  sub_cmd->add_flag("--greedy-only", greedy_only, "Skip the swap refinement");
  sub_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto items = [&](const std::string& crops, const std::string& split_name) {
        if (!crops.empty()) return crop_pseudo_conditionings(load_embedding_prefix(crops, classes));
        auto conds = load_conditionings(conditionings_path(g, paths), classes);
        return split_name.empty() ? conds : restrict_to_split(std::move(conds), splits_path(g, paths), split_name);
      };
      auto source = items(source_crops, source_split);
      auto target_items = items(target_crops, target_split);
      const auto mode = count_mode(count_text);
      auto result = subsample_matched(source, class_histogram(target_items, mode), sub_size, g.seed, mode,
                                      !greedy_only);
      json doc{{"ids", result.ids},
               {"size", result.ids.size()},
               {"final_l1", result.final_l1},
               {"greedy_l1", result.greedy_l1},
               {"swaps", result.swaps},
               {"count", count_text},
               {"seed", g.seed}};
      write_json(fs::path(g.out) / "subsample.json", doc);
      doc.erase("ids");
      emit(doc);
    };
  });

  // radii ------------------------------------------------------------------
  auto* radii_cmd = app.add_subcommand("radii", "k-NN hypersphere radii");
  std::string targets_prefix, pool_prefix;
  add_common(radii_cmd, false, false);
  radii_cmd->add_option("--targets", targets_prefix, "Embeddings prefix")->required();
  radii_cmd->add_option("--pool", pool_prefix, "Radius pool prefix (default: targets)");
  radii_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto targets = load_embedding_prefix(targets_prefix, classes);
      auto pool = pool_prefix.empty() ? targets : load_embedding_prefix(pool_prefix, classes);
      auto m = compute_radii(targets, pool, effective_k(g));
      json doc{{"k", m.k()}, {"n", m.size()}, {"radii", m.radii()}};
      write_json(fs::path(g.out) / "radii.json", doc);
      double max_r = 0;
      for (double r : m.radii()) max_r = std::max(max_r, r);
      emit({{"k", m.k()}, {"n", m.size()}, {"max_radius", max_r}});
    };
  });

  // pr / consistency -------------------------------------------------------
  std::string real_prefix, gen_prefix, real_pool_prefix, gen_pool_prefix;
  auto add_sets = [&](CLI::App* cmd) {
    cmd->add_option("--real", real_prefix, "Real embeddings prefix")->required();
    cmd->add_option("--generated", gen_prefix, "Generated embeddings prefix")->required();
    cmd->add_option("--real-pool", real_pool_prefix, "Radius pool for the real manifold (default: --real)");
  };
  auto* pr_cmd = app.add_subcommand("pr", "Manifold precision and recall");
  add_common(pr_cmd, false, false);
  add_sets(pr_cmd);
  pr_cmd->add_option("--generated-pool", gen_pool_prefix, "Radius pool for the generated manifold");
  pr_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto real = load_embedding_prefix(real_prefix, classes);
      auto gen = load_embedding_prefix(gen_prefix, classes);
      auto real_pool = real_pool_prefix.empty() ? real : load_embedding_prefix(real_pool_prefix, classes);
      auto gen_pool = gen_pool_prefix.empty() ? gen : load_embedding_prefix(gen_pool_prefix, classes);
      const int k = effective_k(g);
      auto real_m = compute_radii(real, real_pool, k);
      auto gen_m = compute_radii(gen, gen_pool, k);
      emit({{"precision", precision(gen, real_m)},
            {"recall", recall(real, gen_m)},
            {"k", k},
            {"n_real", real.size()},
            {"n_generated", gen.size()}});
    };
  });

  auto* cons_cmd = app.add_subcommand("consistency", "Manifold precision and consistency");
  add_common(cons_cmd, true, false);
  add_sets(cons_cmd);
  cons_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto conds = load_conditionings(conditionings_path(g, paths), classes);
      auto map = index_conditionings(conds);
      auto real = load_embedding_prefix(real_prefix, classes);
      auto gen = load_embedding_prefix(gen_prefix, classes);
      auto real_pool = real_pool_prefix.empty() ? real : load_embedding_prefix(real_pool_prefix, classes);
      const int k = effective_k(g);
      auto s = coverage_scores(gen, compute_radii(real, real_pool, k), map);
      emit({{"precision", s.precision}, {"consistency", s.consistency}, {"k", k}, {"n_generated", gen.size()}});
    };
  });

  // fid --------------------------------------------------------------------
  auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between two embedding sets");
  std::string x_prefix, y_prefix;
  add_common(fid_cmd, false, false);
  fid_cmd->add_option("--x", x_prefix, "First embeddings prefix")->required();
  fid_cmd->add_option("--y", y_prefix, "Second embeddings prefix")->required();
  fid_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto r = fid_report(load_embedding_prefix(x_prefix, classes), load_embedding_prefix(y_prefix, classes));
      json doc{{"fid", r.fid},   {"n_x", r.n_x}, {"n_y", r.n_y}, {"dim", r.dim}, {"cov_rank_x", r.cov_rank_x},
               {"cov_rank_y", r.cov_rank_y}};
      if (r.n_x != r.n_y) doc["warning"] = "sample counts differ; FID is sensitive to N";
      emit(doc);
    };
  });

  // diversity --------------------------------------------------------------
  auto* ds_cmd = app.add_subcommand("diversity", "Diversity score");
  std::string table_file, ds_embeddings;
  add_common(ds_cmd, false, false);
  auto* table_opt = ds_cmd->add_option("--table", table_file, "Pairwise distance table (JSONL)");
  auto* emb_opt = ds_cmd->add_option("--embeddings", ds_embeddings, "Generated embeddings prefix (fallback)");
  table_opt->excludes(emb_opt);
  ds_cmd->callback([&] {
    run = [&] {
      DiversityScore ds;
      if (!table_file.empty()) {
        ds = ds_from_table(load_distance_table(table_file));
      } else if (!ds_embeddings.empty()) {
        ds = ds_from_embeddings(load_embedding_prefix(ds_embeddings, load_class_table(classes_path(g, paths))));
      } else {
        throw ValidationError("diversity needs --table or --embeddings");
      }
      emit({{"DS", ds.mean}, {"std", ds.std}, {"conditionings", ds.conditionings},
            {"mode", std::string(to_string(ds.mode))}});
    };
  });

  // setmetrics -------------------------------------------------------------
  auto* set_cmd = app.add_subcommand("setmetrics", "F1 and object accuracy from predictions");
  std::string scene_preds, object_preds;
  add_common(set_cmd, true, false);
  set_cmd->add_option("--scene-predictions", scene_preds, "{conditioning_id, seed, labels}");
  set_cmd->add_option("--object-predictions", object_preds, "{conditioning_id, seed, label, object_class}");
  set_cmd->callback([&] {
    run = [&] {
      if (scene_preds.empty() && object_preds.empty()) {
        throw ValidationError("setmetrics needs --scene-predictions and/or --object-predictions");
      }
      auto classes = load_class_table(classes_path(g, paths));
      json doc = json::object();
      if (!scene_preds.empty()) {
        auto conds = load_conditionings(conditionings_path(g, paths), classes);
        auto preds = load_scene_predictions(scene_preds, classes);
        doc["F1"] = mean_f1(preds, index_conditionings(conds));
        doc["n_scene"] = preds.size();
      }
      if (!object_preds.empty()) {
        auto acc = object_accuracy(load_object_predictions(object_preds, classes));
        doc["Acc"] = acc.acc_instance;
        doc["Acc_class_balanced"] = acc.acc_class_balanced;
        doc["n_object"] = acc.n;
      }
      emit(doc);
    };
  });

  // confusion / merges -----------------------------------------------------
  auto* conf_cmd = app.add_subcommand("confusion", "1-NN confusion matrix over object crops");
  std::string crops_prefix, embedding_source = "unspecified";
  add_common(conf_cmd, false, false);
  conf_cmd->add_option("--crops", crops_prefix, "Object crop embeddings prefix")->required();
  conf_cmd->add_option("--embedding-source", embedding_source, "Recorded in the output");
  conf_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto cm = one_nn_confusion(load_embedding_prefix(crops_prefix, classes), classes.size());
      const auto path = fs::path(g.out) / "confusion.json";
      save_confusion(cm, classes, embedding_source, path);
      std::size_t supported = 0;
      for (auto s : cm.supports()) supported += s ? 1 : 0;
      emit({{"confusion", path.string()}, {"classes", classes.size()}, {"classes_with_support", supported}});
    };
  });

  auto* prop_cmd = app.add_subcommand("propose-merges", "Rule-filtered merge candidates");
  std::string confusion_file, rules_file;
  add_common(prop_cmd, false, false);
  prop_cmd->add_option("--confusion", confusion_file, "confusion.json")->required();
  prop_cmd->add_option("--rules", rules_file, "Rule config JSON");
  prop_cmd->callback([&] {
    run = [&] {
      auto classes = load_class_table(classes_path(g, paths));
      auto stored = load_confusion(confusion_file, classes);
      auto rules = rules_file.empty() ? default_rule_config(classes) : load_rule_config(rules_file);
      json out = json::array();
      std::size_t with_candidates = 0;
      for (const auto& p : propose_merges(stored.matrix, classes, rules)) {
        json cands = json::array();
        for (const auto& [c, prob] : p.candidates) cands.push_back({{"class", classes.name(c)}, {"p", prob}});
        json trace = json::array();
        for (const auto& d : p.rule_trace) {
          trace.push_back({{"class", classes.name(d.candidate)}, {"p", d.probability}, {"rule", d.rule}});
        }
        with_candidates += p.candidates.empty() ? 0 : 1;
        out.push_back({{"target", classes.name(p.target)},
                       {"diagonal", stored.matrix(p.target, p.target)},
                       {"candidates", cands},
                       {"rule_trace", trace}});
      }
      const auto path = fs::path(g.out) / "proposals.json";
      write_json(path, {{"embedding_source", stored.embedding_source}, {"proposals", out}});
      emit({{"proposals", path.string()}, {"targets", out.size()}, {"targets_with_candidates", with_candidates}});
    };
  });

  auto* apply_cmd = app.add_subcommand("apply-merges", "Relabel conditionings and embeddings");
  std::string merge_file, apply_conds, apply_embeddings;
  add_common(apply_cmd, false, false);
  apply_cmd->add_option("--merge-map", merge_file, "{from: to} JSON")->required();
  apply_cmd->add_option("--conditionings", apply_conds, "Conditioning JSONL to relabel");
  apply_cmd->add_option("--embeddings", apply_embeddings, "Embeddings prefix to relabel");
  apply_cmd->callback([&] {
    run = [&] {
      if (apply_conds.empty() && apply_embeddings.empty()) {
        throw ValidationError("apply-merges needs --conditionings and/or --embeddings");
      }
      auto classes = load_class_table(classes_path(g, paths));
      auto map = load_merge_map(merge_file, classes);
      json doc{{"merged_classes", map.mapping().size()}};
      if (!apply_conds.empty()) {
        auto merged = apply_merge_map(load_conditionings(apply_conds, classes), map);
        const auto path = fs::path(g.out) / fs::path(apply_conds).filename();
        save_conditionings(merged, path, classes);
        doc["conditionings"] = path.string();
      }
      if (!apply_embeddings.empty()) {
        auto merged = apply_merge_map(load_embedding_prefix(apply_embeddings, classes), map);
        const auto prefix = (fs::path(g.out) / fs::path(apply_embeddings).filename()).string();
        save_embedding_prefix(merged, prefix, classes);
        doc["embeddings"] = prefix;
      }
      emit(doc);
    };
  });

  // panel / plot-data ------------------------------------------------------
  auto* panel_cmd = app.add_subcommand("panel", "Full metric panel from --config");
  panel_cmd->callback([&] {
    run = [&] {
      if (!g.panel) throw ValidationError("panel needs --config");
      auto cfg = *g.panel;
      if (g.k_given) cfg.k = g.k;
      auto panel = run_panel(cfg);
      write_panel(panel, g.out);
      json summary = json::array();
      for (const auto& r : panel.reports) {
        json metrics = json::object();
        for (const auto& [name, s] : r.metrics) metrics[name] = s.mean;
        if (r.diversity) metrics["DS"] = r.diversity->mean;
        json row{{"split", r.split}, {"granularity", std::string(to_string(r.granularity))}, {"metrics", metrics},
                 {"n_real", r.provenance.n_real}, {"n_generated", r.provenance.n_generated}};
        if (!r.warnings.empty()) row["warnings"] = r.warnings;
        summary.push_back(row);
      }
      emit({{"out", g.out}, {"reports", summary}});
    };
  });

  auto* plot_cmd = app.add_subcommand("plot-data", "Mean/std CSV from a panel.json");
  std::string panel_file;
  plot_cmd->add_option("--panel", panel_file, "panel.json (default: <out>/panel.json)");
  plot_cmd->callback([&] {
    run = [&] {
      const fs::path in = panel_file.empty() ? fs::path(g.out) / "panel.json" : fs::path(panel_file);
      const auto csv = plot_data_csv(in);
      const auto path = fs::path(g.out) / "plot_data.csv";
      fs::create_directories(g.out);
      std::ofstream(path) << csv;
      std::cout << csv;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    g.k_given = k_opt->count() > 0;
    if (g.threads) set_thread_count(g.threads);
    if (!g.config.empty()) g.panel = load_panel_config(g.config);
    run();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
