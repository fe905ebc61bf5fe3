#include "panel_fixture.hpp"

#include <algorithm>
#include <fstream>

#include "fixtures.hpp"
#include "json.hpp"

namespace scene_eval::testing {

using nlohmann::json;

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream f(path);
  for (const auto& l : lines) f << l.dump() << "\n";
}

}  // namespace

std::filesystem::path write_panel_inputs(const PanelInputs& in, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_class_table(in.classes, dir / "classes.json");
  save_conditionings(in.conditionings, dir / "conds.jsonl", in.classes);
  save_split_assignment(in.splits, dir / "splits.json");

  json cfg{{"classes", "classes.json"},
           {"conditionings", "conds.jsonl"},
           {"splits", "splits.json"},
           {"k", in.k},
           {"embedding_source", "fixture"},
           {"per_class_top", in.per_class_top}};

  auto put = [&](const char* gran, const std::optional<EmbeddingSet>& real,
                 const std::optional<EmbeddingSet>& gen) {
    if (!real || !gen) return;
    const std::string g(gran);
    save_embedding_prefix(*real, (dir / (g + "_real")).string(), in.classes);
    save_embedding_prefix(*gen, (dir / (g + "_gen")).string(), in.classes);
    cfg[g] = {{"real", g + "_real"}, {"generated", g + "_gen"}};
  };
  put("scene", in.scene_real, in.scene_generated);
  put("object", in.object_real, in.object_generated);

  json preds = json::object();
  if (in.scene_predictions) {
    std::vector<json> lines;
    for (const auto& p : *in.scene_predictions) {
      json labels = json::array();
      for (auto c : p.labels) labels.push_back(in.classes.name(c));
      lines.push_back({{"conditioning_id", p.conditioning_id}, {"seed", p.seed}, {"labels", labels}});
    }
    write_lines(dir / "scene_preds.jsonl", lines);
    preds["scene"] = "scene_preds.jsonl";
  }
  if (in.object_predictions) {
    std::vector<json> lines;
    for (const auto& p : *in.object_predictions) {
      lines.push_back({{"conditioning_id", p.conditioning_id},
                       {"seed", p.seed},
                       {"label", in.classes.name(p.predicted)},
                       {"object_class", in.classes.name(p.truth)}});
    }
    write_lines(dir / "object_preds.jsonl", lines);
    preds["object"] = "object_preds.jsonl";
  }
  if (!preds.empty()) cfg["predictions"] = preds;
  if (in.ds_table) {
    save_distance_table(*in.ds_table, dir / "ds.jsonl");
    cfg["ds_table"] = "ds.jsonl";
  }
  std::ofstream(dir / "config.json") << cfg.dump(2) << "\n";
  return dir / "config.json";
}

PanelInputs random_panel_inputs(std::uint64_t seed, std::size_t rows, std::size_t dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  PanelInputs in;
  in.classes = make_classes({"person", "car", "tree", "sky", "dog", "cat"});
  const std::uint32_t num_classes = 6;

  // ~rows/10 conditionings, 3 seeds; scene rows = conds * 4, object rows ~ conds * 6
  const std::size_t n_conds = std::max<std::size_t>(6, rows / 10);
  in.conditionings = random_conditionings(rng, n_conds, num_classes, 2, "c");
  const SplitName order[] = {SplitName::seen, SplitName::unseen_fg, SplitName::unseen_coarse};
  for (std::size_t i = 0; i < n_conds; ++i) in.splits.assign(in.conditionings[i].id(), order[i % 3]);

  const std::vector<std::uint32_t> seeds{0, 1, 2};
  auto vec = [&](float shift) {
    std::vector<float> v(dim);
    for (auto& x : v) x = normal(rng) + shift;
    return v;
  };

  std::vector<std::vector<float>> sr, sg, orr, og;
  std::vector<EmbeddingRecord> srr, sgr, orr_rec, ogr;
  in.scene_predictions.emplace();
  in.object_predictions.emplace();
  for (const auto& c : in.conditionings) {
    sr.push_back(vec(0));
    srr.push_back(scene_record(c.id()));
    for (auto s : seeds) {
      sg.push_back(vec(0.3f));
      auto r = scene_record(c.id(), s);
      r.kind = Kind::generated;
      sgr.push_back(r);
      ClassSet labels;
      for (auto cls : c.coarse()) {
        if (rng() % 4) labels.insert(cls);
      }
      in.scene_predictions->push_back({c.id(), s, labels});
    }
    for (const auto& inst : c.instances()) {
      orr.push_back(vec(static_cast<float>(inst.cls.value)));
      orr_rec.push_back(object_record(c.id(), inst.cls.value));
      for (auto s : seeds) {
        og.push_back(vec(static_cast<float>(inst.cls.value) + 0.2f));
        auto r = object_record(c.id(), inst.cls.value, s);
        r.kind = Kind::generated;
        ogr.push_back(r);
        ClassId pred = rng() % 3 ? inst.cls : ClassId{static_cast<std::uint32_t>(rng() % num_classes)};
        in.object_predictions->push_back({c.id(), s, pred, inst.cls});
      }
    }
  }
  in.scene_real = make_set(dim, sr, srr);
  in.scene_generated = make_set(dim, sg, sgr);
  in.object_real = make_set(dim, orr, orr_rec);
  in.object_generated = make_set(dim, og, ogr);
  return in;
}

}  // namespace scene_eval::testing
