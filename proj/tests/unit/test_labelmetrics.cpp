#include <fstream>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/labelmetrics.hpp"
#include "scene_eval/splits.hpp"

using namespace scene_eval;
using namespace scene_eval::testing;
using doctest::Approx;
using doctest::Contains;

namespace {
ClassSet ids(std::initializer_list<std::uint32_t> v) {
  ClassSet s;
  for (auto x : v) s.insert(ClassId{x});
  return s;
}
ObjectPrediction obj(std::uint32_t predicted, std::uint32_t truth) {
  return {"c", 0, ClassId{predicted}, ClassId{truth}};
}
}  // namespace

TEST_CASE("f1 examples") {
  CHECK(f1_score(ids({0, 1}), ids({0, 1})) == 1.0);
  CHECK(f1_score(ids({0}), ids({0, 1})) == Approx(2.0 / 3));
  CHECK(f1_score(ids({2}), ids({0, 1})) == 0.0);
  CHECK(f1_score(ids({}), ids({})) == 1.0);
  CHECK(f1_score(ids({}), ids({0})) == 0.0);
  CHECK(f1_score(ids({0}), ids({})) == 0.0);
}

TEST_CASE("mean f1 over images") {
  auto map = index_conditionings(std::vector<Conditioning>{make_cond("a", {0, 1, 1}), make_cond("b", {2})});
  std::vector<ScenePrediction> preds{{"a", 0, ids({0, 1})}, {"b", 0, ids({0})}, {"a", 1, ids({0})}};
  CHECK(mean_f1(preds, map) == Approx((1.0 + 0.0 + 2.0 / 3) / 3));
  preds.push_back({"zzz", 0, ids({})});
  CHECK_THROWS_AS(mean_f1(preds, map), ValidationError);
  CHECK_THROWS_AS(mean_f1(std::vector<ScenePrediction>{}, map), ValidationError);
}

TEST_CASE("accuracy") {
  std::vector<ObjectPrediction> preds{obj(0, 0), obj(1, 1), obj(1, 1), obj(0, 1)};
  auto r = object_accuracy(preds);
  CHECK(r.acc_instance == 0.75);
  // class 0: 1/1, class 1: 2/3
  CHECK(r.acc_class_balanced == Approx((1.0 + 2.0 / 3) / 2));
  CHECK(r.n == 4);
  CHECK_THROWS_AS(object_accuracy(std::vector<ObjectPrediction>{}), ValidationError);
}

TEST_CASE("prediction loaders") {
  TempDir dir("preds");
  auto classes = make_classes({"cat", "dog"});
  {
    std::ofstream f(dir / "scene.jsonl");
    f << R"({"conditioning_id":"a","seed":3,"labels":["cat","dog"]})" << "\n";
    f << R"({"conditioning_id":"b","seed":0,"labels":[]})" << "\n";
    std::ofstream o(dir / "obj.jsonl");
    o << R"({"conditioning_id":"a","seed":1,"label":"dog","object_class":"cat"})" << "\n";
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"conditioning_id":"a","seed":1,"label":"cow","object_class":"cat"})" << "\n";
  }
  auto scene = load_scene_predictions(dir / "scene.jsonl", classes);
  REQUIRE(scene.size() == 2);
  CHECK(scene[0].seed == 3);
  CHECK(scene[0].labels == ids({0, 1}));
  CHECK(scene[1].labels.empty());
  auto objs = load_object_predictions(dir / "obj.jsonl", classes);
  REQUIRE(objs.size() == 1);
  CHECK(objs[0].predicted == ClassId{1});
  CHECK(objs[0].truth == ClassId{0});
  CHECK_THROWS_WITH_AS(load_object_predictions(dir / "bad.jsonl", classes), Contains("unknown class"),
                       ValidationError);
}

TEST_CASE("top-k classes") {
  std::vector<Conditioning> conds{make_cond("a", {2, 2, 1}), make_cond("b", {0, 1, 3}), make_cond("c", {3})};
  // counts: 0:1, 1:2, 2:2, 3:2
  auto top = top_k_classes(conds, 2);
  CHECK(top.classes == std::vector<ClassId>{ClassId{1}, ClassId{2}});
  CHECK_FALSE(top.truncated);
  auto all = top_k_classes(conds, 10);
  CHECK(all.classes.size() == 4);
  CHECK(all.truncated);
  CHECK(all.classes.back() == ClassId{0});
  CHECK_THROWS_AS(top_k_classes(conds, 0), ValidationError);
  CHECK(kLongTailHeadSize == 25);

  auto crops = make_set(1, {{0}, {1}, {2}}, {object_record("a", 4), object_record("a", 4), object_record("b", 1)});
  CHECK(top_k_classes(crops, 1).classes == std::vector<ClassId>{ClassId{4}});
}

TEST_CASE("per-class report equals filter then compute") {
  std::mt19937_64 rng(77);
  auto conds = random_conditionings(rng, 10, 4, 3, "c");
  auto map = index_conditionings(conds);
  auto base_real = random_set(rng, 60, 3, Kind::real);
  auto base_gen = random_set(rng, 60, 3, Kind::generated, 1, 1.2f, 0.2f);
  std::vector<EmbeddingRecord> rr, gr;
  for (std::size_t i = 0; i < 60; ++i) {
    auto r = object_record("c" + std::to_string(i % 10), static_cast<std::uint32_t>(rng() % 3));
    rr.push_back(r);
    auto g = object_record("c" + std::to_string(i % 10), static_cast<std::uint32_t>(rng() % 4), 1);
    g.kind = Kind::generated;
    gr.push_back(g);
  }
  auto real = with_records(base_real, rr);
  auto gen = with_records(base_gen, gr);
  auto rm = compute_radii(real, real, 3);
  auto gm = compute_radii(gen, gen, 3);
  std::vector<ClassId> filter_ids{ClassId{0}, ClassId{1}, ClassId{2}, ClassId{3}};
  auto report = per_class_report(real, gen, rm, gm, map, filter_ids);

  // class 3 has no real rows
  CHECK(report.count(ClassId{3}) == 0);
  for (std::uint32_t c = 0; c < 3; ++c) {
    REQUIRE(report.count(ClassId{c}) == 1);
    const auto& m = report.at(ClassId{c});
    auto of_class = [&](const EmbeddingRecord& r) { return r.object_class == ClassId{c}; };
    auto rc = filter(real, of_class);
    auto gc = filter(gen, of_class);
    CHECK(m.precision == oracle::inside_fraction(gc, real, rm.radii()));
    CHECK(m.recall == oracle::inside_fraction(rc, gen, gm.radii()));
    CHECK(m.consistency == Approx(oracle::consistency(gc, real, rm.radii(), map)).epsilon(1e-12));
    CHECK(m.n_real == rc.size());
    CHECK(m.n_generated == gc.size());
  }

  auto scene = random_set(rng, 5, 3, Kind::real);
  CHECK_THROWS_AS(per_class_report(scene, gen, rm, gm, map, filter_ids), ValidationError);
}
