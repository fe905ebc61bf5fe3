#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/manifold.hpp"
#include "scene_eval/parallel.hpp"

using namespace scene_eval;
using namespace scene_eval::testing;
using doctest::Contains;

namespace {

std::vector<std::optional<std::size_t>> identity_rows(std::size_t n) {
  std::vector<std::optional<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

// Applies x -> R x + t with R a random orthogonal matrix (Gram-Schmidt).
EmbeddingSet rigid_transform(const EmbeddingSet& s, const std::vector<double>& rot,
                             const std::vector<double>& shift) {
  const std::size_t d = s.dim();
  std::vector<float> out(s.vectors().size());
  for (std::size_t r = 0; r < s.size(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      double v = shift[i];
      for (std::size_t j = 0; j < d; ++j) v += rot[i * d + j] * s.row(r)[j];
      out[r * d + i] = static_cast<float>(v);
    }
  }
  return EmbeddingSet(d, std::move(out), s.records());
}

std::vector<double> random_orthogonal(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal;
  std::vector<double> q(d * d);
  for (auto& v : q) v = normal(rng);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += q[i * d + k] * q[j * d + k];
      for (std::size_t k = 0; k < d; ++k) q[i * d + k] -= dot * q[j * d + k];
    }
    double norm = 0;
    for (std::size_t k = 0; k < d; ++k) norm += q[i * d + k] * q[i * d + k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) q[i * d + k] /= norm;
  }
  return q;
}

}  // namespace

TEST_CASE("k defaults to 5") { CHECK(kDefaultNeighbors == 5); }

TEST_CASE("collinear radii") {
  auto pts = make_set(1, {{0}, {1}, {3}}, {scene_record("a"), scene_record("b"), scene_record("c")});
  auto m = compute_radii(pts, pts, 1);
  CHECK(m.radii() == std::vector<double>{1, 1, 2});
  auto m2 = compute_radii(pts, pts, 2);
  CHECK(m2.radii() == std::vector<double>{3, 2, 3});
}

TEST_CASE("radii against a disjoint pool count every pool row") {
  auto targets = make_set(1, {{0}}, {scene_record("t")});
  auto pool = make_set(1, {{1}, {-2}, {4}}, {scene_record("a"), scene_record("b"), scene_record("c")});
  CHECK(compute_radii(targets, pool, 1).radii() == std::vector<double>{1});
  CHECK(compute_radii(targets, pool, 3).radii() == std::vector<double>{4});
  CHECK_THROWS_WITH_AS(compute_radii(targets, pool, 4), Contains("pool too small"), ValidationError);
}

TEST_CASE("subset targets exclude themselves from the pool") {
  auto pool = make_set(1, {{0}, {1}, {3}, {10}},
                       {scene_record("a"), scene_record("b"), scene_record("c"), scene_record("d")});
  auto targets = make_set(1, {{1}, {10}}, {scene_record("b"), scene_record("d")});
  auto m = compute_radii(targets, pool, 1);
  CHECK(m.radii() == std::vector<double>{1, 7});
  // same vector but a different record is not the same row
  auto stranger = make_set(1, {{1}}, {scene_record("zzz")});
  CHECK(compute_radii(stranger, pool, 1).radii() == std::vector<double>{0});
  // overlap needs k+1 rows
  auto small = make_set(1, {{0}, {1}}, {scene_record("a"), scene_record("b")});
  CHECK_NOTHROW(compute_radii(small, small, 1));
  CHECK_THROWS_AS(compute_radii(small, small, 2), ValidationError);
}

TEST_CASE("duplicate rows each claim a distinct pool row") {
  auto pool = make_set(1, {{2}, {2}, {5}}, {scene_record("a"), scene_record("a"), scene_record("b")});
  auto m = compute_radii(pool, pool, 1);
  CHECK(m.radii() == std::vector<double>{0, 0, 3});
}

TEST_CASE("dimension mismatch") {
  auto a = make_set(2, {{0, 0}, {1, 1}}, {scene_record("a"), scene_record("b")});
  auto b = make_set(3, {{0, 0, 0}}, {scene_record("a")});
  CHECK_THROWS_WITH_AS(compute_radii(a, b, 1), Contains("dimension mismatch"), ValidationError);
  auto m = compute_radii(a, a, 1);
  std::vector<float> q{0, 0, 0};
  CHECK_THROWS_AS(membership(q, m), ValidationError);
  CHECK_THROWS_AS(precision(b, m), ValidationError);
}

TEST_CASE("radii match the brute-force oracle on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = random_set(rng, 50, 8, Kind::real);
    auto m = compute_radii(pts, pts, 5);
    CHECK(m.radii() == oracle::radii(pts, pts, 5, identity_rows(50)));
  }
}

TEST_CASE("radii are identical for any thread count") {
  std::mt19937_64 rng(7);
  auto pts = random_set(rng, 300, 6, Kind::real);
  set_thread_count(1);
  auto one = compute_radii(pts, pts, 3).radii();
  for (std::size_t t : {2u, 5u, 16u}) {
    set_thread_count(t);
    CHECK(compute_radii(pts, pts, 3).radii() == one);
  }
  set_thread_count(0);
}

TEST_CASE("membership") {
  auto pts = make_set(1, {{0}, {1}, {3}}, {scene_record("a"), scene_record("b"), scene_record("c")});
  auto m = compute_radii(pts, pts, 1);  // radii 1, 1, 2

  std::vector<float> on_point{3};
  auto r = membership(on_point, m);
  CHECK(r.inside);
  CHECK(r.nearest_covering_ref == std::size_t{2});

  std::vector<float> far{100};
  r = membership(far, m);
  CHECK_FALSE(r.inside);
  CHECK_FALSE(r.nearest_covering_ref);

  // 0.5 is equidistant from points 0 and 1: lowest index wins
  std::vector<float> mid{0.5f};
  r = membership(mid, m);
  CHECK(r.nearest_covering_ref == std::size_t{0});

  // boundary is inclusive: 5 is exactly r=2 from point 2
  std::vector<float> edge{5};
  CHECK(membership(edge, m).inside);
}

TEST_CASE("membership matches exhaustive sphere checks") {
  std::mt19937_64 rng(99);
  auto pts = random_set(rng, 20, 3, Kind::real);
  auto m = compute_radii(pts, pts, 2);
  auto queries = random_set(rng, 100, 3, Kind::generated, 1, 1.3f);
  auto results = memberships(queries, m);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto expect = oracle::membership(queries, q, pts, m.radii());
    CHECK(results[q].inside == expect.inside);
    CHECK(results[q].nearest_covering_ref == expect.ref);
  }
}

TEST_CASE("precision and recall") {
  std::mt19937_64 rng(3);
  auto real = random_set(rng, 200, 4, Kind::real);
  auto gen = random_set(rng, 200, 4, Kind::generated, 1, 1.2f, 0.3f);
  auto real_m = compute_radii(real, real, 5);
  auto gen_m = compute_radii(gen, gen, 5);

  CHECK(precision(gen, real_m) == oracle::inside_fraction(gen, real, real_m.radii()));
  CHECK(recall(real, gen_m) == oracle::inside_fraction(real, gen, gen_m.radii()));

  // self-coverage
  CHECK(precision(real, real_m) == 1.0);
  CHECK(recall(gen, gen_m) == 1.0);

  // far away
  auto far = random_set(rng, 50, 4, Kind::generated, 1, 1.0f, 1000.0f);
  CHECK(precision(far, real_m) == 0.0);
  CHECK(recall(real, compute_radii(far, far, 5)) == 0.0);

  EmbeddingSet empty(4, {}, {});
  CHECK_THROWS_WITH_AS(precision(empty, real_m), Contains("empty"), ValidationError);
}

TEST_CASE("zero radius still covers a coincident point") {
  std::vector<std::vector<float>> rows(8, std::vector<float>{1.0f, 2.0f});
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 8; ++i) recs.push_back(scene_record("c" + std::to_string(i)));
  auto dup = make_set(2, rows, recs);
  auto m = compute_radii(dup, dup, 5);
  for (double r : m.radii()) CHECK(r == 0.0);
  CHECK(precision(dup, m) == 1.0);
}

TEST_CASE("precision/recall invariant under rigid motion") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 5;
    auto real = random_set(rng, 80, d, Kind::real);
    auto gen = random_set(rng, 80, d, Kind::generated, 1, 1.1f, 0.2f);
    auto rot = random_orthogonal(rng, d);
    std::vector<double> shift(d);
    for (auto& s : shift) s = std::normal_distribution<double>(0, 3)(rng);
    auto real_t = rigid_transform(real, rot, shift);
    auto gen_t = rigid_transform(gen, rot, shift);
    const double p = precision(gen, compute_radii(real, real, 5));
    const double p_t = precision(gen_t, compute_radii(real_t, real_t, 5));
    const double r = recall(real, compute_radii(gen, gen, 5));
    const double r_t = recall(real_t, compute_radii(gen_t, gen_t, 5));
    // boundary points can flip under float re-association; allow one row
    CHECK(std::abs(p - p_t) <= 1.0 / 80 + 1e-5);
    CHECK(std::abs(r - r_t) <= 1.0 / 80 + 1e-5);
  }
}

TEST_CASE("consistency") {
  std::vector<Conditioning> conds{make_cond("ab", {0, 1}), make_cond("bc", {1, 2}),
                                  make_cond("ab2", {1, 0, 0})};
  auto map = index_conditionings(conds);

  SUBCASE("identical sets and conditionings give 1") {
    auto real = make_set(1, {{0}, {1}, {2}}, {scene_record("ab"), scene_record("ab2"), scene_record("ab")});
    auto gen = with_records(real, {scene_record("ab", 1), scene_record("ab2", 1), scene_record("ab", 1)});
    auto m = compute_radii(real, real, 1);
    CHECK(consistency(gen, m, map) == 1.0);
  }
  SUBCASE("IoU of {a,b} and {b,c} is 1/3") {
    auto real = make_set(1, {{0}, {10}}, {scene_record("ab"), scene_record("ab")});
    auto gen = make_set(1, {{0}}, {scene_record("bc", 1)});
    auto m = compute_radii(real, real, 1);
    CHECK(consistency(gen, m, map) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("outside rows contribute 0") {
    auto real = make_set(1, {{0}, {1}}, {scene_record("ab"), scene_record("ab")});
    auto gen = make_set(1, {{100}, {0}}, {scene_record("ab", 1), scene_record("ab", 1)});
    auto m = compute_radii(real, real, 1);
    CHECK(consistency(gen, m, map) == 0.5);
    auto all_out = make_set(1, {{100}, {200}}, {scene_record("ab", 1), scene_record("ab", 1)});
    CHECK(consistency(all_out, m, map) == 0.0);
  }
  SUBCASE("unresolvable conditioning id") {
    auto real = make_set(1, {{0}, {1}}, {scene_record("ab"), scene_record("ab")});
    auto gen = make_set(1, {{100}}, {scene_record("nope", 1)});
    auto m = compute_radii(real, real, 1);
    CHECK_THROWS_WITH_AS(consistency(gen, m, map), Contains("unresolvable"), ValidationError);
  }
}

TEST_CASE("consistency matches the oracle and never exceeds precision") {
  std::mt19937_64 rng(41);
  auto conds = random_conditionings(rng, 30, 5, 4, "c");
  auto map = index_conditionings(conds);
  for (int trial = 0; trial < 10; ++trial) {
    auto real = random_set(rng, 30, 3, Kind::real);
    auto gen = random_set(rng, 40, 3, Kind::generated, 2, 1.3f, 0.4f);
    std::vector<EmbeddingRecord> gr;
    for (std::size_t i = 0; i < gen.size(); ++i) gr.push_back(scene_record("c" + std::to_string(rng() % 30), 2));
    gen = with_records(gen, gr);
    auto m = compute_radii(real, real, 3);
    auto s = coverage_scores(gen, m, map);
    CHECK(s.consistency == doctest::Approx(oracle::consistency(gen, real, m.radii(), map)).epsilon(1e-12));
    CHECK(s.precision == precision(gen, m));
    CHECK(s.consistency <= s.precision);
    CHECK(s.consistency >= 0.0);
  }
}

TEST_CASE("permuting manifold points leaves consistency unchanged without ties") {
  std::mt19937_64 rng(8);
  auto conds = random_conditionings(rng, 25, 4, 3, "c");
  auto map = index_conditionings(conds);
  auto real = random_set(rng, 25, 4, Kind::real);
  auto gen = random_set(rng, 30, 4, Kind::generated, 1);
  std::vector<EmbeddingRecord> gr;
  for (std::size_t i = 0; i < gen.size(); ++i) gr.push_back(scene_record("c" + std::to_string(i % 25), 1));
  gen = with_records(gen, gr);

  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<float>> rows;
  std::vector<EmbeddingRecord> recs;
  for (auto p : perm) {
    rows.emplace_back(real.row(p).begin(), real.row(p).end());
    recs.push_back(real.record(p));
  }
  auto permuted = make_set(4, rows, recs);
  CHECK(consistency(gen, compute_radii(real, real, 3), map) ==
        consistency(gen, compute_radii(permuted, permuted, 3), map));
}
