#include "scene_eval/diversity.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "io_util.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/manifold.hpp"

namespace scene_eval {

using nlohmann::json;

void PairwiseDistanceTable::add(std::string conditioning_id, std::uint32_t seed_a,
                                std::uint32_t seed_b, double distance) {
  if (seed_a == seed_b) {
    throw ValidationError("self-pair for conditioning '" + conditioning_id + "', seed " +
                          std::to_string(seed_a));
  }
  if (!std::isfinite(distance) || distance < 0.0) {
    throw ValidationError("negative or non-finite distance for conditioning '" + conditioning_id + "'");
  }
  if (seed_a > seed_b) std::swap(seed_a, seed_b);
  Key key{std::move(conditioning_id), seed_a, seed_b};
  if (!entries_.emplace(key, distance).second) {
    throw ValidationError("duplicate pair for conditioning '" + std::get<0>(key) + "'");
  }
}

PairwiseDistanceTable load_distance_table(const std::filesystem::path& path) {
  PairwiseDistanceTable table;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    auto id = detail::field<std::string>(obj, "conditioning_id", path, line);
    auto si = detail::field<std::int64_t>(obj, "seed_i", path, line);
    auto sj = detail::field<std::int64_t>(obj, "seed_j", path, line);
    auto d = detail::field<double>(obj, "distance", path, line);
    if (si < 0 || sj < 0) detail::fail_line(path, line, "negative seed");
    try {
      table.add(std::move(id), static_cast<std::uint32_t>(si), static_cast<std::uint32_t>(sj), d);
    } catch (const ValidationError& e) {
      detail::fail_line(path, line, e.what());
    }
  });
  return table;
}

void save_distance_table(const PairwiseDistanceTable& table, const std::filesystem::path& path) {
  std::string text;
  for (const auto& [key, d] : table.entries()) {
    json obj{{"conditioning_id", std::get<0>(key)},
             {"seed_i", std::get<1>(key)},
             {"seed_j", std::get<2>(key)},
             {"distance", d}};
    text += obj.dump();
    text += '\n';
  }
  detail::write_text(path, text);
}

std::string_view to_string(DsMode mode) {
  return mode == DsMode::lpips_table ? "lpips_table" : "embedding_euclidean";
}

namespace {

// Per-conditioning mean distances in sorted conditioning order.
DiversityScore summarize(const std::map<std::string, std::vector<double>>& groups, DsMode mode) {
  if (groups.empty()) throw ValidationError("diversity: no conditionings");
  std::vector<double> means;
  means.reserve(groups.size());
  for (const auto& [id, dists] : groups) {
    if (dists.empty()) {
      throw ValidationError("diversity: conditioning '" + id + "' has fewer than 2 seeds");
    }
    double s = 0.0;
    for (double d : dists) s += d;
    means.push_back(s / static_cast<double>(dists.size()));
  }
  double total = 0.0;
  for (double m : means) total += m;
  const double mean = total / static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(means.size());
  return {mean, std::sqrt(var), means.size(), mode};
}

}  // namespace

DiversityScore ds_from_table(const PairwiseDistanceTable& table) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [key, d] : table.entries()) groups[std::get<0>(key)].push_back(d);
  return summarize(groups, DsMode::lpips_table);
}

DiversityScore ds_from_embeddings(const EmbeddingSet& generated) {
  // conditioning -> seed -> row
  std::map<std::string, std::map<std::uint32_t, std::size_t>> rows;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const auto& r = generated.record(i);
    if (!rows[r.conditioning_id].emplace(r.seed, i).second) {
      throw ValidationError("diversity: conditioning '" + r.conditioning_id + "' has seed " +
                            std::to_string(r.seed) + " more than once");
    }
  }
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [id, by_seed] : rows) {
    auto& dists = groups[id];
    for (auto a = by_seed.begin(); a != by_seed.end(); ++a) {
      for (auto b = std::next(a); b != by_seed.end(); ++b) {
        dists.push_back(euclidean_distance(generated.row(a->second), generated.row(b->second)));
      }
    }
  }
  return summarize(groups, DsMode::embedding_euclidean);
}

}  // namespace scene_eval
