#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scene_eval/diversity.hpp"
#include "scene_eval/splits.hpp"
#include "scene_eval/store.hpp"

namespace scene_eval {

std::string toolkit_version();

struct MetricSummary {
  double mean = 0;
  double std = 0;  // population
  std::vector<double> per_seed;
};

/// Mean and population std of each list. Lists must share one non-zero length.
std::map<std::string, MetricSummary> aggregate(
    const std::map<std::string, std::vector<double>>& per_seed_values);

struct Provenance {
  int k = 5;
  std::string embedding_source;
  std::size_t n_real = 0;
  std::size_t n_generated = 0;
  std::string ds_mode;
  std::string toolkit_version;
  std::map<std::string, std::string> input_digests;  // path -> sha256
};

struct DiversitySummary {
  double mean = 0;
  double std = 0;
  std::size_t conditionings = 0;
  std::string mode;
};

struct MetricReport {
  std::string split;  // S_s, S_u, S_u2 or custom
  Granularity granularity = Granularity::scene;
  std::vector<std::uint32_t> seeds;
  std::map<std::string, MetricSummary> metrics;
  std::optional<DiversitySummary> diversity;
  // class name -> metric name -> summary
  std::map<std::string, std::map<std::string, MetricSummary>> per_class;
  std::vector<std::string> warnings;
  Provenance provenance;
};

struct EmbeddingPaths {
  std::filesystem::path matrix;
  std::filesystem::path metadata;
};

/// Evaluation config. Relative paths are resolved against the config file's
/// directory by load_panel_config().
struct PanelConfig {
  std::filesystem::path classes;
  std::filesystem::path conditionings;
  std::filesystem::path splits;
  int k = 5;
  std::string embedding_source = "unspecified";
  std::optional<EmbeddingPaths> scene_real;
  std::optional<EmbeddingPaths> scene_generated;
  std::optional<EmbeddingPaths> object_real;
  std::optional<EmbeddingPaths> object_generated;
  std::optional<std::filesystem::path> scene_predictions;
  std::optional<std::filesystem::path> object_predictions;
  std::optional<std::filesystem::path> ds_table;
  std::size_t per_class_top = 10;
};

PanelConfig load_panel_config(const std::filesystem::path& path);

struct Panel {
  std::vector<MetricReport> reports;
};

/// Every (split x granularity) cell with real and generated rows. Real
/// manifolds take their radii from the pooled real set over all splits
/// (validation included); generated manifolds pool all generated rows of the
/// same seed.
Panel run_panel(const PanelConfig& config);

std::string report_to_json(const MetricReport& report);
std::string panel_to_json(const Panel& panel);
/// One row per (split, granularity, metric, seed).
std::string panel_to_csv(const Panel& panel);

/// Writes report_<split>_<granularity>.json, panel.json and panel.csv.
void write_panel(const Panel& panel, const std::filesystem::path& out_dir);

/// Mean/std per (split, granularity, metric) from a panel.json, as CSV.
std::string plot_data_csv(const std::filesystem::path& panel_json);

}  // namespace scene_eval
