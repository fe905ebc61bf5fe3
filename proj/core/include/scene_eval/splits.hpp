#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scene_eval/store.hpp"

namespace scene_eval {

/// Classes outside the 25 most frequent ones form the long tail.
inline constexpr std::size_t kLongTailHeadSize = 25;

enum class SplitName { seen, unseen_fg, unseen_coarse, validation };

std::string_view to_string(SplitName split);
std::optional<SplitName> parse_split_name(std::string_view text);

class SplitAssignment {
 public:
  void assign(const std::string& conditioning_id, SplitName split);
  std::optional<SplitName> find(const std::string& conditioning_id) const;
  const std::map<std::string, SplitName>& entries() const { return entries_; }
  std::vector<std::string> members(SplitName split) const;
  std::size_t count(SplitName split) const;

 private:
  std::map<std::string, SplitName> entries_;
};

/// JSON object {conditioning_id: split_name}.
SplitAssignment load_split_assignment(const std::filesystem::path& path);
void save_split_assignment(const SplitAssignment& split, const std::filesystem::path& path);

/// Training layouts become `seen`. Evaluation layouts whose coarse set never
/// occurs in training become `unseen_coarse`. From the rest, a seeded uniform
/// draw of `validation_size` goes to `validation` and the remainder to
/// `unseen_fg`.
SplitAssignment partition(std::span<const Conditioning> train_conds,
                          std::span<const Conditioning> eval_conds,
                          std::size_t validation_size, std::uint64_t rng_seed);

/// Independent post-hoc check of a partition. Returns human-readable
/// violations; empty means valid.
std::vector<std::string> validate_split(const SplitAssignment& split,
                                        std::span<const Conditioning> train_conds,
                                        std::span<const Conditioning> eval_conds);

enum class CountMode { instances, images };
std::optional<CountMode> parse_count_mode(std::string_view text);

struct ClassHistogram {
  std::map<ClassId, std::uint64_t> counts;
  std::uint64_t total = 0;

  void add(ClassId cls, std::uint64_t n = 1);
  std::uint64_t count(ClassId cls) const;
  ClassHistogram& operator+=(const ClassHistogram& other);
  bool operator==(const ClassHistogram&) const = default;
};

ClassHistogram operator+(ClassHistogram a, const ClassHistogram& b);

/// `instances` counts every object instance; `images` counts each class once
/// per conditioning.
ClassHistogram class_histogram(std::span<const Conditioning> conds,
                               CountMode mode = CountMode::instances);

struct LongTailFraction {
  double fraction = 0;
  std::vector<ClassId> unknown_head;  // head classes absent from the histogram
};

/// (total - sum of head counts) / total.
LongTailFraction long_tail_fraction(const ClassHistogram& hist, std::span<const ClassId> head);

/// Sum over classes of |a_c / |a| - b_c / |b||. Both histograms must be non-empty.
double histogram_l1(const ClassHistogram& a, const ClassHistogram& b);

struct MatchedSubsample {
  std::vector<std::string> ids;  // selection order; a swap replaces in place
  double final_l1 = 0;
  double greedy_l1 = 0;  // before the swap pass
  std::size_t swaps = 0;
};

/// Greedy selection of `size` source conditionings. Each step adds the
/// candidate that minimizes the L1 distance between the normalized running
/// histogram and the normalized target. Ties are broken by a seeded uniform
/// draw among the minimizers.
///
/// With `refine`, a swap pass follows: while some (selected, unselected) swap
/// strictly lowers the L1, the best such swap is applied (first pair in
/// selection/source order on ties). When no single swap helps, the best
/// two-for-two exchange is tried, if the neighbourhood is small enough to
/// scan. Plain greedy can lock itself out of an exact match early on.
MatchedSubsample subsample_matched(std::span<const Conditioning> source,
                                   const ClassHistogram& target_hist, std::size_t size,
                                   std::uint64_t rng_seed,
                                   CountMode mode = CountMode::instances, bool refine = true);

/// One single-instance conditioning per object crop row, with id
/// "<conditioning_id>#<row>", for matching at the object level. Boxes are
/// the full unit square.
std::vector<Conditioning> crop_pseudo_conditionings(const EmbeddingSet& crops);

}  // namespace scene_eval
