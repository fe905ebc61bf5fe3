#include "scene_eval/splits.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_set>

#include "io_util.hpp"
#include "rng.hpp"
#include "scene_eval/errors.hpp"
#include "scene_eval/parallel.hpp"

namespace scene_eval {

using nlohmann::json;

std::string_view to_string(SplitName split) {
  switch (split) {
    case SplitName::seen: return "seen";
    case SplitName::unseen_fg: return "unseen_fg";
    case SplitName::unseen_coarse: return "unseen_coarse";
    case SplitName::validation: return "validation";
  }
  return "?";
}

std::optional<SplitName> parse_split_name(std::string_view text) {
  for (auto s : {SplitName::seen, SplitName::unseen_fg, SplitName::unseen_coarse,
                 SplitName::validation}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

void SplitAssignment::assign(const std::string& conditioning_id, SplitName split) {
  entries_[conditioning_id] = split;
}

std::optional<SplitName> SplitAssignment::find(const std::string& conditioning_id) const {
  auto it = entries_.find(conditioning_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SplitAssignment::members(SplitName split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : entries_) {
    if (s == split) out.push_back(id);
  }
  return out;
}

std::size_t SplitAssignment::count(SplitName split) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [split](const auto& e) { return e.second == split; }));
}

SplitAssignment load_split_assignment(const std::filesystem::path& path) {
  json doc = detail::read_json(path);
  if (!doc.is_object()) throw ValidationError(path.string() + ": split file must be a JSON object");
  SplitAssignment out;
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_string()) throw ValidationError(path.string() + ": split of '" + id + "' must be a string");
    auto split = parse_split_name(value.get<std::string>());
    if (!split) {
      throw ValidationError(path.string() + ": unknown split name '" + value.get<std::string>() + "'");
    }
    out.assign(id, *split);
  }
  return out;
}

void save_split_assignment(const SplitAssignment& split, const std::filesystem::path& path) {
  json doc = json::object();
  for (const auto& [id, s] : split.entries()) doc[id] = to_string(s);
  detail::write_text(path, doc.dump(2) + "\n");
}

SplitAssignment partition(std::span<const Conditioning> train_conds,
                          std::span<const Conditioning> eval_conds, std::size_t validation_size,
                          std::uint64_t rng_seed) {
  SplitAssignment out;
  std::set<ClassSet> seen_coarse;
  std::unordered_set<std::string> train_ids;
  for (const auto& c : train_conds) {
    if (!train_ids.insert(c.id()).second) {
      throw ValidationError("duplicate training conditioning id '" + c.id() + "'");
    }
    seen_coarse.insert(c.coarse());
    out.assign(c.id(), SplitName::seen);
  }

  std::unordered_set<std::string> eval_ids;
  std::vector<const Conditioning*> seen_combination;
  for (const auto& c : eval_conds) {
    if (train_ids.count(c.id())) {
      throw ValidationError("conditioning '" + c.id() + "' is in both training and evaluation sets");
    }
    if (!eval_ids.insert(c.id()).second) {
      throw ValidationError("duplicate evaluation conditioning id '" + c.id() + "'");
    }
    if (seen_coarse.count(c.coarse())) {
      seen_combination.push_back(&c);
    } else {
      out.assign(c.id(), SplitName::unseen_coarse);
    }
  }

  if (validation_size > seen_combination.size()) {
    throw ValidationError("validation_size " + std::to_string(validation_size) + " exceeds the " +
                          std::to_string(seen_combination.size()) +
                          " evaluation conditionings with seen coarse sets");
  }

  // Partial Fisher-Yates: the first validation_size slots are the draw.
  std::vector<std::size_t> order(seen_combination.size());
  std::iota(order.begin(), order.end(), 0);
  detail::SeededRng rng(rng_seed);
  for (std::size_t i = 0; i < validation_size; ++i) {
    const std::size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.assign(seen_combination[order[i]]->id(),
               i < validation_size ? SplitName::validation : SplitName::unseen_fg);
  }
  return out;
}

std::vector<std::string> validate_split(const SplitAssignment& split,
                                        std::span<const Conditioning> train_conds,
                                        std::span<const Conditioning> eval_conds) {
  std::vector<std::string> problems;
  std::set<ClassSet> train_sets;
  std::set<std::string> train_ids;
  for (const auto& c : train_conds) {
    train_sets.insert(c.coarse());
    train_ids.insert(c.id());
  }
  std::set<std::string> known = train_ids;

  for (const auto& c : train_conds) {
    auto s = split.find(c.id());
    if (!s) {
      problems.push_back("training conditioning '" + c.id() + "' is unassigned");
    } else if (*s != SplitName::seen) {
      problems.push_back("training conditioning '" + c.id() + "' is not in seen");
    }
  }
  for (const auto& c : eval_conds) {
    known.insert(c.id());
    auto s = split.find(c.id());
    if (!s) {
      problems.push_back("evaluation conditioning '" + c.id() + "' is unassigned");
      continue;
    }
    if (train_ids.count(c.id())) {
      problems.push_back("conditioning '" + c.id() + "' appears in training and evaluation");
    }
    const bool combination_seen = train_sets.count(c.coarse()) > 0;
    switch (*s) {
      case SplitName::seen:
        problems.push_back("evaluation conditioning '" + c.id() + "' is marked seen");
        break;
      case SplitName::unseen_coarse:
        if (combination_seen) {
          problems.push_back("unseen_coarse conditioning '" + c.id() +
                             "' has a coarse set that occurs in seen");
        }
        break;
      case SplitName::unseen_fg:
      case SplitName::validation:
        if (!combination_seen) {
          problems.push_back(std::string(to_string(*s)) + " conditioning '" + c.id() +
                             "' has a coarse set that never occurs in seen");
        }
        break;
    }
  }
  for (const auto& [id, s] : split.entries()) {
    if (!known.count(id)) problems.push_back("assignment for unknown conditioning '" + id + "'");
  }
  return problems;
}

std::optional<CountMode> parse_count_mode(std::string_view text) {
  if (text == "instances") return CountMode::instances;
  if (text == "images") return CountMode::images;
  return std::nullopt;
}

void ClassHistogram::add(ClassId cls, std::uint64_t n) {
  if (n == 0) return;
  counts[cls] += n;
  total += n;
}

std::uint64_t ClassHistogram::count(ClassId cls) const {
  auto it = counts.find(cls);
  return it == counts.end() ? 0 : it->second;
}

ClassHistogram& ClassHistogram::operator+=(const ClassHistogram& other) {
  for (const auto& [cls, n] : other.counts) add(cls, n);
  return *this;
}

ClassHistogram operator+(ClassHistogram a, const ClassHistogram& b) {
  a += b;
  return a;
}

namespace {

ClassHistogram histogram_of(const Conditioning& c, CountMode mode) {
  ClassHistogram h;
  if (mode == CountMode::instances) {
    for (const auto& inst : c.instances()) h.add(inst.cls);
  } else {
    for (const auto& cls : c.coarse()) h.add(cls);
  }
  return h;
}

}  // namespace

ClassHistogram class_histogram(std::span<const Conditioning> conds, CountMode mode) {
  ClassHistogram h;
  for (const auto& c : conds) h += histogram_of(c, mode);
  return h;
}

LongTailFraction long_tail_fraction(const ClassHistogram& hist, std::span<const ClassId> head) {
  if (hist.total == 0) throw ValidationError("long_tail_fraction: empty histogram");
  LongTailFraction out;
  std::set<ClassId> unique_head(head.begin(), head.end());
  std::uint64_t head_count = 0;
  for (const auto& cls : unique_head) {
    auto it = hist.counts.find(cls);
    if (it == hist.counts.end()) {
      out.unknown_head.push_back(cls);
    } else {
      head_count += it->second;
    }
  }
  out.fraction = static_cast<double>(hist.total - head_count) / static_cast<double>(hist.total);
  return out;
}

double histogram_l1(const ClassHistogram& a, const ClassHistogram& b) {
  if (a.total == 0 || b.total == 0) throw ValidationError("histogram_l1: empty histogram");
  std::set<ClassId> classes;
  for (const auto& [c, _] : a.counts) classes.insert(c);
  for (const auto& [c, _] : b.counts) classes.insert(c);
  double l1 = 0.0;
  for (const auto& c : classes) {
    l1 += std::abs(static_cast<double>(a.count(c)) / static_cast<double>(a.total) -
                   static_cast<double>(b.count(c)) / static_cast<double>(b.total));
  }
  return l1;
}

namespace {

__extension__ typedef __int128 Wide;

// Upper bound on pair-exchange trial evaluations (times class count) per pass.
constexpr double kPairSwapBudget = 5e7;

// L1 between running/R and target/T, kept as the exact fraction num / (R * T).
struct Score {
  Wide num = 0;
  Wide running_total = 0;

  bool less_than(const Score& o) const { return num * o.running_total < o.num * running_total; }
  bool equals(const Score& o) const { return num * o.running_total == o.num * running_total; }
};

}  // namespace

MatchedSubsample subsample_matched(std::span<const Conditioning> source,
                                   const ClassHistogram& target_hist, std::size_t size,
                                   std::uint64_t rng_seed, CountMode mode, bool refine) {
  if (size > source.size()) {
    throw ValidationError("subsample size " + std::to_string(size) + " exceeds source size " +
                          std::to_string(source.size()));
  }
  if (target_hist.total == 0) throw ValidationError("subsample target histogram is empty");

  // Dense class universe: target classes plus every class in the source.
  std::map<ClassId, std::size_t> dense;
  for (const auto& [c, _] : target_hist.counts) dense.emplace(c, 0);
  std::vector<ClassHistogram> item_hist;
  item_hist.reserve(source.size());
  for (const auto& c : source) {
    item_hist.push_back(histogram_of(c, mode));
    for (const auto& [cls, _] : item_hist.back().counts) dense.emplace(cls, 0);
  }
  std::size_t next = 0;
  for (auto& [_, idx] : dense) idx = next++;
  const std::size_t width = dense.size();

  std::vector<Wide> target(width, 0);
  for (const auto& [c, n] : target_hist.counts) target[dense.at(c)] = static_cast<Wide>(n);
  const Wide target_total = static_cast<Wide>(target_hist.total);

  std::vector<std::vector<std::pair<std::size_t, Wide>>> items(source.size());
  std::vector<Wide> item_total(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    for (const auto& [c, n] : item_hist[i].counts) items[i].emplace_back(dense.at(c), static_cast<Wide>(n));
    item_total[i] = static_cast<Wide>(item_hist[i].total);
  }

  auto score_of = [&](const std::vector<Wide>& counts, Wide total) {
    Wide num = 0;
    for (std::size_t d = 0; d < width; ++d) {
      const Wide diff = counts[d] * target_total - target[d] * total;
      num += diff < 0 ? -diff : diff;
    }
    return Score{num, total};
  };

  std::vector<Wide> running(width, 0);
  Wide running_total = 0;
  std::vector<bool> taken(source.size(), false);
  std::vector<std::size_t> chosen;
  std::vector<Score> scores(source.size());
  detail::SeededRng rng(rng_seed);
  MatchedSubsample out;
  Score current;

  for (std::size_t step = 0; step < size; ++step) {
    parallel_for_chunks(source.size(), [&](std::size_t begin, std::size_t end) {
      std::vector<Wide> trial(width);
      for (std::size_t i = begin; i < end; ++i) {
        if (taken[i]) continue;
        trial = running;
        for (const auto& [d, n] : items[i]) trial[d] += n;
        scores[i] = score_of(trial, running_total + item_total[i]);
      }
    });

    std::vector<std::size_t> best;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (taken[i]) continue;
      if (best.empty() || scores[i].less_than(scores[best.front()])) {
        best.assign(1, i);
      } else if (scores[i].equals(scores[best.front()])) {
        best.push_back(i);
      }
    }
    const std::size_t pick = best.size() == 1 ? best.front() : best[rng.below(best.size())];
    taken[pick] = true;
    for (const auto& [d, n] : items[pick]) running[d] += n;
    running_total += item_total[pick];
    current = scores[pick];
    chosen.push_back(pick);
  }

  auto as_double = [&](const Score& s) {
    return static_cast<double>(static_cast<long double>(s.num) /
                               (static_cast<long double>(s.running_total) *
                                static_cast<long double>(target_total)));
  };
  if (chosen.empty()) {
    out.final_l1 = out.greedy_l1 = 1.0;
    return out;
  }
  out.greedy_l1 = as_double(current);

  // Swap pass. Each accepted move strictly lowers an integer-valued fraction
  // with bounded denominator, so it terminates; the cap only guards runtime.
  // Single swaps come first; a pair-for-pair exchange is tried only when they
  // stall and the neighbourhood fits the work budget.
  struct Move {
    Score score;
    std::size_t out[2] = {0, 0};
    std::size_t in[2] = {0, 0};
    int width = 0;  // 0 = none found
  };
  auto better = [&](const Score& s, const Move& m) {
    return s.less_than(current) && (m.width == 0 || s.less_than(m.score));
  };
  auto apply = [&](const Move& m) {
    for (int k = 0; k < m.width; ++k) {
      const std::size_t old_item = chosen[m.out[k]];
      const std::size_t new_item = m.in[k];
      for (const auto& [d, n] : items[old_item]) running[d] -= n;
      for (const auto& [d, n] : items[new_item]) running[d] += n;
      running_total += item_total[new_item] - item_total[old_item];
      taken[old_item] = false;
      taken[new_item] = true;
      chosen[m.out[k]] = new_item;
    }
    current = m.score;
    ++out.swaps;
  };
  auto pick_best = [](const std::vector<Move>& moves) {
    const Move* best = nullptr;
    for (const auto& m : moves) {
      if (m.width && (!best || m.score.less_than(best->score))) best = &m;
    }
    return best;
  };

  const std::size_t max_swaps = refine ? 4 * size + 16 : 0;
  const std::size_t free_count = source.size() - chosen.size();
  const double pair_work = 0.25 * static_cast<double>(chosen.size()) * static_cast<double>(chosen.size()) *
                           static_cast<double>(free_count) * static_cast<double>(free_count) *
                           static_cast<double>(width);
  const bool pairs_allowed = pair_work <= kPairSwapBudget;

  while (out.swaps < max_swaps && current.num != 0) {
    std::vector<Move> per_slot(chosen.size());
    parallel_for_chunks(chosen.size(), [&](std::size_t begin, std::size_t end) {
      std::vector<Wide> trial(width);
      for (std::size_t slot = begin; slot < end; ++slot) {
        const std::size_t out_item = chosen[slot];
        Move b;
        for (std::size_t q = 0; q < source.size(); ++q) {
          if (taken[q]) continue;
          trial = running;
          for (const auto& [d, n] : items[out_item]) trial[d] -= n;
          for (const auto& [d, n] : items[q]) trial[d] += n;
          const Wide total = running_total - item_total[out_item] + item_total[q];
          if (total == 0) continue;
          const Score sc = score_of(trial, total);
          if (better(sc, b)) b = {sc, {slot, 0}, {q, 0}, 1};
        }
        per_slot[slot] = b;
      }
    });
    if (const Move* m = pick_best(per_slot)) {
      apply(*m);
      continue;
    }
    if (!pairs_allowed) break;

    std::vector<std::size_t> free_items;
    for (std::size_t q = 0; q < source.size(); ++q) {
      if (!taken[q]) free_items.push_back(q);
    }
    std::vector<Move> per_first(chosen.size());
    parallel_for_chunks(chosen.size(), [&](std::size_t begin, std::size_t end) {
      std::vector<Wide> trial(width);
      for (std::size_t s1 = begin; s1 < end; ++s1) {
        Move b;
        for (std::size_t s2 = s1 + 1; s2 < chosen.size(); ++s2) {
          for (std::size_t a = 0; a < free_items.size(); ++a) {
            for (std::size_t c = a + 1; c < free_items.size(); ++c) {
              const std::size_t q1 = free_items[a], q2 = free_items[c];
              trial = running;
              for (std::size_t o : {chosen[s1], chosen[s2]}) {
                for (const auto& [d, n] : items[o]) trial[d] -= n;
              }
              for (std::size_t q : {q1, q2}) {
                for (const auto& [d, n] : items[q]) trial[d] += n;
              }
              const Wide total = running_total - item_total[chosen[s1]] - item_total[chosen[s2]] +
                                 item_total[q1] + item_total[q2];
              if (total == 0) continue;
              const Score sc = score_of(trial, total);
              if (better(sc, b)) b = {sc, {s1, s2}, {q1, q2}, 2};
            }
          }
        }
        per_first[s1] = b;
      }
    });
    const Move* m = pick_best(per_first);
    if (!m) break;
    apply(*m);
  }

  for (std::size_t i : chosen) out.ids.push_back(source[i].id());
  out.final_l1 = as_double(current);
  return out;
}

std::vector<Conditioning> crop_pseudo_conditionings(const EmbeddingSet& crops) {
  std::vector<Conditioning> out;
  out.reserve(crops.size());
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const auto& r = crops.record(i);
    if (!r.object_class) throw ValidationError("crop row " + std::to_string(i) + " has no object_class");
    out.emplace_back(r.conditioning_id + "#" + std::to_string(i),
                     std::vector<ObjectInstance>{{*r.object_class, Box{0, 0, 1, 1}}});
  }
  return out;
}

}  // namespace scene_eval
