#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairrec {

// Popularity tiers: Head = top 20% of items by training interaction count,
// Tail = bottom 20%, Mid = the rest.
enum class Group : std::uint8_t { Head = 0, Mid = 1, Tail = 2 };
inline constexpr int kNumGroups = 3;

const char* group_name(Group g);

struct Interaction {
  std::uint32_t user;
  std::uint32_t item;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Implicit-feedback matrix R in {0,1}^{n x m}, stored as the deduplicated set
// of observed (user, item) pairs with a per-user CSR view. Indices are dense;
// raw external ids are kept so output files can name the original entities.
//
// Immutable after construction; all accessors are safe to call concurrently.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  // `pairs` may arrive unsorted and with duplicates; they are canonicalized to
  // (user, item) order with duplicates collapsed. The id vectors define the
  // universes: n = user_ids.size(), m = item_ids.size().
  InteractionDataset(std::vector<Interaction> pairs, std::vector<std::string> user_ids,
                     std::vector<std::string> item_ids);

  std::uint32_t num_users() const { return n_; }
  std::uint32_t num_items() const { return m_; }
  std::size_t num_interactions() const { return pairs_.size(); }

  const std::vector<Interaction>& interactions() const { return pairs_; }

  // Items of one user, ascending.
  std::span<const std::uint32_t> items_of(std::uint32_t user) const;
  bool has_interaction(std::uint32_t user, std::uint32_t item) const;

  const std::string& user_id(std::uint32_t u) const { return user_ids_[u]; }
  const std::string& item_id(std::uint32_t i) const { return item_ids_[i]; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  std::optional<std::uint32_t> find_user(const std::string& raw_id) const;
  std::optional<std::uint32_t> find_item(const std::string& raw_id) const;

 private:
  std::uint32_t n_ = 0;
  std::uint32_t m_ = 0;
  std::vector<Interaction> pairs_;       // sorted by (user, item), unique
  std::vector<std::uint32_t> offsets_;   // n_+1 offsets into pairs_/items_flat_
  std::vector<std::uint32_t> items_flat_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, std::uint32_t> user_index_;
  std::unordered_map<std::string, std::uint32_t> item_index_;
};

enum class DatasetFormat {
  Auto,     // infer from the field count of the first data line
  Pairs,    // user item
  Triples,  // user item rating [timestamp]; ratings are binarized
};

enum class Delimiter { Auto, Whitespace, Comma, Tab, DoubleColon };

DatasetFormat parse_dataset_format(const std::string& name);
Delimiter parse_delimiter(const std::string& name);

// Reads one interaction per line; lines starting with '#' are ignored. All
// observed ratings are treated as positive implicit feedback. Throws on
// unreadable files, malformed lines (with the line number) and empty datasets.
InteractionDataset load_interactions(const std::string& path,
                                     DatasetFormat format = DatasetFormat::Auto,
                                     Delimiter delimiter = Delimiter::Auto);

void write_interactions(const std::string& path, const InteractionDataset& ds);

struct SplitDataset {
  InteractionDataset train;
  InteractionDataset test;  // may be empty (e.g. all profiles of size 1)
  std::uint64_t split_seed = 0;
};

// Per-user random partition. Each profile keeps ceil(train_ratio * size)
// interactions in train (rounding toward the training side); profiles of size
// 1 stay entirely in train. Deterministic given the seed.
SplitDataset split_train_test(const InteractionDataset& ds, double train_ratio,
                              std::uint64_t seed);

// Item -> {Head, Mid, Tail} assignment from training interaction counts.
// Items are ranked by (count desc, item index asc); the first ceil(0.2*m) are
// Head, the last floor(0.2*m) are Tail. Zero-count items are still grouped.
class PopularityGrouping {
 public:
  static PopularityGrouping from_counts(std::vector<std::uint32_t> counts);

  Group group_of(std::uint32_t item) const { return group_[item]; }
  std::uint32_t count(std::uint32_t item) const { return counts_[item]; }
  std::size_t size(Group g) const { return sizes_[static_cast<int>(g)]; }
  std::uint32_t num_items() const { return static_cast<std::uint32_t>(group_.size()); }

  // {count at the Head/Mid edge, count at the Mid/Tail edge}.
  const std::array<std::uint32_t, 2>& boundaries() const { return boundaries_; }

 private:
  std::vector<std::uint32_t> counts_;
  std::vector<Group> group_;
  std::array<std::size_t, kNumGroups> sizes_{};
  std::array<std::uint32_t, 2> boundaries_{};
};

PopularityGrouping assign_popularity_groups(const InteractionDataset& train);

// Fractions of a profile (or list) falling into each tier. Sums to 1.
struct GroupDistribution {
  double head = 0.0;
  double mid = 0.0;
  double tail = 0.0;

  double share(Group g) const {
    switch (g) {
      case Group::Head: return head;
      case Group::Mid: return mid;
      default: return tail;
    }
  }
};

// Tier distribution of the user's interacted items. Throws if the profile is
// empty, signaling the caller to skip the user.
GroupDistribution profile_distribution(std::uint32_t user, const InteractionDataset& interactions,
                                       const PopularityGrouping& grouping);

// CSV dump with columns item_id,count,group.
void write_grouping_csv(const std::string& path, const PopularityGrouping& grouping,
                        const InteractionDataset& ds);

}  // namespace fairrec
