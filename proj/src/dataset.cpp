#include "fairrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fairrec/csv.hpp"
#include "fairrec/rng.hpp"

namespace fairrec {

const char* group_name(Group g) {
  switch (g) {
    case Group::Head: return "H";
    case Group::Mid: return "M";
    default: return "T";
  }
}

InteractionDataset::InteractionDataset(std::vector<Interaction> pairs,
                                       std::vector<std::string> user_ids,
                                       std::vector<std::string> item_ids)
    : n_(static_cast<std::uint32_t>(user_ids.size())),
      m_(static_cast<std::uint32_t>(item_ids.size())),
      pairs_(std::move(pairs)),
      user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)) {
  if (n_ == 0 || m_ == 0) throw std::invalid_argument("dataset needs at least one user and item");
  for (const auto& p : pairs_) {
    if (p.user >= n_ || p.item >= m_) throw std::invalid_argument("interaction index out of range");
  }
  std::sort(pairs_.begin(), pairs_.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());

  offsets_.assign(n_ + 1, 0);
  items_flat_.resize(pairs_.size());
  for (const auto& p : pairs_) ++offsets_[p.user + 1];
  for (std::uint32_t u = 0; u < n_; ++u) offsets_[u + 1] += offsets_[u];
  for (std::size_t k = 0; k < pairs_.size(); ++k) items_flat_[k] = pairs_[k].item;

  user_index_.reserve(n_);
  item_index_.reserve(m_);
  for (std::uint32_t u = 0; u < n_; ++u) user_index_.emplace(user_ids_[u], u);
  for (std::uint32_t i = 0; i < m_; ++i) item_index_.emplace(item_ids_[i], i);
}

std::span<const std::uint32_t> InteractionDataset::items_of(std::uint32_t user) const {
  return {items_flat_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

bool InteractionDataset::has_interaction(std::uint32_t user, std::uint32_t item) const {
  const auto items = items_of(user);
  return std::binary_search(items.begin(), items.end(), item);
}

std::optional<std::uint32_t> InteractionDataset::find_user(const std::string& raw_id) const {
  const auto it = user_index_.find(raw_id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> InteractionDataset::find_item(const std::string& raw_id) const {
  const auto it = item_index_.find(raw_id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "auto") return DatasetFormat::Auto;
  if (name == "pairs") return DatasetFormat::Pairs;
  if (name == "triples") return DatasetFormat::Triples;
  throw std::invalid_argument("unknown dataset format: " + name);
}

Delimiter parse_delimiter(const std::string& name) {
  if (name == "auto") return Delimiter::Auto;
  if (name == "space" || name == "whitespace") return Delimiter::Whitespace;
  if (name == "comma") return Delimiter::Comma;
  if (name == "tab") return Delimiter::Tab;
  if (name == "double-colon" || name == "::") return Delimiter::DoubleColon;
  throw std::invalid_argument("unknown delimiter: " + name);
}

namespace {

std::vector<std::string> tokenize(const std::string& line, Delimiter delim) {
  std::vector<std::string> fields;
  if (delim == Delimiter::Whitespace) {
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      if (end > pos) fields.push_back(line.substr(pos, end - pos));
      pos = end;
    }
    return fields;
  }
  const std::string sep = delim == Delimiter::Comma  ? ","
                          : delim == Delimiter::Tab  ? "\t"
                                                     : "::";
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return fields;
}

Delimiter detect_delimiter(const std::string& line) {
  if (line.find("::") != std::string::npos) return Delimiter::DoubleColon;
  if (line.find('\t') != std::string::npos) return Delimiter::Tab;
  if (line.find(',') != std::string::npos) return Delimiter::Comma;
  return Delimiter::Whitespace;
}

bool parses_as_double(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

}  // namespace

InteractionDataset load_interactions(const std::string& path, DatasetFormat format,
                                     Delimiter delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::vector<Interaction> pairs;
  std::vector<std::string> user_ids, item_ids;
  std::unordered_map<std::string, std::uint32_t> user_index, item_index;

  auto intern = [](const std::string& raw, std::unordered_map<std::string, std::uint32_t>& index,
                   std::vector<std::string>& ids) {
    const auto [it, inserted] = index.emplace(raw, static_cast<std::uint32_t>(ids.size()));
    if (inserted) ids.push_back(raw);
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    if (delimiter == Delimiter::Auto) delimiter = detect_delimiter(line);
    const auto fields = tokenize(line, delimiter);

    if (expected_fields == 0) {
      expected_fields = fields.size();
      if (format == DatasetFormat::Pairs && expected_fields != 2) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected 2 fields for pairs format");
      }
      if (format == DatasetFormat::Triples && expected_fields != 3 && expected_fields != 4) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected 3 or 4 fields for triples format");
      }
      if (expected_fields < 2 || expected_fields > 4) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected 2-4 fields, got " + std::to_string(fields.size()));
      }
    }
    if (fields.size() != expected_fields) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(expected_fields) + " fields, got " +
                               std::to_string(fields.size()));
    }
    // Ratings are binarized, but a non-numeric rating field usually means the
    // delimiter guess was wrong; reject it with the line number.
    if (expected_fields >= 3 && !parses_as_double(fields[2])) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": rating field is not numeric: '" + fields[2] + "'");
    }
    const std::uint32_t u = intern(fields[0], user_index, user_ids);
    const std::uint32_t i = intern(fields[1], item_index, item_ids);
    pairs.push_back({u, i});
  }

  if (pairs.empty()) throw std::runtime_error("empty dataset: " + path);
  return InteractionDataset(std::move(pairs), std::move(user_ids), std::move(item_ids));
}

void write_interactions(const std::string& path, const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& p : ds.interactions()) {
    out << ds.user_id(p.user) << '\t' << ds.item_id(p.item) << '\n';
  }
}

SplitDataset split_train_test(const InteractionDataset& ds, double train_ratio,
                              std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw std::invalid_argument("train_ratio must be in (0, 1)");
  }
  Rng rng(mix_seed(seed, kSplitStream));
  std::vector<Interaction> train_pairs, test_pairs;
  train_pairs.reserve(ds.num_interactions());

  std::vector<std::uint32_t> profile;
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    const auto items = ds.items_of(u);
    if (items.empty()) continue;
    if (items.size() == 1) {
      train_pairs.push_back({u, items[0]});
      continue;
    }
    profile.assign(items.begin(), items.end());
    rng.shuffle(std::span<std::uint32_t>(profile));
    // Test side rounds down (the epsilon absorbs FP dust in ratio * count),
    // so the training side keeps the remainder.
    const auto test_count =
        static_cast<std::size_t>(std::floor((1.0 - train_ratio) * static_cast<double>(profile.size()) + 1e-9));
    const std::size_t train_count = profile.size() - test_count;
    for (std::size_t k = 0; k < profile.size(); ++k) {
      (k < train_count ? train_pairs : test_pairs).push_back({u, profile[k]});
    }
  }

  SplitDataset split;
  split.train = InteractionDataset(std::move(train_pairs), ds.user_ids(), ds.item_ids());
  split.test = InteractionDataset(std::move(test_pairs), ds.user_ids(), ds.item_ids());
  split.split_seed = seed;
  return split;
}

PopularityGrouping PopularityGrouping::from_counts(std::vector<std::uint32_t> counts) {
  const std::size_t m = counts.size();
  if (m == 0) throw std::invalid_argument("cannot group an empty catalog");

  std::vector<std::uint32_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
  });

  // 20% quantiles in exact integer arithmetic: |Head| = ceil(m/5), |Tail| = floor(m/5).
  const std::size_t head_size = (m + 4) / 5;
  const std::size_t tail_size = m / 5;

  PopularityGrouping g;
  g.counts_ = std::move(counts);
  g.group_.assign(m, Group::Mid);
  for (std::size_t r = 0; r < m; ++r) {
    if (r < head_size) {
      g.group_[order[r]] = Group::Head;
    } else if (r >= m - tail_size) {
      g.group_[order[r]] = Group::Tail;
    }
  }
  g.sizes_ = {head_size, m - head_size - tail_size, tail_size};
  g.boundaries_[0] = g.counts_[order[head_size - 1]];
  const std::size_t last_mid = m - tail_size;  // one past the Mid range
  g.boundaries_[1] = last_mid > head_size ? g.counts_[order[last_mid - 1]] : g.boundaries_[0];
  return g;
}

PopularityGrouping assign_popularity_groups(const InteractionDataset& train) {
  if (train.num_interactions() == 0) {
    throw std::invalid_argument("cannot derive popularity groups from an empty training set");
  }
  std::vector<std::uint32_t> counts(train.num_items(), 0);
  for (const auto& p : train.interactions()) ++counts[p.item];
  return PopularityGrouping::from_counts(std::move(counts));
}

GroupDistribution profile_distribution(std::uint32_t user, const InteractionDataset& interactions,
                                       const PopularityGrouping& grouping) {
  const auto items = interactions.items_of(user);
  if (items.empty()) {
    throw std::runtime_error("user " + std::to_string(user) +
                             " has an empty profile; caller must skip this user");
  }
  std::array<std::size_t, kNumGroups> hits{};
  for (const auto item : items) ++hits[static_cast<int>(grouping.group_of(item))];
  const auto total = static_cast<double>(items.size());
  return {static_cast<double>(hits[0]) / total, static_cast<double>(hits[1]) / total,
          static_cast<double>(hits[2]) / total};
}

void write_grouping_csv(const std::string& path, const PopularityGrouping& grouping,
                        const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grouping CSV: " + path);
  csv::write_row(out, {"item_id", "count", "group"});
  for (std::uint32_t i = 0; i < grouping.num_items(); ++i) {
    csv::write_row(out, {ds.item_id(i), std::to_string(grouping.count(i)),
                         group_name(grouping.group_of(i))});
  }
}

}  // namespace fairrec
