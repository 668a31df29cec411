#include "fairrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "fairrec/csv.hpp"

namespace fairrec {

double jsd(const GroupDistribution& p, const GroupDistribution& q) {
  auto kl_term = [](double a, double mix) { return a > 0.0 ? a * std::log2(a / mix) : 0.0; };
  double acc = 0.0;
  for (const Group g : {Group::Head, Group::Mid, Group::Tail}) {
    const double a = p.share(g);
    const double b = q.share(g);
    const double mix = 0.5 * (a + b);
    acc += 0.5 * kl_term(a, mix) + 0.5 * kl_term(b, mix);
  }
  return std::clamp(acc, 0.0, 1.0);
}

GroupDistribution list_group_shares(std::span<const ScoredItem> list,
                                    const PopularityGrouping& grouping) {
  if (list.empty()) throw std::invalid_argument("cannot take tier shares of an empty list");
  std::array<std::size_t, kNumGroups> hits{};
  for (const auto& entry : list) ++hits[static_cast<int>(grouping.group_of(entry.item))];
  const auto total = static_cast<double>(list.size());
  return {static_cast<double>(hits[0]) / total, static_cast<double>(hits[1]) / total,
          static_cast<double>(hits[2]) / total};
}

std::vector<GroupDistribution> per_group_hit_shares(const RecommendationSet& recs,
                                                    const PopularityGrouping& grouping) {
  std::vector<GroupDistribution> out(recs.lists.size());
  for (std::size_t u = 0; u < recs.lists.size(); ++u) {
    if (!recs.lists[u].empty()) out[u] = list_group_shares(recs.lists[u], grouping);
  }
  return out;
}

double upd(const RecommendationSet& recs, const InteractionDataset& train,
           const PopularityGrouping& grouping) {
  double acc = 0.0;
  std::size_t users = 0;
  for (std::uint32_t u = 0; u < recs.lists.size(); ++u) {
    if (recs.lists[u].empty() || train.items_of(u).empty()) continue;
    acc += jsd(profile_distribution(u, train, grouping),
               list_group_shares(recs.lists[u], grouping));
    ++users;
  }
  return users > 0 ? acc / static_cast<double>(users) : 0.0;
}

double aggregate_diversity(const RecommendationSet& recs, std::uint32_t num_items) {
  if (num_items == 0) throw std::invalid_argument("num_items must be > 0");
  std::vector<char> seen(num_items, 0);
  std::size_t distinct = 0;
  for (const auto& list : recs.lists) {
    for (const auto& entry : list) {
      if (!seen[entry.item]) {
        seen[entry.item] = 1;
        ++distinct;
      }
    }
  }
  return static_cast<double>(distinct) / static_cast<double>(num_items);
}

double gini(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto n = static_cast<std::size_t>(values.size());
  if (n == 0) throw std::invalid_argument("gini of an empty vector");
  std::vector<double> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += sorted[i];
    acc += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * sorted[i];
  }
  if (total == 0.0) return 0.0;  // no exposure at all is a uniform distribution
  return acc / (static_cast<double>(n) * total);
}

double equality_of_exposure(const RecommendationSet& recs, std::uint32_t num_items) {
  if (num_items == 0) throw std::invalid_argument("num_items must be > 0");
  Eigen::VectorXd exposure = Eigen::VectorXd::Zero(num_items);
  for (const auto& list : recs.lists) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      const auto rank = static_cast<double>(r + 1);
      exposure[list[r].item] += 1.0 / (1.0 + std::log2(rank));
    }
  }
  return 1.0 - gini(exposure);
}

double ndcg_at_k(const RecommendationSet& recs, const InteractionDataset& test, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  double acc = 0.0;
  std::size_t users = 0;
  for (std::uint32_t u = 0; u < recs.lists.size(); ++u) {
    const auto test_items = test.items_of(u);
    if (test_items.empty()) continue;
    const auto& list = recs.lists[u];
    double dcg = 0.0;
    for (std::size_t r = 0; r < list.size(); ++r) {
      if (test.has_interaction(u, list[r].item)) {
        dcg += 1.0 / std::log2(static_cast<double>(r + 2));
      }
    }
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), test_items.size());
    double idcg = 0.0;
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r + 2));
    acc += idcg > 0.0 ? dcg / idcg : 0.0;
    ++users;
  }
  return users > 0 ? acc / static_cast<double>(users) : 0.0;
}

MetricsReport evaluate_all(const RecommendationSet& recs, const InteractionDataset& train,
                           const InteractionDataset& test, const PopularityGrouping& grouping) {
  MetricsReport report;
  report.ndcg = ndcg_at_k(recs, test, recs.k);
  report.upd = upd(recs, train, grouping);
  report.ad = aggregate_diversity(recs, train.num_items());
  report.ee = equality_of_exposure(recs, train.num_items());
  for (const auto& list : recs.lists) {
    if (!list.empty()) ++report.users_evaluated;
  }
  return report;
}

void append_metrics_row(std::ostream& os, const std::string& method, const std::string& params,
                        const MetricsReport& report) {
  csv::write_row(os, {method, params, csv::format_double(report.ndcg),
                      csv::format_double(report.upd), csv::format_double(report.ad),
                      csv::format_double(report.ee)});
}

void write_metrics_csv(const std::string& path, const std::string& method,
                       const std::string& params, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics CSV: " + path);
  csv::write_row(out, {"method", "params", "ndcg", "upd", "ad", "ee"});
  append_metrics_row(out, method, params, report);
}

void write_recommendations_csv(const std::string& path, const RecommendationSet& recs,
                               const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write recommendation dump: " + path);
  csv::write_row(out, {"user_id", "rank", "item_id", "score"});
  for (std::uint32_t u = 0; u < recs.lists.size(); ++u) {
    const auto& list = recs.lists[u];
    for (std::size_t r = 0; r < list.size(); ++r) {
      csv::write_row(out, {ds.user_id(u), std::to_string(r + 1), ds.item_id(list[r].item),
                           csv::format_double(list[r].score)});
    }
  }
}

RecommendationSet read_recommendations_csv(const std::string& path,
                                           const InteractionDataset& ds) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() != 4) {
    throw std::runtime_error("malformed recommendation dump: " + path);
  }
  RecommendationSet recs;
  recs.lists.resize(ds.num_users());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 4) throw std::runtime_error("malformed recommendation row in " + path);
    const auto user = ds.find_user(f[0]);
    const auto item = ds.find_item(f[2]);
    if (!user || !item) {
      throw std::runtime_error("unknown user or item id in " + path + ": " + f[0] + "," + f[2]);
    }
    const auto rank = static_cast<std::size_t>(csv::parse_int(f[1]));
    auto& list = recs.lists[*user];
    if (rank != list.size() + 1) {
      throw std::runtime_error("non-contiguous ranks for user " + f[0] + " in " + path);
    }
    list.push_back({*item, csv::parse_double(f[3])});
    recs.k = std::max(recs.k, static_cast<int>(list.size()));
  }
  return recs;
}

}  // namespace fairrec
