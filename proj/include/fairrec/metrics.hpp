#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/model.hpp"

namespace fairrec {

// Final top-K lists, one per user (indexed by dense user id). Lists may be
// shorter than k when a user has fewer than k eligible items.
struct RecommendationSet {
  std::vector<std::vector<ScoredItem>> lists;
  int k = 0;
};

// Base-2 Jensen-Shannon divergence between two tier distributions, with
// 0 * log 0 := 0. Symmetric, bounded in [0, 1].
double jsd(const GroupDistribution& p, const GroupDistribution& q);

// Tier shares of one recommendation list.
GroupDistribution list_group_shares(std::span<const ScoredItem> list,
                                    const PopularityGrouping& grouping);

// Per-user tier shares for every non-empty list; empty lists yield (0,0,0).
std::vector<GroupDistribution> per_group_hit_shares(const RecommendationSet& recs,
                                                    const PopularityGrouping& grouping);

// User Popularity Deviation: mean JSD between each user's training-profile
// distribution and their recommendation-list distribution. Users without a
// training profile or without recommendations are skipped.
double upd(const RecommendationSet& recs, const InteractionDataset& train,
           const PopularityGrouping& grouping);

// Fraction of the catalog recommended to at least one user.
double aggregate_diversity(const RecommendationSet& recs, std::uint32_t num_items);

// Gini index of a non-negative vector by the sorted-index formula. 0 for a
// uniform (or all-zero) vector, (n-1)/n for a one-hot vector.
double gini(const Eigen::Ref<const Eigen::VectorXd>& values);

// 1 - Gini of position-discounted exposure over all items: an appearance at
// rank k is worth 1 / (1 + log2 k); items never recommended count as zero.
double equality_of_exposure(const RecommendationSet& recs, std::uint32_t num_items);

// Binary-relevance nDCG with the 1/log2(k+1) discount; the ideal list places
// min(K, |test profile|) hits up front. Mean over users with non-empty test
// profiles.
double ndcg_at_k(const RecommendationSet& recs, const InteractionDataset& test, int k);

struct MetricsReport {
  double ndcg = 0.0;
  double upd = 0.0;
  double ad = 0.0;
  double ee = 0.0;
  std::size_t users_evaluated = 0;  // users with a non-empty recommendation list
};

MetricsReport evaluate_all(const RecommendationSet& recs, const InteractionDataset& train,
                           const InteractionDataset& test, const PopularityGrouping& grouping);

// CSV row product: method,params,ndcg,upd,ad,ee (one header, one row each).
void write_metrics_csv(const std::string& path, const std::string& method,
                       const std::string& params, const MetricsReport& report);
void append_metrics_row(std::ostream& os, const std::string& method, const std::string& params,
                        const MetricsReport& report);

// Recommendation dump with columns user_id,rank,item_id,score (raw ids).
void write_recommendations_csv(const std::string& path, const RecommendationSet& recs,
                               const InteractionDataset& ds);
RecommendationSet read_recommendations_csv(const std::string& path, const InteractionDataset& ds);

}  // namespace fairrec
