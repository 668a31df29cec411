#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/model.hpp"
#include "fairrec/trainer.hpp"

namespace fairrec {

// Inverse-propensity weights for loss re-weighting. Propensity follows the
// item's popularity: p_i = (count_i / max_count)^gamma floored at 1/m. The
// weights 1/p_i are clipped at clip_cap, then rescaled so their mean over the
// training interactions is exactly 1 (the rescale only shrinks, so the cap
// still holds).
struct PropensityTable {
  std::vector<double> propensity;  // p_i
  std::vector<double> weight;      // normalized, clipped 1/p_i
  double gamma = 1.0;
  double clip_cap = 30.0;
};

PropensityTable build_propensities(const PopularityGrouping& grouping, double gamma,
                                   double clip_cap);

// Identical to train_epoch with the equalization term off, except each pair's
// loss gradient is additionally scaled by the positive item's IPS weight.
TraceRow ips_train_epoch(FactorModel& model, const InteractionDataset& train,
                         const PopularityGrouping& grouping, const TrainConfig& cfg,
                         const PropensityTable& propensities, int epoch, Rng& rng,
                         TrainWorkspace& ws);

// Per-item model uncertainty: the population standard deviation, over an
// ensemble of independently seeded training runs, of each item's mean
// predicted score across all users.
struct UncertaintyTable {
  std::vector<double> uncertainty;          // u_i >= 0
  std::vector<std::uint64_t> seeds_used;    // exactly 5 distinct seeds
};

// Mean predicted score of every item over all users of one model.
std::vector<double> mean_item_scores(const FactorModel& model);

UncertaintyTable uncertainty_from_models(std::span<const FactorModel> models,
                                         std::span<const std::uint64_t> seeds);

// Trains one plain pairwise-ranking model per seed, then aggregates.
UncertaintyTable estimate_uncertainty(const InteractionDataset& train,
                                      const PopularityGrouping& grouping, const TrainConfig& cfg,
                                      std::span<const std::uint64_t> seeds);

// Calibrated-popularity greedy re-ranking: selects K of the N long-list
// candidates, at each step maximizing
//   (1 - lambda) * rel(c) - lambda * JSD(profile, shares(list + c))
// where rel is the min-max normalized score within the long list. Ties keep
// the candidate with the better original rank.
std::vector<ScoredItem> cp_rerank(std::span<const ScoredItem> long_list,
                                  const GroupDistribution& profile,
                                  const PopularityGrouping& grouping, double lambda, int k);

// Uncertainty-based score adjustment: Tail items gain lambda * u_i, Head
// items lose lambda * u_i, Mid items keep their raw score; the top K by
// adjusted score (ties toward the lower item index) are returned with their
// adjusted scores.
std::vector<ScoredItem> pufr_rerank(std::span<const ScoredItem> scored,
                                    const UncertaintyTable& uncertainty,
                                    const PopularityGrouping& grouping, double lambda, int k);

// item_id,value CSV used to cache both tables across experiments.
void write_item_values_csv(const std::string& path, std::span<const double> values,
                           const InteractionDataset& ds);
std::vector<double> read_item_values_csv(const std::string& path, const InteractionDataset& ds);

}  // namespace fairrec
