#include "fairrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fairrec/csv.hpp"
#include "fairrec/metrics.hpp"

namespace fairrec {

PropensityTable build_propensities(const PopularityGrouping& grouping, double gamma,
                                   double clip_cap) {
  if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  if (!(clip_cap > 0.0)) throw std::invalid_argument("clip_cap must be > 0");
  const std::uint32_t m = grouping.num_items();

  std::uint32_t max_count = 0;
  for (std::uint32_t i = 0; i < m; ++i) max_count = std::max(max_count, grouping.count(i));
  if (max_count == 0) throw std::runtime_error("all item counts are zero");

  PropensityTable table;
  table.gamma = gamma;
  table.clip_cap = clip_cap;
  table.propensity.resize(m);
  table.weight.resize(m);

  const double floor = 1.0 / static_cast<double>(m);
  double weighted_sum = 0.0;
  double count_sum = 0.0;
  for (std::uint32_t i = 0; i < m; ++i) {
    const double rel = static_cast<double>(grouping.count(i)) / static_cast<double>(max_count);
    table.propensity[i] = std::max(std::pow(rel, gamma), floor);
    table.weight[i] = std::min(1.0 / table.propensity[i], clip_cap);
    weighted_sum += static_cast<double>(grouping.count(i)) * table.weight[i];
    count_sum += static_cast<double>(grouping.count(i));
  }
  // Interaction-weighted mean 1. weight >= 1 before the rescale, so the
  // factor is <= 1 and the cap survives.
  const double scale = count_sum / weighted_sum;
  for (auto& w : table.weight) w *= scale;
  return table;
}

TraceRow ips_train_epoch(FactorModel& model, const InteractionDataset& train,
                         const PopularityGrouping& grouping, const TrainConfig& cfg,
                         const PropensityTable& propensities, int epoch, Rng& rng,
                         TrainWorkspace& ws) {
  const IleConfig plain;  // equalization off
  return train_epoch(model, train, grouping, cfg, plain, epoch, rng, ws, &propensities.weight);
}

std::vector<double> mean_item_scores(const FactorModel& model) {
  // (1/n) sum_u p_u . q_i  ==  q_i . mean_user_row
  const Eigen::RowVectorXd mean_user = model.user_factors.colwise().mean();
  const Eigen::VectorXd scores = model.item_factors * mean_user.transpose();
  return {scores.data(), scores.data() + scores.size()};
}

UncertaintyTable uncertainty_from_models(std::span<const FactorModel> models,
                                         std::span<const std::uint64_t> seeds) {
  if (models.size() != 5 || seeds.size() != 5) {
    throw std::invalid_argument("uncertainty estimation takes exactly 5 models and seeds");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != 5) {
    throw std::invalid_argument("uncertainty seeds must be distinct");
  }
  const std::uint32_t m = models[0].num_items();
  for (const auto& model : models) {
    if (model.num_items() != m) throw std::invalid_argument("uncertainty models disagree on m");
  }

  std::vector<std::vector<double>> means;
  means.reserve(models.size());
  for (const auto& model : models) means.push_back(mean_item_scores(model));

  UncertaintyTable table;
  table.seeds_used.assign(seeds.begin(), seeds.end());
  table.uncertainty.resize(m);
  const auto runs = static_cast<double>(models.size());
  for (std::uint32_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (const auto& v : means) mu += v[i];
    mu /= runs;
    double ss = 0.0;
    for (const auto& v : means) ss += (v[i] - mu) * (v[i] - mu);
    table.uncertainty[i] = std::sqrt(ss / runs);  // population std over the ensemble
  }
  return table;
}

UncertaintyTable estimate_uncertainty(const InteractionDataset& train,
                                      const PopularityGrouping& grouping, const TrainConfig& cfg,
                                      std::span<const std::uint64_t> seeds) {
  if (seeds.size() != 5) throw std::invalid_argument("uncertainty estimation needs 5 seeds");
  std::vector<FactorModel> models;
  models.reserve(seeds.size());
  const IleConfig plain;
  for (const auto seed : seeds) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    FactorModel model = init_model(run_cfg, train.num_users(), train.num_items());
    train_model(model, train, grouping, run_cfg, plain);
    models.push_back(std::move(model));
  }
  return uncertainty_from_models(models, seeds);
}

std::vector<ScoredItem> cp_rerank(std::span<const ScoredItem> long_list,
                                  const GroupDistribution& profile,
                                  const PopularityGrouping& grouping, double lambda, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (long_list.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("long list is shorter than k");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("cp lambda must be in [0,1]");

  double smin = long_list[0].score, smax = long_list[0].score;
  for (const auto& c : long_list) {
    smin = std::min(smin, c.score);
    smax = std::max(smax, c.score);
  }
  const double range = smax - smin;
  auto rel = [&](const ScoredItem& c) { return range > 0.0 ? (c.score - smin) / range : 1.0; };

  std::vector<char> taken(long_list.size(), 0);
  std::array<std::size_t, kNumGroups> tier_counts{};
  std::vector<ScoredItem> selected;
  selected.reserve(k);

  for (int step = 0; step < k; ++step) {
    const auto list_size = static_cast<double>(step + 1);
    double best_value = 0.0;
    std::size_t best_idx = long_list.size();
    for (std::size_t c = 0; c < long_list.size(); ++c) {
      if (taken[c]) continue;
      auto counts = tier_counts;
      ++counts[static_cast<int>(grouping.group_of(long_list[c].item))];
      const GroupDistribution shares{static_cast<double>(counts[0]) / list_size,
                                     static_cast<double>(counts[1]) / list_size,
                                     static_cast<double>(counts[2]) / list_size};
      const double value = (1.0 - lambda) * rel(long_list[c]) - lambda * jsd(profile, shares);
      // Strict improvement only: scanning in long-list order keeps the best
      // original rank on ties.
      if (best_idx == long_list.size() || value > best_value) {
        best_value = value;
        best_idx = c;
      }
    }
    taken[best_idx] = 1;
    ++tier_counts[static_cast<int>(grouping.group_of(long_list[best_idx].item))];
    selected.push_back(long_list[best_idx]);
  }
  return selected;
}

std::vector<ScoredItem> pufr_rerank(std::span<const ScoredItem> scored,
                                    const UncertaintyTable& uncertainty,
                                    const PopularityGrouping& grouping, double lambda, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("pufr lambda must be >= 0");

  std::vector<ScoredItem> adjusted(scored.begin(), scored.end());
  for (auto& entry : adjusted) {
    const double u = uncertainty.uncertainty[entry.item];
    switch (grouping.group_of(entry.item)) {
      case Group::Tail: entry.score += lambda * u; break;   // protected
      case Group::Head: entry.score -= lambda * u; break;   // unprotected
      case Group::Mid: break;
    }
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), adjusted.size());
  std::partial_sort(adjusted.begin(), adjusted.begin() + take, adjusted.end(),
                    [](const ScoredItem& a, const ScoredItem& b) {
                      return a.score != b.score ? a.score > b.score : a.item < b.item;
                    });
  adjusted.resize(take);
  return adjusted;
}

void write_item_values_csv(const std::string& path, std::span<const double> values,
                           const InteractionDataset& ds) {
  if (values.size() != ds.num_items()) throw std::invalid_argument("value table size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write item value CSV: " + path);
  csv::write_row(out, {"item_id", "value"});
  for (std::uint32_t i = 0; i < ds.num_items(); ++i) {
    csv::write_row(out, {ds.item_id(i), csv::format_double(values[i])});
  }
}

std::vector<double> read_item_values_csv(const std::string& path, const InteractionDataset& ds) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() != 2) {
    throw std::runtime_error("malformed item value CSV: " + path);
  }
  std::vector<double> values(ds.num_items(), 0.0);
  std::vector<char> seen(ds.num_items(), 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 2) throw std::runtime_error("malformed row in " + path);
    const auto item = ds.find_item(f[0]);
    if (!item) throw std::runtime_error("unknown item id in " + path + ": " + f[0]);
    values[*item] = csv::parse_double(f[1]);
    seen[*item] = 1;
  }
  for (std::uint32_t i = 0; i < ds.num_items(); ++i) {
    if (!seen[i]) throw std::runtime_error("item value CSV misses items: " + path);
  }
  return values;
}

}  // namespace fairrec
