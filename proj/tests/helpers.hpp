#pragma once

// Test fixtures and independent oracle implementations. The oracles verify
// the library along a different algebraic route (entropy-form JSD,
// pairwise-difference Gini, naive loops) and must stay decoupled from the
// code they check.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/group_loss.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/model.hpp"
#include "fairrec/trainer.hpp"

namespace testutil {

using namespace fairrec;

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& label) {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("fairrec_" + label + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    const std::string p = path(name);
    std::ofstream out(p);
    out << content;
    return p;
  }

 private:
  std::filesystem::path dir_;
};

// Dataset whose item x has exactly counts[x] training interactions, using one
// distinct user per interaction.
inline InteractionDataset dataset_with_counts(const std::vector<std::uint32_t>& counts) {
  std::uint32_t max_count = 0;
  for (const auto c : counts) max_count = std::max(max_count, c);
  std::vector<Interaction> pairs;
  for (std::uint32_t i = 0; i < counts.size(); ++i) {
    for (std::uint32_t u = 0; u < counts[i]; ++u) pairs.push_back({u, i});
  }
  std::vector<std::string> users(std::max<std::uint32_t>(max_count, 1)), items(counts.size());
  for (std::uint32_t u = 0; u < users.size(); ++u) users[u] = "u" + std::to_string(u);
  for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = "i" + std::to_string(i);
  return InteractionDataset(std::move(pairs), std::move(users), std::move(items));
}

// Small random dataset; every user gets at least one interaction.
inline InteractionDataset random_dataset(std::uint32_t n, std::uint32_t m, std::size_t extra,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Interaction> pairs;
  for (std::uint32_t u = 0; u < n; ++u) {
    pairs.push_back({u, static_cast<std::uint32_t>(rng() % m)});
  }
  for (std::size_t k = 0; k < extra; ++k) {
    pairs.push_back(
        {static_cast<std::uint32_t>(rng() % n), static_cast<std::uint32_t>(rng() % m)});
  }
  std::vector<std::string> users(n), items(m);
  for (std::uint32_t u = 0; u < n; ++u) users[u] = "u" + std::to_string(u);
  for (std::uint32_t i = 0; i < m; ++i) items[i] = "i" + std::to_string(i);
  return InteractionDataset(std::move(pairs), std::move(users), std::move(items));
}

inline FactorModel random_model(std::uint32_t n, std::uint32_t m, int d, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.dim = d;
  cfg.seed = seed;
  return init_model(cfg, n, m);
}

// ---- Oracles ------------------------------------------------------------

// JSD via the entropy identity JSD(p,q) = H((p+q)/2) - (H(p) + H(q)) / 2.
inline double oracle_jsd(const GroupDistribution& p, const GroupDistribution& q) {
  auto h = [](std::initializer_list<double> dist) {
    long double acc = 0.0L;
    for (const double x : dist) {
      if (x > 0.0) acc -= static_cast<long double>(x) * std::log2(static_cast<long double>(x));
    }
    return acc;
  };
  const long double hm = h({0.5 * (p.head + q.head), 0.5 * (p.mid + q.mid), 0.5 * (p.tail + q.tail)});
  const long double hp = h({p.head, p.mid, p.tail});
  const long double hq = h({q.head, q.mid, q.tail});
  return static_cast<double>(hm - 0.5L * (hp + hq));
}

// Gini by the mean-absolute-difference definition.
inline double oracle_gini(const std::vector<double>& x) {
  long double total = 0.0L, diff = 0.0L;
  for (const double v : x) total += v;
  if (total == 0.0L) return 0.0;
  for (const double a : x)
    for (const double b : x) diff += std::fabs(static_cast<long double>(a) - b);
  return static_cast<double>(diff / (2.0L * static_cast<long double>(x.size()) * total));
}

inline double oracle_ee(const RecommendationSet& recs, std::uint32_t m) {
  std::vector<double> exposure(m, 0.0);
  for (const auto& list : recs.lists) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      exposure[list[r].item] += 1.0 / (1.0 + std::log2(static_cast<double>(r + 1)));
    }
  }
  return 1.0 - oracle_gini(exposure);
}

inline double oracle_ad(const RecommendationSet& recs, std::uint32_t m) {
  std::vector<bool> seen(m, false);
  for (const auto& list : recs.lists)
    for (const auto& e : list) seen[e.item] = true;
  std::size_t c = 0;
  for (const bool s : seen) c += s;
  return static_cast<double>(c) / static_cast<double>(m);
}

inline double oracle_ndcg(const RecommendationSet& recs, const InteractionDataset& test, int k) {
  long double acc = 0.0L;
  std::size_t users = 0;
  for (std::uint32_t u = 0; u < recs.lists.size(); ++u) {
    const auto test_items = test.items_of(u);
    if (test_items.empty()) continue;
    long double dcg = 0.0L;
    std::size_t rank = 0;
    for (const auto& e : recs.lists[u]) {
      ++rank;
      bool hit = false;
      for (const auto t : test_items) hit = hit || t == e.item;
      if (hit) dcg += 1.0L / std::log2(static_cast<long double>(rank + 1));
    }
    long double idcg = 0.0L;
    const std::size_t ideal = std::min<std::size_t>(k, test_items.size());
    for (std::size_t r = 1; r <= ideal; ++r) idcg += 1.0L / std::log2(static_cast<long double>(r + 1));
    acc += dcg / idcg;
    ++users;
  }
  return users > 0 ? static_cast<double>(acc / users) : 0.0;
}

inline GroupDistribution oracle_shares(const std::vector<std::uint32_t>& items,
                                       const PopularityGrouping& grouping) {
  GroupDistribution d;
  for (const auto item : items) {
    switch (grouping.group_of(item)) {
      case Group::Head: d.head += 1.0; break;
      case Group::Mid: d.mid += 1.0; break;
      case Group::Tail: d.tail += 1.0; break;
    }
  }
  const auto size = static_cast<double>(items.size());
  d.head /= size;
  d.mid /= size;
  d.tail /= size;
  return d;
}

inline double oracle_upd(const RecommendationSet& recs, const InteractionDataset& train,
                         const PopularityGrouping& grouping) {
  long double acc = 0.0L;
  std::size_t users = 0;
  for (std::uint32_t u = 0; u < recs.lists.size(); ++u) {
    const auto profile = train.items_of(u);
    const auto& list = recs.lists[u];
    if (profile.empty() || list.empty()) continue;
    std::vector<std::uint32_t> profile_items(profile.begin(), profile.end());
    std::vector<std::uint32_t> list_items;
    for (const auto& e : list) list_items.push_back(e.item);
    acc += oracle_jsd(oracle_shares(profile_items, grouping), oracle_shares(list_items, grouping));
    ++users;
  }
  return users > 0 ? static_cast<double>(acc / users) : 0.0;
}

// ---- Finite differences ---------------------------------------------------

// Batch objective mean(loss) + lambda * D as a pure function of the factors,
// for finite-difference checks.
inline double batch_objective(const FactorModel& model, const std::vector<Triplet>& batch,
                              const PopularityGrouping& grouping, const IleConfig& ile) {
  return evaluate_batch(model, batch, grouping, ile).objective;
}

// Central-difference gradient of the batch objective w.r.t. every factor
// entry, user block first.
inline std::vector<double> fd_batch_gradient(FactorModel model, const std::vector<Triplet>& batch,
                                             const PopularityGrouping& grouping,
                                             const IleConfig& ile, double h = 1e-5) {
  std::vector<double> grad;
  grad.reserve(model.user_factors.size() + model.item_factors.size());
  for (auto* block : {&model.user_factors, &model.item_factors}) {
    for (Eigen::Index r = 0; r < block->rows(); ++r) {
      for (Eigen::Index c = 0; c < block->cols(); ++c) {
        const double saved = (*block)(r, c);
        (*block)(r, c) = saved + h;
        const double up = batch_objective(model, batch, grouping, ile);
        (*block)(r, c) = saved - h;
        const double down = batch_objective(model, batch, grouping, ile);
        (*block)(r, c) = saved;
        grad.push_back((up - down) / (2.0 * h));
      }
    }
  }
  return grad;
}

// Analytic gradient assembled from the per-pair weights, same layout.
inline std::vector<double> analytic_batch_gradient(const FactorModel& model,
                                                   const std::vector<Triplet>& batch,
                                                   const PopularityGrouping& grouping,
                                                   const IleConfig& ile) {
  const BatchEval eval = evaluate_batch(model, batch, grouping, ile);
  std::vector<double> base(batch.size(), 1.0 / static_cast<double>(batch.size()));
  std::vector<double> weights(batch.size());
  pair_gradient_weights(base, eval.groups, eval.stats, ile, weights);

  RowMatrixXd user_grad = RowMatrixXd::Zero(model.user_factors.rows(), model.user_factors.cols());
  RowMatrixXd item_grad = RowMatrixXd::Zero(model.item_factors.rows(), model.item_factors.cols());
  accumulate_batch_gradient(model, batch, eval, weights, /*l2_reg=*/0.0, user_grad, item_grad);

  std::vector<double> grad;
  grad.reserve(user_grad.size() + item_grad.size());
  for (Eigen::Index r = 0; r < user_grad.rows(); ++r)
    for (Eigen::Index c = 0; c < user_grad.cols(); ++c) grad.push_back(user_grad(r, c));
  for (Eigen::Index r = 0; r < item_grad.rows(); ++r)
    for (Eigen::Index c = 0; c < item_grad.cols(); ++c) grad.push_back(item_grad(r, c));
  return grad;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    den += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(std::sqrt(num) / std::max(std::sqrt(den), 1e-300L));
}

// Random batch over a random grouping, for gradient checks.
inline std::vector<Triplet> random_batch(const InteractionDataset& train, std::size_t size,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Triplet> batch(size);
  for (auto& t : batch) t = sample_triplet(train, rng);
  return batch;
}

}  // namespace testutil
