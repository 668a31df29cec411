#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/group_loss.hpp"
#include "fairrec/model.hpp"
#include "fairrec/rng.hpp"

namespace fairrec {

// Training tuple: positive item i interacted by u, negative item j not.
struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t pos = 0;
  std::uint32_t neg = 0;
};

// (u, i) uniform over training interactions, j uniform over the items u has
// not interacted with (rejection sampling). Users that interacted with the
// whole catalog are skipped by resampling.
Triplet sample_triplet(const InteractionDataset& train, Rng& rng);

// Frozen-model pass over one batch: losses, the positive-item groups, their
// aggregates, and the combined objective mean(loss) + lambda * D.
struct BatchEval {
  std::vector<double> losses;
  std::vector<double> slopes;  // d(loss)/d(score difference), per pair
  std::vector<Group> groups;
  GroupLossStats stats;
  double distance_value = 0.0;
  double objective = 0.0;
};

BatchEval evaluate_batch(const FactorModel& model, std::span<const Triplet> batch,
                         const PopularityGrouping& grouping, const IleConfig& ile);

// Adds the exact gradient of the weighted batch loss (plus L2 on touched
// rows, scaled 1/B per appearance) into the buffers. Rows are read from the
// frozen model; buffers must be zero-initialized on touched rows.
void accumulate_batch_gradient(const FactorModel& model, std::span<const Triplet> batch,
                               const BatchEval& eval, std::span<const double> weights,
                               double l2_reg, RowMatrixXd& user_grad, RowMatrixXd& item_grad);

// Reusable buffers for the epoch loop.
struct TrainWorkspace {
  RowMatrixXd user_grad, item_grad;
  std::vector<char> user_touched, item_touched;
  std::vector<std::uint32_t> touched_users, touched_items;
  std::vector<Triplet> batch;
  std::vector<double> base_weights, weights;

  void resize(std::uint32_t n, std::uint32_t m, int dim);
};

// One epoch = ceil(|train| / batch_size) minibatches covering |train| sampled
// triplets. Per batch: frozen-model losses, per-group averages, gradient
// weights, then one SGD step on the touched factor rows. `item_loss_weights`
// (optional) scales each pair's loss gradient by the positive item's weight.
// Throws if any factor goes non-finite, naming the epoch and batch.
TraceRow train_epoch(FactorModel& model, const InteractionDataset& train,
                     const PopularityGrouping& grouping, const TrainConfig& cfg,
                     const IleConfig& ile, int epoch, Rng& rng, TrainWorkspace& ws,
                     const std::vector<double>* item_loss_weights = nullptr);

using EpochCallback = std::function<void(const TraceRow&)>;

// Full training run; the model must already be initialized. Reproducible
// bit-for-bit given cfg.seed.
GroupLossTrace train_model(FactorModel& model, const InteractionDataset& train,
                           const PopularityGrouping& grouping, const TrainConfig& cfg,
                           const IleConfig& ile,
                           const std::vector<double>* item_loss_weights = nullptr,
                           const EpochCallback& on_epoch = {});

}  // namespace fairrec
