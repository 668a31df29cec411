#include "fairrec/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fairrec/loss.hpp"

namespace fairrec {

Triplet sample_triplet(const InteractionDataset& train, Rng& rng) {
  const auto& pairs = train.interactions();
  if (pairs.empty()) throw std::invalid_argument("cannot sample from an empty training set");
  if (pairs.size() == static_cast<std::size_t>(train.num_users()) * train.num_items()) {
    throw std::runtime_error("no negative items exist: every user interacted with every item");
  }
  for (;;) {
    const Interaction& pick = pairs[rng.uniform_index(pairs.size())];
    if (train.items_of(pick.user).size() >= train.num_items()) continue;  // saturated user
    for (;;) {
      const auto j = static_cast<std::uint32_t>(rng.uniform_index(train.num_items()));
      if (!train.has_interaction(pick.user, j)) return {pick.user, pick.item, j};
    }
  }
}

BatchEval evaluate_batch(const FactorModel& model, std::span<const Triplet> batch,
                         const PopularityGrouping& grouping, const IleConfig& ile) {
  BatchEval eval;
  eval.losses.resize(batch.size());
  eval.slopes.resize(batch.size());
  eval.groups.resize(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Triplet& t = batch[k];
    const double pos = model.user_factors.row(t.user).dot(model.item_factors.row(t.pos));
    const double neg = model.user_factors.row(t.user).dot(model.item_factors.row(t.neg));
    eval.losses[k] = pair_loss(pos, neg);
    eval.slopes[k] = pair_loss_slope(pos, neg);
    eval.groups[k] = grouping.group_of(t.pos);
  }
  eval.stats = group_average_losses(eval.losses, eval.groups);
  if (ile.distance != DistanceKind::None) {
    eval.distance_value = distance(eval.stats.present_means(), ile.distance, ile.ent_floor);
  }
  eval.objective = eval.stats.global_mean() + ile.lambda * eval.distance_value;
  return eval;
}

void accumulate_batch_gradient(const FactorModel& model, std::span<const Triplet> batch,
                               const BatchEval& eval, std::span<const double> weights,
                               double l2_reg, RowMatrixXd& user_grad, RowMatrixXd& item_grad) {
  const double reg = l2_reg / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Triplet& t = batch[k];
    const double coeff = weights[k] * eval.slopes[k];
    const auto pu = model.user_factors.row(t.user);
    const auto qi = model.item_factors.row(t.pos);
    const auto qj = model.item_factors.row(t.neg);
    user_grad.row(t.user) += coeff * (qi - qj) + reg * pu;
    item_grad.row(t.pos) += coeff * pu + reg * qi;
    item_grad.row(t.neg) += -coeff * pu + reg * qj;
  }
}

void TrainWorkspace::resize(std::uint32_t n, std::uint32_t m, int dim) {
  user_grad.setZero(n, dim);
  item_grad.setZero(m, dim);
  user_touched.assign(n, 0);
  item_touched.assign(m, 0);
  touched_users.clear();
  touched_items.clear();
}

namespace {

void mark_touched(const Triplet& t, TrainWorkspace& ws) {
  if (!ws.user_touched[t.user]) {
    ws.user_touched[t.user] = 1;
    ws.touched_users.push_back(t.user);
  }
  for (const auto item : {t.pos, t.neg}) {
    if (!ws.item_touched[item]) {
      ws.item_touched[item] = 1;
      ws.touched_items.push_back(item);
    }
  }
}

[[noreturn]] void throw_non_finite(int epoch, std::size_t batch_index) {
  throw std::runtime_error("non-finite factor detected during training (epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch_index + 1) +
                           ")");
}

}  // namespace

TraceRow train_epoch(FactorModel& model, const InteractionDataset& train,
                     const PopularityGrouping& grouping, const TrainConfig& cfg,
                     const IleConfig& ile, int epoch, Rng& rng, TrainWorkspace& ws,
                     const std::vector<double>* item_loss_weights) {
  const std::size_t total = train.num_interactions();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t num_batches = (total + batch_size - 1) / batch_size;

  GroupLossStats epoch_stats;

  for (std::size_t b = 0; b < num_batches; ++b) {
    const std::size_t bsz = std::min(batch_size, total - b * batch_size);
    ws.batch.resize(bsz);
    for (auto& t : ws.batch) t = sample_triplet(train, rng);

    const BatchEval eval = evaluate_batch(model, ws.batch, grouping, ile);

    ws.base_weights.resize(bsz);
    const double inv_b = 1.0 / static_cast<double>(bsz);
    if (item_loss_weights != nullptr) {
      for (std::size_t k = 0; k < bsz; ++k) {
        ws.base_weights[k] = (*item_loss_weights)[ws.batch[k].pos] * inv_b;
      }
    } else {
      for (std::size_t k = 0; k < bsz; ++k) ws.base_weights[k] = inv_b;
    }
    ws.weights.resize(bsz);
    pair_gradient_weights(ws.base_weights, eval.groups, eval.stats, ile, ws.weights);

    for (const auto& t : ws.batch) mark_touched(t, ws);
    accumulate_batch_gradient(model, ws.batch, eval, ws.weights, cfg.l2_reg, ws.user_grad,
                              ws.item_grad);

    for (const auto u : ws.touched_users) {
      model.user_factors.row(u) -= cfg.learning_rate * ws.user_grad.row(u);
      if (!model.user_factors.row(u).allFinite()) throw_non_finite(epoch, b);
      ws.user_grad.row(u).setZero();
      ws.user_touched[u] = 0;
    }
    for (const auto i : ws.touched_items) {
      model.item_factors.row(i) -= cfg.learning_rate * ws.item_grad.row(i);
      if (!model.item_factors.row(i).allFinite()) throw_non_finite(epoch, b);
      ws.item_grad.row(i).setZero();
      ws.item_touched[i] = 0;
    }
    ws.touched_users.clear();
    ws.touched_items.clear();

    for (int g = 0; g < kNumGroups; ++g) {
      epoch_stats.sum[g] += eval.stats.sum[g];
      epoch_stats.count[g] += eval.stats.count[g];
    }
    epoch_stats.total_sum += eval.stats.total_sum;
    epoch_stats.total_count += eval.stats.total_count;
  }

  constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
  TraceRow row;
  row.epoch = epoch;
  row.average_loss = epoch_stats.global_mean();
  row.head_loss = epoch_stats.present(Group::Head) ? epoch_stats.mean(Group::Head) : kAbsent;
  row.mid_loss = epoch_stats.present(Group::Mid) ? epoch_stats.mean(Group::Mid) : kAbsent;
  row.tail_loss = epoch_stats.present(Group::Tail) ? epoch_stats.mean(Group::Tail) : kAbsent;
  row.distance_value = ile.distance == DistanceKind::None
                           ? 0.0
                           : distance(epoch_stats.present_means(), ile.distance, ile.ent_floor);
  row.objective = row.average_loss + ile.lambda * row.distance_value;
  return row;
}

GroupLossTrace train_model(FactorModel& model, const InteractionDataset& train,
                           const PopularityGrouping& grouping, const TrainConfig& cfg,
                           const IleConfig& ile, const std::vector<double>* item_loss_weights,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  ile.validate();
  if (model.num_users() != train.num_users() || model.num_items() != train.num_items()) {
    throw std::invalid_argument("model shape does not match the dataset");
  }
  if (item_loss_weights != nullptr && item_loss_weights->size() != train.num_items()) {
    throw std::invalid_argument("item loss weight table size does not match the catalog");
  }

  Rng rng(mix_seed(cfg.seed, kSampleStream));
  TrainWorkspace ws;
  ws.resize(train.num_users(), train.num_items(), cfg.dim);

  GroupLossTrace trace;
  trace.rows.reserve(cfg.epochs);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const TraceRow row =
        train_epoch(model, train, grouping, cfg, ile, epoch, rng, ws, item_loss_weights);
    trace.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return trace;
}

}  // namespace fairrec
