#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"

namespace fairrec {

// Dispersion measure over the per-group average losses.
enum class DistanceKind : std::uint8_t { None, Std, Ent, Mad };

DistanceKind parse_distance(const std::string& name);
const char* distance_name(DistanceKind kind);

struct IleConfig {
  double lambda = 0.0;           // weight of the equalization term; 0 disables it
  DistanceKind distance = DistanceKind::None;
  double ent_floor = 1e-8;       // clamp for the entropy form's logarithm

  void validate() const;
};

// Per-group loss aggregates of one batch (or one epoch). A group with no
// pairs is absent, not zero.
struct GroupLossStats {
  std::array<double, kNumGroups> sum{};
  std::array<std::size_t, kNumGroups> count{};
  double total_sum = 0.0;
  std::size_t total_count = 0;

  bool present(Group g) const { return count[static_cast<int>(g)] > 0; }
  double mean(Group g) const { return sum[static_cast<int>(g)] / static_cast<double>(count[static_cast<int>(g)]); }
  double global_mean() const { return total_sum / static_cast<double>(total_count); }

  // Means of the groups that are present, in Head, Mid, Tail order.
  std::vector<double> present_means() const;
};

// Arithmetic means of the pair losses keyed by the positive item's group.
GroupLossStats group_average_losses(std::span<const double> losses, std::span<const Group> groups);

// Dispersion of the present group losses:
//   Std: sqrt(sum_g (L_g - mean)^2 / |G|)
//   Ent: -sum_g L_g * ln(max(L_g, ent_floor))
//   Mad: sum_g |L_g - mean| / |G|
// |G| is the number of values passed (absent groups are excluded upstream).
double distance(std::span<const double> values, DistanceKind kind, double ent_floor = 1e-8);

// dD/dL_g for each value, same order. Std uses the 0 subgradient when D = 0;
// Mad uses sign(0) = 0.
void distance_gradient(std::span<const double> values, DistanceKind kind, double ent_floor,
                       std::span<double> out);

// Combined objective L + lambda * D({L_g}). With distance None or lambda 0
// this is exactly the plain average loss.
double ile_objective(double average_loss, const GroupLossStats& stats, const IleConfig& cfg);

// Per-pair scalar weights turning the ILE objective into an SGD step:
//   w_k = 1/B + lambda * dD/dL_{g(k)} * 1/B_{g(k)}
// so that sum_k w_k * grad(loss_k) is the exact gradient of
// mean(losses) + lambda * D({L_g}). Weights may be negative under Ent/Mad for
// below-dispersion groups; that is the true gradient and is applied as-is.
std::vector<double> pair_gradient_weights(std::span<const double> losses,
                                          std::span<const Group> groups, const IleConfig& cfg);

// Same, reusing precomputed stats; `base` supplies each pair's 1/B term
// (possibly already scaled, e.g. by propensity weights).
void pair_gradient_weights(std::span<const double> base, std::span<const Group> groups,
                           const GroupLossStats& stats, const IleConfig& cfg,
                           std::span<double> out);

// One epoch of the training trace: average losses, their dispersion, and the
// combined objective. Group slots hold NaN when the group never occurred.
struct TraceRow {
  int epoch = 0;
  double average_loss = 0.0;
  double head_loss = 0.0;
  double mid_loss = 0.0;
  double tail_loss = 0.0;
  double distance_value = 0.0;
  double objective = 0.0;
};

struct GroupLossTrace {
  std::vector<TraceRow> rows;
};

// CSV with columns epoch,L,L_H,L_M,L_T,D,L_star.
void write_trace_csv(const std::string& path, const GroupLossTrace& trace);
GroupLossTrace read_trace_csv(const std::string& path);

}  // namespace fairrec
