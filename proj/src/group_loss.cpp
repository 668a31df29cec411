#include "fairrec/group_loss.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "fairrec/csv.hpp"

namespace fairrec {

DistanceKind parse_distance(const std::string& name) {
  if (name == "NONE" || name == "none") return DistanceKind::None;
  if (name == "STD" || name == "std") return DistanceKind::Std;
  if (name == "ENT" || name == "ent") return DistanceKind::Ent;
  if (name == "MAD" || name == "mad") return DistanceKind::Mad;
  throw std::invalid_argument("unknown distance function: " + name);
}

const char* distance_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::None: return "NONE";
    case DistanceKind::Std: return "STD";
    case DistanceKind::Ent: return "ENT";
    default: return "MAD";
  }
}

void IleConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(ent_floor > 0.0 && ent_floor <= 1e-3)) {
    throw std::invalid_argument("ent_floor must be in (0, 1e-3]");
  }
}

std::vector<double> GroupLossStats::present_means() const {
  std::vector<double> out;
  for (int g = 0; g < kNumGroups; ++g) {
    if (count[g] > 0) out.push_back(sum[g] / static_cast<double>(count[g]));
  }
  return out;
}

GroupLossStats group_average_losses(std::span<const double> losses,
                                    std::span<const Group> groups) {
  if (losses.empty() || losses.size() != groups.size()) {
    throw std::invalid_argument("group_average_losses needs a non-empty, aligned batch");
  }
  GroupLossStats stats;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    stats.sum[static_cast<int>(groups[k])] += losses[k];
    ++stats.count[static_cast<int>(groups[k])];
    stats.total_sum += losses[k];
  }
  stats.total_count = losses.size();
  return stats;
}

namespace {

// Dispersion of a constant vector is exactly 0; computing it through the
// mean leaves rounding dust that would also corrupt the D = 0 subgradient.
bool all_equal(std::span<const double> values) {
  for (const double v : values) {
    if (v != values.front()) return false;
  }
  return true;
}

}  // namespace

double distance(std::span<const double> values, DistanceKind kind, double ent_floor) {
  if (kind == DistanceKind::None) return 0.0;
  if (values.empty()) throw std::invalid_argument("distance over an empty value set");
  const auto n = static_cast<double>(values.size());
  if (kind != DistanceKind::Ent && all_equal(values)) return 0.0;

  switch (kind) {
    case DistanceKind::Std: {
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= n;
      double ss = 0.0;
      for (const double v : values) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / n);
    }
    case DistanceKind::Ent: {
      // Applied to raw average losses exactly as stated; the floor only
      // guards ln(0).
      double acc = 0.0;
      for (const double v : values) {
        const double c = std::max(v, ent_floor);
        acc -= c * std::log(c);
      }
      return acc;
    }
    default: {  // Mad
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= n;
      double acc = 0.0;
      for (const double v : values) acc += std::abs(v - mean);
      return acc / n;
    }
  }
}

void distance_gradient(std::span<const double> values, DistanceKind kind, double ent_floor,
                       std::span<double> out) {
  if (out.size() != values.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const auto n = static_cast<double>(values.size());
  if (kind != DistanceKind::Ent && !values.empty() && all_equal(values)) {
    for (auto& o : out) o = 0.0;  // zero-dispersion subgradient, exactly
    return;
  }

  switch (kind) {
    case DistanceKind::None:
      for (auto& o : out) o = 0.0;
      return;
    case DistanceKind::Std: {
      const double d = distance(values, DistanceKind::Std, ent_floor);
      if (d == 0.0) {
        for (auto& o : out) o = 0.0;  // subgradient at the zero-dispersion tie
        return;
      }
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= n;
      for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / (n * d);
      return;
    }
    case DistanceKind::Ent: {
      for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = -(std::log(std::max(values[i], ent_floor)) + 1.0);
      }
      return;
    }
    default: {  // Mad
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= n;
      auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
      double sign_sum = 0.0;
      for (const double v : values) sign_sum += sign(v - mean);
      for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (sign(values[i] - mean) - sign_sum / n) / n;
      }
      return;
    }
  }
}

double ile_objective(double average_loss, const GroupLossStats& stats, const IleConfig& cfg) {
  if (cfg.distance == DistanceKind::None || cfg.lambda == 0.0) return average_loss;
  const auto means = stats.present_means();
  return average_loss + cfg.lambda * distance(means, cfg.distance, cfg.ent_floor);
}

void pair_gradient_weights(std::span<const double> base, std::span<const Group> groups,
                           const GroupLossStats& stats, const IleConfig& cfg,
                           std::span<double> out) {
  if (base.size() != groups.size() || out.size() != base.size()) {
    throw std::invalid_argument("weight buffer size mismatch");
  }
  for (std::size_t k = 0; k < base.size(); ++k) out[k] = base[k];
  if (cfg.distance == DistanceKind::None) return;

  const auto means = stats.present_means();
  std::vector<double> deriv(means.size());
  distance_gradient(means, cfg.distance, cfg.ent_floor, deriv);

  // Map each present group to its slot in the compacted means vector.
  std::array<double, kNumGroups> per_group{};
  std::size_t slot = 0;
  for (int g = 0; g < kNumGroups; ++g) {
    if (stats.count[g] > 0) {
      per_group[g] = cfg.lambda * deriv[slot++] / static_cast<double>(stats.count[g]);
    }
  }
  for (std::size_t k = 0; k < base.size(); ++k) {
    out[k] += per_group[static_cast<int>(groups[k])];
  }
}

std::vector<double> pair_gradient_weights(std::span<const double> losses,
                                          std::span<const Group> groups, const IleConfig& cfg) {
  const GroupLossStats stats = group_average_losses(losses, groups);
  std::vector<double> base(losses.size(), 1.0 / static_cast<double>(losses.size()));
  std::vector<double> out(losses.size());
  pair_gradient_weights(base, groups, stats, cfg, out);
  return out;
}

void write_trace_csv(const std::string& path, const GroupLossTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace CSV: " + path);
  csv::write_row(out, {"epoch", "L", "L_H", "L_M", "L_T", "D", "L_star"});
  for (const auto& row : trace.rows) {
    csv::write_row(out, {std::to_string(row.epoch), csv::format_double(row.average_loss),
                         csv::format_double(row.head_loss), csv::format_double(row.mid_loss),
                         csv::format_double(row.tail_loss), csv::format_double(row.distance_value),
                         csv::format_double(row.objective)});
  }
}

GroupLossTrace read_trace_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() != 7) {
    throw std::runtime_error("malformed trace CSV: " + path);
  }
  GroupLossTrace trace;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 7) throw std::runtime_error("malformed trace row in " + path);
    TraceRow row;
    row.epoch = static_cast<int>(csv::parse_int(f[0]));
    row.average_loss = csv::parse_double(f[1]);
    row.head_loss = csv::parse_double(f[2]);
    row.mid_loss = csv::parse_double(f[3]);
    row.tail_loss = csv::parse_double(f[4]);
    row.distance_value = csv::parse_double(f[5]);
    row.objective = csv::parse_double(f[6]);
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace fairrec
