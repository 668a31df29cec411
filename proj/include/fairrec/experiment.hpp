#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairrec/baselines.hpp"
#include "fairrec/dataset.hpp"
#include "fairrec/group_loss.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/model.hpp"
#include "fairrec/trainer.hpp"

namespace fairrec {

enum class Method : std::uint8_t { BPR, ILE, IPS, CP, PUFR };

Method parse_method(const std::string& name);
const char* method_name(Method method);

struct MethodParams {
  double lambda = 0.0;       // CP / PUFR re-ranking strength
  int long_list = 100;       // candidate list size N for CP / PUFR
  double ips_gamma = 1.0;
  double ips_clip = 30.0;
  std::vector<std::uint64_t> pufr_seeds = {101, 102, 103, 104, 105};
};

struct ExperimentConfig {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::Auto;
  Delimiter delimiter = Delimiter::Auto;
  double train_ratio = 0.8;
  std::uint64_t split_seed = 42;

  TrainConfig train;
  IleConfig ile;

  Method method = Method::BPR;
  MethodParams params;
  int top_k = 10;
  std::string output_dir = "out";
  bool verbose = false;

  void validate() const;  // catalog-independent checks

  // Canonical "key=value;..." string for CSV rows and file names; "-" for
  // parameterless methods.
  std::string params_string() const;
  std::string run_tag() const;  // method + params + seed, filesystem-safe
};

// Flat key=value config file with '#' comments. Unknown keys are errors.
ExperimentConfig load_config_file(const std::string& path);
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct PhaseTimings {
  double load_ms = 0.0;
  double train_ms = 0.0;
  double recommend_ms = 0.0;
  double rerank_ms = 0.0;
  double evaluate_ms = 0.0;
  double total_ms = 0.0;
};

void write_timings_csv(const std::string& path, const PhaseTimings& timings);

struct RunArtifacts {
  MetricsReport report;
  PhaseTimings timings;
  GroupLossTrace trace;
  std::string metrics_path;
  std::string trace_path;
  std::string checkpoint_path;
  std::string recommendations_path;
  std::string timings_path;
};

// Trains with the method-appropriate loss (plain, equalized, or
// propensity-weighted). CP and PUFR train the plain model.
GroupLossTrace train_for_method(FactorModel& model, const InteractionDataset& train,
                                const PopularityGrouping& grouping, const ExperimentConfig& cfg);

// Builds each user's final top-K list, applying the method's post-processing
// (CP / PUFR) on a long candidate list where applicable. When `timings` is
// given, base list generation and re-ranking are timed separately.
RecommendationSet recommend_for_method(const FactorModel& model, const SplitDataset& split,
                                       const PopularityGrouping& grouping,
                                       const ExperimentConfig& cfg,
                                       const UncertaintyTable* uncertainty,
                                       PhaseTimings* timings = nullptr);

// The PUFR uncertainty table, loaded from the on-disk cache when one matches
// (keyed by dataset content and training config) and computed otherwise.
UncertaintyTable cached_uncertainty(const InteractionDataset& train,
                                    const PopularityGrouping& grouping,
                                    const ExperimentConfig& cfg);

// End-to-end: load -> split -> group -> train -> recommend -> evaluate, then
// writes the metrics row, group-loss trace, checkpoint, recommendation dump
// and per-phase timings into cfg.output_dir. Any phase failure removes the
// partial artifacts and rethrows with the phase name.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double lambda = 0.0;
  MetricsReport report;
  bool ok = false;
  std::string error;
};

// One run per lambda with shared split and seeds; failures are recorded and
// the remaining points still run. Writes lambda,ndcg,upd,ad,ee,status rows.
std::vector<SweepRow> sweep(const ExperimentConfig& base, std::span<const double> lambdas,
                            const std::string& csv_path);

}  // namespace fairrec
