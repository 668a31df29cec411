// Experiment harness CLI: dataset inspection, training, recommendation,
// evaluation, end-to-end runs, lambda sweeps and synthetic data generation.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairrec/csv.hpp"
#include "fairrec/experiment.hpp"
#include "fairrec/synth.hpp"

namespace {

using namespace fairrec;

// Every experiment flag funnels through apply_config_entry, so the CLI and
// the config file accept exactly the same keys and the command line wins.
class ConfigFlags {
 public:
  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path_, "key=value config file ('#' comments)");
    add(cmd, "--dataset", "dataset", "interaction file, one (user, item[, rating[, ts]]) per line");
    add(cmd, "--format", "format", "auto|pairs|triples");
    add(cmd, "--delimiter", "delimiter", "auto|space|comma|tab|double-colon");
    add(cmd, "--train-ratio", "train_ratio", "per-user training fraction (default 0.8)");
    add(cmd, "--split-seed", "split_seed", "train/test split seed");
    add(cmd, "--learning-rate", "learning_rate", "SGD learning rate (default 1e-4)");
    add(cmd, "--dim", "dim", "embedding size (default 128)");
    add(cmd, "--epochs", "epochs", "training epochs (default 200)");
    add(cmd, "--batch-size", "batch_size", "minibatch size (default 1024)");
    add(cmd, "--l2-reg", "l2_reg", "L2 coefficient on touched rows (default 1e-4)");
    add(cmd, "--seed", "seed", "model init / sampling seed");
    add(cmd, "--method", "method", "BPR|ILE|IPS|CP|PUFR");
    add(cmd, "--lambda", "lambda", "strength of the method's fairness knob");
    add(cmd, "--distance", "distance", "STD|ENT|MAD|NONE (ILE)");
    add(cmd, "--ent-floor", "ent_floor", "clamp for the ENT logarithm (default 1e-8)");
    add(cmd, "--long-list", "long_list", "candidate list size N for CP/PUFR (default 100)");
    add(cmd, "--ips-gamma", "ips_gamma", "propensity exponent (default 1)");
    add(cmd, "--ips-clip", "ips_clip", "propensity weight cap (default 30)");
    add(cmd, "--pufr-seeds", "pufr_seeds", "5 comma-separated uncertainty seeds");
    add(cmd, "--top-k", "top_k", "recommendation list size (default 10)");
    add(cmd, "-o,--output-dir", "output_dir", "artifact directory (default out)");
    verbose_opt_ = cmd->add_flag("-v,--verbose", "log per-epoch losses");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config_path_.empty()) cfg = load_config_file(config_path_);
    for (const auto& flag : flags_) {
      if (flag->opt->count() > 0) apply_config_entry(cfg, flag->key, flag->value);
    }
    if (verbose_opt_->count() > 0) cfg.verbose = true;
    return cfg;
  }

 private:
  struct Flag {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };

  void add(CLI::App* cmd, const std::string& name, const std::string& key,
           const std::string& help) {
    auto flag = std::make_unique<Flag>();
    flag->key = key;
    flag->opt = cmd->add_option(name, flag->value, help);
    flags_.push_back(std::move(flag));
  }

  std::string config_path_;
  std::vector<std::unique_ptr<Flag>> flags_;
  CLI::Option* verbose_opt_ = nullptr;
};

void print_report(const ExperimentConfig& cfg, const MetricsReport& report) {
  std::printf("%-6s %-24s ndcg=%.4f upd=%.4f ad=%.4f ee=%.4f (users=%zu)\n",
              method_name(cfg.method), cfg.params_string().c_str(), report.ndcg, report.upd,
              report.ad, report.ee, report.users_evaluated);
}

int cmd_ingest(const ExperimentConfig& cfg, const std::string& grouping_out) {
  const InteractionDataset ds = load_interactions(cfg.dataset_path, cfg.format, cfg.delimiter);
  const double density = static_cast<double>(ds.num_interactions()) /
                         (static_cast<double>(ds.num_users()) * ds.num_items());
  std::printf("users:        %u\n", ds.num_users());
  std::printf("items:        %u\n", ds.num_items());
  std::printf("interactions: %zu\n", ds.num_interactions());
  std::printf("density:      %.6f\n", density);
  const PopularityGrouping grouping = assign_popularity_groups(ds);
  std::printf("groups:       H=%zu M=%zu T=%zu (count edges %u/%u)\n", grouping.size(Group::Head),
              grouping.size(Group::Mid), grouping.size(Group::Tail), grouping.boundaries()[0],
              grouping.boundaries()[1]);
  if (!grouping_out.empty()) {
    write_grouping_csv(grouping_out, grouping, ds);
    std::printf("grouping dump: %s\n", grouping_out.c_str());
  }
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const InteractionDataset full = load_interactions(cfg.dataset_path, cfg.format, cfg.delimiter);
  const SplitDataset split = split_train_test(full, cfg.train_ratio, cfg.split_seed);
  const PopularityGrouping grouping = assign_popularity_groups(split.train);

  FactorModel model = init_model(cfg.train, full.num_users(), full.num_items());
  const GroupLossTrace trace = train_for_method(model, split.train, grouping, cfg);

  std::filesystem::create_directories(cfg.output_dir);
  const std::string tag = (std::filesystem::path(cfg.output_dir) / cfg.run_tag()).string();
  save_checkpoint(tag + ".ckpt", model, cfg.train.seed, static_cast<std::uint64_t>(cfg.train.epochs));
  write_trace_csv(tag + ".trace.csv", trace);
  std::printf("checkpoint: %s.ckpt\ntrace:      %s.trace.csv\n", tag.c_str(), tag.c_str());
  if (!trace.rows.empty()) {
    const TraceRow& last = trace.rows.back();
    std::printf("final epoch %d: L=%.6f H=%.6f M=%.6f T=%.6f D=%.6f\n", last.epoch,
                last.average_loss, last.head_loss, last.mid_loss, last.tail_loss,
                last.distance_value);
  }
  return 0;
}

int cmd_recommend(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                  const std::string& recs_out) {
  cfg.validate();
  const InteractionDataset full = load_interactions(cfg.dataset_path, cfg.format, cfg.delimiter);
  const SplitDataset split = split_train_test(full, cfg.train_ratio, cfg.split_seed);
  const PopularityGrouping grouping = assign_popularity_groups(split.train);

  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (ck.model.num_users() != full.num_users() || ck.model.num_items() != full.num_items()) {
    throw std::runtime_error("checkpoint shape does not match the dataset");
  }
  UncertaintyTable uncertainty;
  if (cfg.method == Method::PUFR) uncertainty = cached_uncertainty(split.train, grouping, cfg);
  const RecommendationSet recs = recommend_for_method(
      ck.model, split, grouping, cfg, cfg.method == Method::PUFR ? &uncertainty : nullptr);
  write_recommendations_csv(recs_out, recs, full);
  std::printf("recommendations: %s\n", recs_out.c_str());
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& recs_path,
                 const std::string& metrics_out) {
  const InteractionDataset full = load_interactions(cfg.dataset_path, cfg.format, cfg.delimiter);
  const SplitDataset split = split_train_test(full, cfg.train_ratio, cfg.split_seed);
  const PopularityGrouping grouping = assign_popularity_groups(split.train);

  RecommendationSet recs = read_recommendations_csv(recs_path, full);
  recs.k = cfg.top_k;
  const MetricsReport report = evaluate_all(recs, split.train, split.test, grouping);
  print_report(cfg, report);
  if (!metrics_out.empty()) {
    write_metrics_csv(metrics_out, method_name(cfg.method), cfg.params_string(), report);
    std::printf("metrics: %s\n", metrics_out.c_str());
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg) {
  const RunArtifacts artifacts = run_experiment(cfg);
  print_report(cfg, artifacts.report);
  std::printf("phases: load=%.0fms train=%.0fms recommend=%.0fms rerank=%.0fms evaluate=%.0fms\n",
              artifacts.timings.load_ms, artifacts.timings.train_ms,
              artifacts.timings.recommend_ms, artifacts.timings.rerank_ms,
              artifacts.timings.evaluate_ms);
  std::printf("artifacts: %s\n", artifacts.metrics_path.c_str());
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& lambdas_arg,
              const std::string& sweep_out) {
  std::vector<double> lambdas;
  for (const auto& field : csv::split_line(lambdas_arg, ',')) {
    lambdas.push_back(csv::parse_double(field));
  }
  const auto rows = sweep(cfg, lambdas, sweep_out);
  for (const auto& row : rows) {
    if (row.ok) {
      std::printf("lambda=%-8s ndcg=%.4f upd=%.4f ad=%.4f ee=%.4f\n",
                  csv::format_double(row.lambda).c_str(), row.report.ndcg, row.report.upd,
                  row.report.ad, row.report.ee);
    } else {
      std::printf("lambda=%-8s FAILED: %s\n", csv::format_double(row.lambda).c_str(),
                  row.error.c_str());
    }
  }
  std::printf("sweep table: %s\n", sweep_out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness-aware pairwise-ranking recommender harness"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a Zipf-skewed synthetic dataset");
  std::uint32_t synth_users = 200, synth_items = 100;
  std::size_t synth_interactions = 8000;
  double synth_zipf = 1.2;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synth.tsv";
  synth_cmd->add_option("--users", synth_users, "number of users");
  synth_cmd->add_option("--items", synth_items, "number of items");
  synth_cmd->add_option("--interactions", synth_interactions, "number of distinct interactions");
  synth_cmd->add_option("--zipf", synth_zipf, "Zipf skew exponent (0 = uniform)");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--out", synth_out, "output interaction file");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate and summarize a dataset");
  ConfigFlags ingest_flags;
  ingest_flags.attach(ingest_cmd);
  std::string grouping_out;
  ingest_cmd->add_option("--grouping-out", grouping_out, "write item_id,count,group CSV");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint and loss trace");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);

  // recommend
  auto* rec_cmd = app.add_subcommand("recommend", "produce top-K lists from a checkpoint");
  ConfigFlags rec_flags;
  rec_flags.attach(rec_cmd);
  std::string checkpoint_path, recs_out = "recommendations.csv";
  rec_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  rec_cmd->add_option("--recs-out", recs_out, "recommendation dump path");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a recommendation dump");
  ConfigFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::string recs_path, metrics_out;
  eval_cmd->add_option("--recs", recs_path, "recommendation dump to evaluate")->required();
  eval_cmd->add_option("--metrics-out", metrics_out, "also write a metrics CSV row");

  // run
  auto* run_cmd = app.add_subcommand("run", "end-to-end: train, recommend, evaluate");
  ConfigFlags run_flags;
  run_flags.attach(run_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run one experiment per lambda");
  ConfigFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string lambdas_arg, sweep_out = "sweep.csv";
  sweep_cmd->add_option("--lambdas", lambdas_arg, "comma-separated lambda values")->required();
  sweep_cmd->add_option("--sweep-out", sweep_out, "sweep table path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      const InteractionDataset ds =
          synth_dataset(synth_users, synth_items, synth_interactions, synth_zipf, synth_seed);
      write_interactions(synth_out, ds);
      std::printf("wrote %zu interactions (%u users, %u items) to %s\n", ds.num_interactions(),
                  ds.num_users(), ds.num_items(), synth_out.c_str());
      return 0;
    }
    if (ingest_cmd->parsed()) return cmd_ingest(ingest_flags.build(), grouping_out);
    if (train_cmd->parsed()) return cmd_train(train_flags.build());
    if (rec_cmd->parsed()) return cmd_recommend(rec_flags.build(), checkpoint_path, recs_out);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_flags.build(), recs_path, metrics_out);
    if (run_cmd->parsed()) return cmd_run(run_flags.build());
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags.build(), lambdas_arg, sweep_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
