#include "fairrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fairrec/csv.hpp"

namespace fairrec {

namespace fs = std::filesystem;

Method parse_method(const std::string& name) {
  if (name == "BPR" || name == "bpr") return Method::BPR;
  if (name == "ILE" || name == "ile") return Method::ILE;
  if (name == "IPS" || name == "ips") return Method::IPS;
  if (name == "CP" || name == "cp") return Method::CP;
  if (name == "PUFR" || name == "pufr") return Method::PUFR;
  throw std::invalid_argument("unknown method: " + name);
}

const char* method_name(Method method) {
  switch (method) {
    case Method::BPR: return "BPR";
    case Method::ILE: return "ILE";
    case Method::IPS: return "IPS";
    case Method::CP: return "CP";
    default: return "PUFR";
  }
}

void ExperimentConfig::validate() const {
  train.validate();
  ile.validate();
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw std::invalid_argument("train_ratio must be in (0, 1)");
  }
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  switch (method) {
    case Method::ILE:
      if (ile.distance == DistanceKind::None && ile.lambda > 0.0) {
        throw std::invalid_argument("ILE with lambda > 0 needs a distance function");
      }
      break;
    case Method::CP:
      if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) {
        throw std::invalid_argument("CP lambda must be in [0, 1]");
      }
      if (params.long_list < top_k) throw std::invalid_argument("CP long list must be >= top_k");
      break;
    case Method::PUFR: {
      if (params.lambda < 0.0) throw std::invalid_argument("PUFR lambda must be >= 0");
      if (params.long_list < top_k) throw std::invalid_argument("PUFR long list must be >= top_k");
      if (params.pufr_seeds.size() != 5 ||
          std::set<std::uint64_t>(params.pufr_seeds.begin(), params.pufr_seeds.end()).size() != 5) {
        throw std::invalid_argument("PUFR needs 5 distinct seeds");
      }
      break;
    }
    case Method::IPS:
      if (params.ips_gamma < 0.0) throw std::invalid_argument("ips_gamma must be >= 0");
      if (!(params.ips_clip > 0.0)) throw std::invalid_argument("ips_clip must be > 0");
      break;
    case Method::BPR:
      break;
  }
}

std::string ExperimentConfig::params_string() const {
  std::string out;
  switch (method) {
    case Method::BPR:
      return "-";
    case Method::ILE:
      return "lambda=" + csv::format_double(ile.lambda) + ";D=" + distance_name(ile.distance);
    case Method::IPS:
      return "gamma=" + csv::format_double(params.ips_gamma) +
             ";clip=" + csv::format_double(params.ips_clip);
    case Method::CP:
      return "lambda=" + csv::format_double(params.lambda) +
             ";N=" + std::to_string(params.long_list);
    default:  // PUFR
      return "lambda=" + csv::format_double(params.lambda) +
             ";N=" + std::to_string(params.long_list);
  }
}

std::string ExperimentConfig::run_tag() const {
  std::string slug = params_string();
  if (slug == "-") slug.clear();
  std::string tag = method_name(method);
  if (!slug.empty()) tag += '_';
  for (const char c : slug) {
    if (c == '=') continue;
    tag += (c == ';') ? '_' : c;
  }
  tag += "_seed" + std::to_string(train.seed);
  return tag;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto to_u64 = [&](const std::string& v) { return static_cast<std::uint64_t>(csv::parse_int(v)); };
  auto to_int = [&](const std::string& v) { return static_cast<int>(csv::parse_int(v)); };

  if (key == "dataset") cfg.dataset_path = value;
  else if (key == "format") cfg.format = parse_dataset_format(value);
  else if (key == "delimiter") cfg.delimiter = parse_delimiter(value);
  else if (key == "train_ratio") cfg.train_ratio = csv::parse_double(value);
  else if (key == "split_seed") cfg.split_seed = to_u64(value);
  else if (key == "learning_rate") cfg.train.learning_rate = csv::parse_double(value);
  else if (key == "dim") cfg.train.dim = to_int(value);
  else if (key == "epochs") cfg.train.epochs = to_int(value);
  else if (key == "batch_size") cfg.train.batch_size = to_int(value);
  else if (key == "l2_reg") cfg.train.l2_reg = csv::parse_double(value);
  else if (key == "seed") cfg.train.seed = to_u64(value);
  else if (key == "method") cfg.method = parse_method(value);
  else if (key == "lambda") { cfg.ile.lambda = csv::parse_double(value); cfg.params.lambda = cfg.ile.lambda; }
  else if (key == "distance") cfg.ile.distance = parse_distance(value);
  else if (key == "ent_floor") cfg.ile.ent_floor = csv::parse_double(value);
  else if (key == "long_list") cfg.params.long_list = to_int(value);
  else if (key == "ips_gamma") cfg.params.ips_gamma = csv::parse_double(value);
  else if (key == "ips_clip") cfg.params.ips_clip = csv::parse_double(value);
  else if (key == "pufr_seeds") {
    cfg.params.pufr_seeds.clear();
    for (const auto& field : csv::split_line(value, ',')) cfg.params.pufr_seeds.push_back(to_u64(field));
  }
  else if (key == "top_k") cfg.top_k = to_int(value);
  else if (key == "output_dir") cfg.output_dir = value;
  else throw std::invalid_argument("unknown config key: " + key);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_config_entry(cfg, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

void write_timings_csv(const std::string& path, const PhaseTimings& timings) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write timings CSV: " + path);
  csv::write_row(out, {"phase", "ms"});
  csv::write_row(out, {"load", csv::format_double(timings.load_ms)});
  csv::write_row(out, {"train", csv::format_double(timings.train_ms)});
  csv::write_row(out, {"recommend", csv::format_double(timings.recommend_ms)});
  csv::write_row(out, {"rerank", csv::format_double(timings.rerank_ms)});
  csv::write_row(out, {"evaluate", csv::format_double(timings.evaluate_ms)});
  csv::write_row(out, {"total", csv::format_double(timings.total_ms)});
}

GroupLossTrace train_for_method(FactorModel& model, const InteractionDataset& train,
                                const PopularityGrouping& grouping, const ExperimentConfig& cfg) {
  EpochCallback on_epoch;
  if (cfg.verbose) {
    on_epoch = [](const TraceRow& row) {
      std::fprintf(stderr, "epoch %d  L=%.6f  H=%.6f M=%.6f T=%.6f  D=%.6f\n", row.epoch,
                   row.average_loss, row.head_loss, row.mid_loss, row.tail_loss,
                   row.distance_value);
    };
  }
  switch (cfg.method) {
    case Method::ILE:
      return train_model(model, train, grouping, cfg.train, cfg.ile, nullptr, on_epoch);
    case Method::IPS: {
      const PropensityTable table =
          build_propensities(grouping, cfg.params.ips_gamma, cfg.params.ips_clip);
      return train_model(model, train, grouping, cfg.train, IleConfig{}, &table.weight, on_epoch);
    }
    default:  // BPR, CP, PUFR train the plain pairwise model
      return train_model(model, train, grouping, cfg.train, IleConfig{}, nullptr, on_epoch);
  }
}

namespace {

class PhaseClock {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

RecommendationSet recommend_for_method(const FactorModel& model, const SplitDataset& split,
                                       const PopularityGrouping& grouping,
                                       const ExperimentConfig& cfg,
                                       const UncertaintyTable* uncertainty,
                                       PhaseTimings* timings) {
  const InteractionDataset& train = split.train;
  const bool post_processed = cfg.method == Method::CP || cfg.method == Method::PUFR;
  const int base_k = post_processed ? cfg.params.long_list : cfg.top_k;
  if (post_processed && cfg.method == Method::PUFR && uncertainty == nullptr) {
    throw std::invalid_argument("PUFR needs an uncertainty table");
  }

  PhaseClock clock;
  RecommendationSet base;
  base.k = base_k;
  base.lists.resize(train.num_users());
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    base.lists[u] = recommend_topk(model, u, base_k, train.items_of(u)).items;
  }
  if (timings != nullptr) timings->recommend_ms += clock.lap_ms();
  if (!post_processed) {
    return base;
  }

  RecommendationSet recs;
  recs.k = cfg.top_k;
  recs.lists.resize(train.num_users());
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    const auto& candidates = base.lists[u];
    if (candidates.empty()) continue;
    if (cfg.method == Method::CP) {
      if (candidates.size() < static_cast<std::size_t>(cfg.top_k) || train.items_of(u).empty()) {
        // Too few candidates to select from, or no profile to calibrate
        // against: keep the head of the base ranking.
        recs.lists[u].assign(
            candidates.begin(),
            candidates.begin() + std::min<std::size_t>(candidates.size(), cfg.top_k));
      } else {
        recs.lists[u] = cp_rerank(candidates, profile_distribution(u, train, grouping), grouping,
                                  cfg.params.lambda, cfg.top_k);
      }
    } else {
      recs.lists[u] = pufr_rerank(candidates, *uncertainty, grouping, cfg.params.lambda,
                                  cfg.top_k);
    }
  }
  if (timings != nullptr) timings->rerank_ms += clock.lap_ms();
  return recs;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t uncertainty_cache_key(const InteractionDataset& train, const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t shape[2] = {train.num_users(), train.num_items()};
  h = fnv1a(h, shape, sizeof(shape));
  h = fnv1a(h, train.interactions().data(),
            train.interactions().size() * sizeof(Interaction));
  const double real_fields[2] = {cfg.train.learning_rate, cfg.train.l2_reg};
  h = fnv1a(h, real_fields, sizeof(real_fields));
  const std::uint64_t int_fields[3] = {static_cast<std::uint64_t>(cfg.train.dim),
                                       static_cast<std::uint64_t>(cfg.train.epochs),
                                       static_cast<std::uint64_t>(cfg.train.batch_size)};
  h = fnv1a(h, int_fields, sizeof(int_fields));
  h = fnv1a(h, cfg.params.pufr_seeds.data(),
            cfg.params.pufr_seeds.size() * sizeof(std::uint64_t));
  return h;
}

}  // namespace

UncertaintyTable cached_uncertainty(const InteractionDataset& train,
                                    const PopularityGrouping& grouping,
                                    const ExperimentConfig& cfg) {
  char name[64];
  std::snprintf(name, sizeof(name), "uncertainty_%016llx.csv",
                static_cast<unsigned long long>(uncertainty_cache_key(train, cfg)));
  const fs::path cache_dir = fs::path(cfg.output_dir) / "cache";
  const fs::path cache_file = cache_dir / name;

  if (fs::exists(cache_file)) {
    UncertaintyTable table;
    table.uncertainty = read_item_values_csv(cache_file.string(), train);
    table.seeds_used = cfg.params.pufr_seeds;
    return table;
  }
  UncertaintyTable table = estimate_uncertainty(train, grouping, cfg.train, cfg.params.pufr_seeds);
  fs::create_directories(cache_dir);
  write_item_values_csv(cache_file.string(), table.uncertainty, train);
  return table;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);

  const std::string tag = cfg.run_tag();
  RunArtifacts artifacts;
  artifacts.metrics_path = (fs::path(cfg.output_dir) / (tag + ".metrics.csv")).string();
  artifacts.trace_path = (fs::path(cfg.output_dir) / (tag + ".trace.csv")).string();
  artifacts.checkpoint_path = (fs::path(cfg.output_dir) / (tag + ".ckpt")).string();
  artifacts.recommendations_path = (fs::path(cfg.output_dir) / (tag + ".recs.csv")).string();
  artifacts.timings_path = (fs::path(cfg.output_dir) / (tag + ".timings.csv")).string();

  std::string phase = "load";
  try {
    PhaseClock total_clock;
    PhaseClock clock;

    const InteractionDataset full = load_interactions(cfg.dataset_path, cfg.format, cfg.delimiter);
    if (cfg.top_k > static_cast<int>(full.num_items())) {
      throw std::invalid_argument("top_k exceeds the catalog size");
    }
    const SplitDataset split = split_train_test(full, cfg.train_ratio, cfg.split_seed);
    const PopularityGrouping grouping = assign_popularity_groups(split.train);
    artifacts.timings.load_ms = clock.lap_ms();

    phase = "train";
    FactorModel model = init_model(cfg.train, full.num_users(), full.num_items());
    artifacts.trace = train_for_method(model, split.train, grouping, cfg);
    artifacts.timings.train_ms = clock.lap_ms();

    phase = "recommend";
    UncertaintyTable uncertainty;
    if (cfg.method == Method::PUFR) {
      // Uncertainty estimation (or its cache hit) belongs to the rerank cost.
      clock.lap_ms();
      uncertainty = cached_uncertainty(split.train, grouping, cfg);
      artifacts.timings.rerank_ms += clock.lap_ms();
    }
    clock.lap_ms();
    const RecommendationSet recs =
        recommend_for_method(model, split, grouping, cfg,
                             cfg.method == Method::PUFR ? &uncertainty : nullptr,
                             &artifacts.timings);

    phase = "evaluate";
    clock.lap_ms();
    artifacts.report = evaluate_all(recs, split.train, split.test, grouping);
    artifacts.timings.evaluate_ms = clock.lap_ms();

    phase = "write";
    write_trace_csv(artifacts.trace_path, artifacts.trace);
    save_checkpoint(artifacts.checkpoint_path, model, cfg.train.seed,
                    static_cast<std::uint64_t>(cfg.train.epochs));
    write_recommendations_csv(artifacts.recommendations_path, recs, full);
    write_metrics_csv(artifacts.metrics_path, method_name(cfg.method), cfg.params_string(),
                      artifacts.report);
    artifacts.timings.total_ms = total_clock.lap_ms();
    write_timings_csv(artifacts.timings_path, artifacts.timings);
    return artifacts;
  } catch (const std::exception& e) {
    for (const auto& path :
         {artifacts.metrics_path, artifacts.trace_path, artifacts.checkpoint_path,
          artifacts.recommendations_path, artifacts.timings_path}) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    throw std::runtime_error("[" + phase + "] " + e.what());
  }
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, std::span<const double> lambdas,
                            const std::string& csv_path) {
  if (lambdas.empty()) throw std::invalid_argument("sweep needs at least one lambda");
  if (base.method == Method::BPR || base.method == Method::IPS) {
    throw std::invalid_argument("sweep requires a method with a lambda (ILE, CP or PUFR)");
  }

  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (const double lambda : lambdas) {
    ExperimentConfig cfg = base;
    if (cfg.method == Method::ILE) {
      cfg.ile.lambda = lambda;
    } else {
      cfg.params.lambda = lambda;
    }
    SweepRow row;
    row.lambda = lambda;
    try {
      row.report = run_experiment(cfg).report;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write sweep CSV: " + csv_path);
  csv::write_row(out, {"lambda", "ndcg", "upd", "ad", "ee", "status"});
  for (const auto& row : rows) {
    if (row.ok) {
      csv::write_row(out, {csv::format_double(row.lambda), csv::format_double(row.report.ndcg),
                           csv::format_double(row.report.upd), csv::format_double(row.report.ad),
                           csv::format_double(row.report.ee), "ok"});
    } else {
      csv::write_row(out,
                     {csv::format_double(row.lambda), "", "", "", "", "failed"});
    }
  }
  return rows;
}

}  // namespace fairrec
