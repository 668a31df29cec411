// Acceptance suite: one line per criterion, [PASS]/[FAIL]/[SKIP], nonzero
// exit on any failure. Criteria 3-5 share one set of synthetic training runs;
// the shared cost is charged to the first criterion that needs it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fairrec/baselines.hpp"
#include "fairrec/csv.hpp"
#include "fairrec/dataset.hpp"
#include "fairrec/experiment.hpp"
#include "fairrec/group_loss.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/model.hpp"
#include "fairrec/synth.hpp"
#include "fairrec/trainer.hpp"

#include "helpers.hpp"

namespace {

using namespace fairrec;

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

// ---- shared synthetic experiment (criteria 2-5) ---------------------------

constexpr std::uint32_t kSynthUsers = 200;
constexpr std::uint32_t kSynthItems = 100;
constexpr std::size_t kSynthInteractions = 8000;
constexpr double kSynthZipf = 1.2;
constexpr std::uint64_t kSynthSeed = 7;
constexpr std::uint64_t kSplitSeed = 13;

TrainConfig synth_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 100;
  cfg.batch_size = 128;
  // Per-pair steps scale as learning_rate / batch_size; 0.5 converges well
  // within 100 epochs at this scale.
  cfg.learning_rate = 0.5;
  cfg.l2_reg = 1e-4;
  cfg.seed = seed;
  return cfg;
}

struct SynthRun {
  GroupLossTrace trace;
  MetricsReport report;
};

struct SynthRuns {
  std::vector<SynthRun> bpr;  // seeds 1..3
  std::vector<SynthRun> ile;  // same seeds, lambda 0.25 / STD
};

const SynthRuns& shared_runs() {
  static const SynthRuns runs = [] {
    const InteractionDataset full =
        synth_dataset(kSynthUsers, kSynthItems, kSynthInteractions, kSynthZipf, kSynthSeed);
    const SplitDataset split = split_train_test(full, 0.8, kSplitSeed);
    const PopularityGrouping grouping = assign_popularity_groups(split.train);

    auto one = [&](std::uint64_t seed, const IleConfig& ile) {
      const TrainConfig cfg = synth_train_config(seed);
      FactorModel model = init_model(cfg, full.num_users(), full.num_items());
      SynthRun run;
      run.trace = train_model(model, split.train, grouping, cfg, ile);
      RecommendationSet recs;
      recs.k = 10;
      recs.lists.resize(full.num_users());
      for (std::uint32_t u = 0; u < full.num_users(); ++u) {
        recs.lists[u] = recommend_topk(model, u, recs.k, split.train.items_of(u)).items;
      }
      run.report = evaluate_all(recs, split.train, split.test, grouping);
      return run;
    };

    IleConfig equalized;
    equalized.lambda = 0.25;
    equalized.distance = DistanceKind::Std;

    SynthRuns runs;
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      runs.bpr.push_back(one(seed, IleConfig{}));
      runs.ile.push_back(one(seed, equalized));
    }
    return runs;
  }();
  return runs;
}

double final_group_std(const SynthRun& run) {
  const TraceRow& last = run.trace.rows.back();
  const std::vector<double> values{last.head_loss, last.mid_loss, last.tail_loss};
  return distance(values, DistanceKind::Std);
}

// ---- criteria --------------------------------------------------------------

// 1. Analytic gradient of the combined objective vs central differences.
Outcome criterion_gradient_fidelity() {
  const auto train = testutil::random_dataset(10, 20, 120, 2024);
  const auto grouping = assign_popularity_groups(train);
  std::mt19937_64 seeds(1);

  double worst = 0.0;
  for (int round = 0; round < 100; ++round) {
    const auto model = testutil::random_model(10, 20, 4, seeds());
    const auto batch = testutil::random_batch(train, 64, seeds());
    for (const auto kind : {DistanceKind::Std, DistanceKind::Ent, DistanceKind::Mad}) {
      IleConfig ile;
      ile.lambda = 0.05 + 0.45 * (round % 10) / 10.0;
      ile.distance = kind;
      const auto analytic = testutil::analytic_batch_gradient(model, batch, grouping, ile);
      const auto fd = testutil::fd_batch_gradient(model, batch, grouping, ile, 1e-5);
      worst = std::max(worst, testutil::relative_error(analytic, fd));
    }
  }
  Outcome out;
  out.pass = worst < 1e-4;
  out.detail = "worst relative error " + csv::format_double(worst) + " over 300 checks";
  return out;
}

// 2. lambda=0 equalized training == plain training, checkpoint bytes.
Outcome criterion_degenerate_equivalence() {
  const InteractionDataset full =
      synth_dataset(kSynthUsers, kSynthItems, kSynthInteractions, kSynthZipf, kSynthSeed);
  const SplitDataset split = split_train_test(full, 0.8, kSplitSeed);
  const PopularityGrouping grouping = assign_popularity_groups(split.train);

  TrainConfig cfg = synth_train_config(42);
  cfg.epochs = 5;

  const auto train_and_dump = [&](const IleConfig& ile, const std::string& path) {
    FactorModel model = init_model(cfg, full.num_users(), full.num_items());
    train_model(model, split.train, grouping, cfg, ile);
    save_checkpoint(path, model, cfg.seed, cfg.epochs);
  };

  testutil::TempDir tmp("acc2");
  IleConfig zero;
  zero.lambda = 0.0;
  zero.distance = DistanceKind::Std;  // goes through the equalization code path
  train_and_dump(IleConfig{}, tmp.path("plain.ckpt"));
  train_and_dump(zero, tmp.path("lambda0.ckpt"));

  std::ifstream a(tmp.path("plain.ckpt"), std::ios::binary);
  std::ifstream b(tmp.path("lambda0.ckpt"), std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});

  Outcome out;
  out.pass = !bytes_a.empty() && bytes_a == bytes_b;
  out.detail = "checkpoints " + std::to_string(bytes_a.size()) + " bytes, " +
               (out.pass ? "identical" : "DIFFER");
  return out;
}

// 3. Plain training leaves Head below Tail loss on the skewed synthetic set.
Outcome criterion_group_loss_gap() {
  int hits = 0;
  std::string gaps;
  for (const auto& run : shared_runs().bpr) {
    const TraceRow& last = run.trace.rows.back();
    if (last.head_loss < last.tail_loss) ++hits;
    gaps += " H=" + csv::format_double(last.head_loss) + "/T=" + csv::format_double(last.tail_loss);
  }
  Outcome out;
  out.pass = hits == 3;
  out.detail = std::to_string(hits) + "/3 seeds show L_Head < L_Tail;" + gaps;
  return out;
}

// 4. Equalization shrinks the final-epoch loss dispersion.
Outcome criterion_equalization() {
  const auto& runs = shared_runs();
  double base = 0.0, equalized = 0.0;
  for (int s = 0; s < 3; ++s) {
    base += final_group_std(runs.bpr[s]);
    equalized += final_group_std(runs.ile[s]);
  }
  base /= 3.0;
  equalized /= 3.0;
  Outcome out;
  out.pass = equalized < base;
  out.detail = "mean final-epoch std(L_g): plain " + csv::format_double(base) + " -> equalized " +
               csv::format_double(equalized);
  return out;
}

// 5. Fairness direction on the synthetic set: UPD down, AD up.
Outcome criterion_fairness_direction() {
  const auto& runs = shared_runs();
  double upd_base = 0.0, upd_eq = 0.0, ad_base = 0.0, ad_eq = 0.0;
  for (int s = 0; s < 3; ++s) {
    upd_base += runs.bpr[s].report.upd;
    upd_eq += runs.ile[s].report.upd;
    ad_base += runs.bpr[s].report.ad;
    ad_eq += runs.ile[s].report.ad;
  }
  Outcome out;
  out.pass = upd_eq <= upd_base && ad_eq >= ad_base;
  out.detail = "UPD " + csv::format_double(upd_base / 3) + " -> " + csv::format_double(upd_eq / 3) +
               ", AD " + csv::format_double(ad_base / 3) + " -> " + csv::format_double(ad_eq / 3);
  return out;
}

// 6. Metric oracles on exhaustive tiny instances.
Outcome criterion_metric_oracles() {
  const std::uint32_t n = 5, m = 8;
  const int k = 3;
  std::mt19937_64 rng(99);

  std::vector<Interaction> train_pairs, test_pairs;
  for (std::uint32_t u = 0; u < n; ++u) {
    std::vector<std::uint32_t> items(m);
    std::iota(items.begin(), items.end(), 0);
    std::shuffle(items.begin(), items.end(), rng);
    train_pairs.push_back({u, items[0]});
    train_pairs.push_back({u, items[1]});
    train_pairs.push_back({u, items[2]});
    if (u != 2) {
      test_pairs.push_back({u, items[3]});
      if (u % 2 == 0) test_pairs.push_back({u, items[4]});
    }
  }
  std::vector<std::string> user_ids, item_ids;
  for (std::uint32_t u = 0; u < n; ++u) user_ids.push_back(std::to_string(u));
  for (std::uint32_t i = 0; i < m; ++i) item_ids.push_back(std::to_string(i));
  const InteractionDataset train(train_pairs, user_ids, item_ids);
  const InteractionDataset test(test_pairs, user_ids, item_ids);
  const auto grouping = assign_popularity_groups(train);

  std::vector<std::array<std::uint32_t, 3>> lists;
  for (std::uint32_t a = 0; a < m; ++a)
    for (std::uint32_t b = 0; b < m; ++b)
      for (std::uint32_t c = 0; c < m; ++c)
        if (a != b && a != c && b != c) lists.push_back({a, b, c});

  double worst = 0.0;
  std::size_t instances = 0;
  // Every possible ranked list occurs for every user (offsets keep the five
  // users on different lists within one instance).
  for (std::size_t base = 0; base < lists.size(); ++base) {
    RecommendationSet recs;
    recs.k = k;
    recs.lists.resize(n);
    for (std::uint32_t u = 0; u < n; ++u) {
      for (const auto item : lists[(base + 67 * u) % lists.size()]) {
        recs.lists[u].push_back({item, 1.0});
      }
    }
    ++instances;
    worst = std::max(worst, std::abs(ndcg_at_k(recs, test, k) -
                                     testutil::oracle_ndcg(recs, test, k)));
    worst = std::max(worst, std::abs(upd(recs, train, grouping) -
                                     testutil::oracle_upd(recs, train, grouping)));
    worst = std::max(worst,
                     std::abs(aggregate_diversity(recs, m) - testutil::oracle_ad(recs, m)));
    worst = std::max(worst,
                     std::abs(equality_of_exposure(recs, m) - testutil::oracle_ee(recs, m)));
  }
  Outcome out;
  out.pass = worst <= 1e-12;
  out.detail = "worst |delta| " + csv::format_double(worst) + " over " +
               std::to_string(instances) + " exhaustive instances x 4 metrics";
  return out;
}

// 7. Re-rankers at lambda 0 reproduce the base top-K; CP invariants hold.
Outcome criterion_reranker_contracts() {
  std::mt19937_64 rng(314);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t checked = 0;

  for (int round = 0; round < 200; ++round) {
    const std::uint32_t m = 12 + rng() % 24;
    std::vector<std::uint32_t> counts(m);
    for (auto& c : counts) c = static_cast<std::uint32_t>(rng() % 40);
    counts[rng() % m] = 50;
    const auto grouping = PopularityGrouping::from_counts(counts);

    Eigen::VectorXd scores(m);
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores[i] = normal(rng);
    const int k = 1 + static_cast<int>(rng() % 8);
    const int n_long = k + static_cast<int>(rng() % (m - k));

    const TopKResult base = topk_from_scores(scores, n_long, {});
    const TopKResult want = topk_from_scores(scores, k, {});

    UncertaintyTable table;
    table.uncertainty.resize(m);
    for (auto& u : table.uncertainty) u = std::abs(normal(rng));
    table.seeds_used = {1, 2, 3, 4, 5};

    const GroupDistribution profile{0.2, 0.5, 0.3};
    const auto cp = cp_rerank(base.items, profile, grouping, 0.0, k);
    const auto pufr = pufr_rerank(base.items, table, grouping, 0.0, k);

    if (cp.size() != static_cast<std::size_t>(k)) return {false, false, "CP size violation"};
    std::set<std::uint32_t> cp_items;
    for (std::size_t r = 0; r < cp.size(); ++r) {
      if (cp[r].item != want.items[r].item) return {false, false, "CP lambda=0 mismatch"};
      cp_items.insert(cp[r].item);
      bool in_long = false;
      for (const auto& c : base.items) in_long = in_long || c.item == cp[r].item;
      if (!in_long) return {false, false, "CP picked outside the long list"};
    }
    if (cp_items.size() != cp.size()) return {false, false, "CP duplicate items"};
    for (std::size_t r = 0; r < pufr.size(); ++r) {
      if (pufr[r].item != want.items[r].item) return {false, false, "PUFR lambda=0 mismatch"};
    }
    ++checked;
  }
  return {true, false, std::to_string(checked) + " random instances, contracts hold"};
}

// 8. Full-scale directional reproduction (optional: needs the MovieLens1M
// ratings file; gated on FAIRREC_ML1M).
Outcome criterion_fullscale() {
  const char* path = std::getenv("FAIRREC_ML1M");
  if (path == nullptr || !std::filesystem::exists(path)) {
    Outcome out;
    out.skipped = true;
    out.detail = "set FAIRREC_ML1M=<path to ml-1m ratings.dat> to run (tens of minutes)";
    return out;
  }

  const InteractionDataset full = load_interactions(path);
  const SplitDataset split = split_train_test(full, 0.8, 42);
  const PopularityGrouping grouping = assign_popularity_groups(split.train);

  TrainConfig cfg;  // reference hyperparameters: lr 1e-4, d 128, 200 epochs
  cfg.learning_rate = 1e-4;
  cfg.dim = 128;
  cfg.epochs = 200;
  cfg.batch_size = 64;  // unspecified upstream; small batches keep SGD moving
  cfg.seed = 1;

  const auto run = [&](const IleConfig& ile) {
    FactorModel model = init_model(cfg, full.num_users(), full.num_items());
    train_model(model, split.train, grouping, cfg, ile);
    RecommendationSet recs;
    recs.k = 10;
    recs.lists.resize(full.num_users());
    for (std::uint32_t u = 0; u < full.num_users(); ++u) {
      recs.lists[u] = recommend_topk(model, u, recs.k, split.train.items_of(u)).items;
    }
    return evaluate_all(recs, split.train, split.test, grouping);
  };

  const MetricsReport bpr = run(IleConfig{});
  IleConfig equalized;
  equalized.lambda = 0.25;
  equalized.distance = DistanceKind::Std;
  const MetricsReport ile = run(equalized);

  const bool bpr_near = std::abs(bpr.ndcg - 0.2686) <= 0.2 * 0.2686 &&
                        std::abs(bpr.upd - 0.1208) <= 0.2 * 0.1208;
  const bool ile_improves = ile.upd <= 0.75 * bpr.upd && ile.ndcg >= 0.8 * bpr.ndcg;

  Outcome out;
  out.pass = bpr_near && ile_improves;
  out.detail = "BPR ndcg=" + csv::format_double(bpr.ndcg) + " upd=" + csv::format_double(bpr.upd) +
               "; ILE ndcg=" + csv::format_double(ile.ndcg) + " upd=" + csv::format_double(ile.upd);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient fidelity (STD/ENT/MAD vs finite differences)", 10.0,
       criterion_gradient_fidelity},
      {2, "degenerate equivalence (lambda=0 == plain, checkpoint bytes)", 30.0,
       criterion_degenerate_equivalence},
      {3, "group loss gap on skewed synthetic data (3 seeds)", 120.0, criterion_group_loss_gap},
      {4, "equalization shrinks group-loss dispersion", 240.0, criterion_equalization},
      {5, "fairness direction: UPD down, AD up", 240.0, criterion_fairness_direction},
      {6, "metric oracles on exhaustive tiny instances", 60.0, criterion_metric_oracles},
      {7, "re-ranker contracts at lambda 0", 30.0, criterion_reranker_contracts},
      {8, "full-scale directional reproduction (optional)", 36000.0, criterion_fullscale},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const bool in_budget = seconds <= criterion.limit_seconds;
    const char* verdict = outcome.skipped ? "SKIP" : (outcome.pass && in_budget ? "PASS" : "FAIL");
    if (!outcome.skipped && !(outcome.pass && in_budget)) ++failures;
    std::printf("[%s] %d. %s — %s (%.2fs%s)\n", verdict, criterion.id, criterion.name,
                outcome.detail.c_str(), seconds, in_budget ? "" : ", OVER TIME BUDGET");
  }
  return failures == 0 ? 0 : 1;
}
