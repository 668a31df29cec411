#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairrec {

// Factor rows are accessed one entity at a time, so row-major storage keeps
// them contiguous.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TrainConfig {
  double learning_rate = 1e-4;
  int dim = 128;
  int epochs = 200;
  int batch_size = 1024;
  double l2_reg = 1e-4;
  std::uint64_t seed = 42;

  void validate() const;
};

// Matrix-factorization scoring model: score(u, i) is the inner product of the
// two factor rows. No bias terms.
struct FactorModel {
  RowMatrixXd user_factors;  // n x d
  RowMatrixXd item_factors;  // m x d

  std::uint32_t num_users() const { return static_cast<std::uint32_t>(user_factors.rows()); }
  std::uint32_t num_items() const { return static_cast<std::uint32_t>(item_factors.rows()); }
  int dim() const { return static_cast<int>(user_factors.cols()); }
};

// Entries drawn i.i.d. normal(0, 0.1), deterministic given cfg.seed.
FactorModel init_model(const TrainConfig& cfg, std::uint32_t n, std::uint32_t m);

double score(const FactorModel& model, std::uint32_t user, std::uint32_t item);

// Predicted scores of every item for one user.
Eigen::VectorXd score_all_items(const FactorModel& model, std::uint32_t user);

struct ScoredItem {
  std::uint32_t item = 0;
  double score = 0.0;
};

struct TopKResult {
  std::vector<ScoredItem> items;  // ordered by (score desc, item asc)
  bool truncated = false;         // fewer than K eligible items existed
};

// The K highest-scoring items not in `exclude` (ascending item indices).
// Ties break toward the lower item index, so rankings are stable across runs.
TopKResult recommend_topk(const FactorModel& model, std::uint32_t user, int k,
                          std::span<const std::uint32_t> exclude);

// Same selection applied to an explicit score vector.
TopKResult topk_from_scores(const Eigen::VectorXd& scores, int k,
                            std::span<const std::uint32_t> exclude);

// Binary checkpoint: 8-byte magic "FRECMF01", then five little-endian u64
// fields (n, m, d, seed, epoch), then n*d + m*d doubles, row-major, user
// factors first. The layout is stable; byte equality of two checkpoints means
// identical models.
void save_checkpoint(const std::string& path, const FactorModel& model, std::uint64_t seed,
                     std::uint64_t epoch);

struct Checkpoint {
  FactorModel model;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fairrec
