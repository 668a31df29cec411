#include "fairrec/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fairrec/rng.hpp"

namespace fairrec {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (l2_reg < 0.0) throw std::invalid_argument("l2_reg must be >= 0");
}

FactorModel init_model(const TrainConfig& cfg, std::uint32_t n, std::uint32_t m) {
  cfg.validate();
  if (n == 0 || m == 0) throw std::invalid_argument("model needs n > 0 and m > 0");
  FactorModel model;
  model.user_factors.resize(n, cfg.dim);
  model.item_factors.resize(m, cfg.dim);
  Rng rng(mix_seed(cfg.seed, kInitStream));
  for (Eigen::Index r = 0; r < model.user_factors.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.user_factors.cols(); ++c) {
      model.user_factors(r, c) = rng.normal(0.0, 0.1);
    }
  }
  for (Eigen::Index r = 0; r < model.item_factors.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.item_factors.cols(); ++c) {
      model.item_factors(r, c) = rng.normal(0.0, 0.1);
    }
  }
  return model;
}

double score(const FactorModel& model, std::uint32_t user, std::uint32_t item) {
  return model.user_factors.row(user).dot(model.item_factors.row(item));
}

Eigen::VectorXd score_all_items(const FactorModel& model, std::uint32_t user) {
  return model.item_factors * model.user_factors.row(user).transpose();
}

TopKResult topk_from_scores(const Eigen::VectorXd& scores, int k,
                            std::span<const std::uint32_t> exclude) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto m = static_cast<std::uint32_t>(scores.size());

  std::vector<std::uint32_t> eligible;
  eligible.reserve(m);
  std::size_t e = 0;
  for (std::uint32_t i = 0; i < m; ++i) {
    while (e < exclude.size() && exclude[e] < i) ++e;
    if (e < exclude.size() && exclude[e] == i) continue;
    eligible.push_back(i);
  }

  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), eligible.size());
  std::partial_sort(eligible.begin(), eligible.begin() + take, eligible.end(), better);

  TopKResult result;
  result.truncated = eligible.size() < static_cast<std::size_t>(k);
  result.items.reserve(take);
  for (std::size_t r = 0; r < take; ++r) result.items.push_back({eligible[r], scores[eligible[r]]});
  return result;
}

TopKResult recommend_topk(const FactorModel& model, std::uint32_t user, int k,
                          std::span<const std::uint32_t> exclude) {
  return topk_from_scores(score_all_items(model, user), k, exclude);
}

namespace {

constexpr char kMagic[8] = {'F', 'R', 'E', 'C', 'M', 'F', '0', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const FactorModel& model, std::uint64_t seed,
                     std::uint64_t epoch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, model.num_users());
  put_u64(out, model.num_items());
  put_u64(out, static_cast<std::uint64_t>(model.dim()));
  put_u64(out, seed);
  put_u64(out, epoch);
  out.write(reinterpret_cast<const char*>(model.user_factors.data()),
            static_cast<std::streamsize>(sizeof(double) * model.user_factors.size()));
  out.write(reinterpret_cast<const char*>(model.item_factors.data()),
            static_cast<std::streamsize>(sizeof(double) * model.item_factors.size()));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  Checkpoint ck;
  const std::uint64_t n = get_u64(in);
  const std::uint64_t m = get_u64(in);
  const std::uint64_t d = get_u64(in);
  ck.seed = get_u64(in);
  ck.epoch = get_u64(in);
  ck.model.user_factors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ck.model.item_factors.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  in.read(reinterpret_cast<char*>(ck.model.user_factors.data()),
          static_cast<std::streamsize>(sizeof(double) * n * d));
  in.read(reinterpret_cast<char*>(ck.model.item_factors.data()),
          static_cast<std::streamsize>(sizeof(double) * m * d));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return ck;
}

}  // namespace fairrec
