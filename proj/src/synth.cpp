#include "fairrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "fairrec/rng.hpp"

namespace fairrec {

InteractionDataset synth_dataset(std::uint32_t users, std::uint32_t items,
                                 std::size_t interactions, double zipf_s, std::uint64_t seed) {
  if (users == 0 || items == 0) throw std::invalid_argument("users and items must be > 0");
  if (zipf_s < 0.0) throw std::invalid_argument("zipf_s must be >= 0");
  const auto capacity = static_cast<std::uint64_t>(users) * items;
  if (interactions == 0 || interactions > capacity) {
    throw std::invalid_argument("interaction count must be in [1, users*items]");
  }

  std::vector<double> cdf(items);
  double acc = 0.0;
  for (std::uint32_t r = 0; r < items; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -zipf_s);
    cdf[r] = acc;
  }
  for (auto& c : cdf) c /= acc;

  Rng rng(mix_seed(seed, kSynthStream));
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(interactions * 2);
  std::vector<Interaction> pairs;
  pairs.reserve(interactions);
  while (pairs.size() < interactions) {
    const auto u = static_cast<std::uint32_t>(rng.uniform_index(users));
    const double x = rng.uniform_real();
    // min() guards the case where rounding leaves cdf.back() a hair below x.
    const auto i = std::min<std::uint32_t>(
        static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), x) - cdf.begin()),
        items - 1);
    const std::uint64_t key = static_cast<std::uint64_t>(u) * items + i;
    if (seen.insert(key).second) pairs.push_back({u, i});
  }

  std::vector<std::string> user_ids(users), item_ids(items);
  for (std::uint32_t u = 0; u < users; ++u) user_ids[u] = std::to_string(u);
  for (std::uint32_t i = 0; i < items; ++i) item_ids[i] = std::to_string(i);
  return InteractionDataset(std::move(pairs), std::move(user_ids), std::move(item_ids));
}

}  // namespace fairrec
