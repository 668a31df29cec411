#pragma once

#include <cstdint>

#include "fairrec/dataset.hpp"

namespace fairrec {

// Synthetic implicit-feedback dataset with Zipf(s) item popularity: each
// interaction draws a uniform user and a Zipf-ranked item (item index 0 is
// the most popular), rejecting duplicates until `interactions` distinct pairs
// exist. zipf_s = 0 gives an approximately uniform catalog. Deterministic
// given the seed. Raw ids are the decimal indices.
InteractionDataset synth_dataset(std::uint32_t users, std::uint32_t items,
                                 std::size_t interactions, double zipf_s, std::uint64_t seed);

}  // namespace fairrec
