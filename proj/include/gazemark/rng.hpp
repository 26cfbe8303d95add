#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gazemark {

// SplitMix64 mixing step; used to derive independent engine seeds.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over bytes.
std::uint64_t fnv1a64(std::string_view bytes);

// Engine seed for a named stream under one run seed. Streams derived from
// distinct tags are independent, so workers can draw in any order.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view stream);

// Uniform double in [0, 1) from the top 53 bits of the engine output.
// <random> distributions are not bit-stable across standard libraries;
// everything seeded in this project goes through these helpers instead.
double uniform01(std::mt19937_64& rng);

// Uniform integer in [0, count).
std::size_t pick_index(std::mt19937_64& rng, std::size_t count);

}  // namespace gazemark
