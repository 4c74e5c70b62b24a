#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blockdetail {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t value);

/// Seed for stream `stream` derived from `master`. Distinct streams of the
/// same master seed are statistically independent.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// 64-bit FNV-1a, used for config hashes and content-addressed paths.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace blockdetail
