#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqlink {

using Rng = std::mt19937_64;

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

// Independent deterministic stream for a (seed, tag) pair. Streams with
// different tags are uncorrelated regardless of the order they are created.
Rng make_rng(std::uint64_t seed, std::string_view tag);

// The helpers below avoid std::*_distribution, whose output is
// implementation-defined; artifact files must be reproducible bit-for-bit.

double uniform_double(Rng& rng);                           // [0, 1)
double uniform_range(Rng& rng, double lo, double hi);      // [lo, hi)
int uniform_int(Rng& rng, int lo, int hi);                 // [lo, hi] inclusive
double gaussian(Rng& rng, double mean, double stddev);

// Inverse-CDF draw from an explicit probability vector.
int sample_index(Rng& rng, const double* probs, int n);

}  // namespace seqlink
