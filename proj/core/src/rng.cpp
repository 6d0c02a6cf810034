#include "seqlink/rng.hpp"

#include <cmath>
#include <cstring>

namespace seqlink {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

Rng make_rng(std::uint64_t seed, std::string_view tag) {
  std::uint64_t mixed = fnv1a64(tag) ^ (seed * 0x9e3779b97f4a7c15ull);
  return Rng(mixed);
}

double uniform_double(Rng& rng) {
  // 53 uniform mantissa bits.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

double gaussian(Rng& rng, double mean, double stddev) {
  // Box-Muller; the second variate is discarded to keep the stream stateless.
  double u1 = uniform_double(rng);
  double u2 = uniform_double(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

int sample_index(Rng& rng, const double* probs, int n) {
  double u = uniform_double(rng);
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  // Round-off may leave cum slightly below 1; fall back to the last
  // index with nonzero mass.
  for (int i = n - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return i;
  }
  return n - 1;
}

}  // namespace seqlink
