#pragma once
#include <cstdint>
#include <random>
#include <string_view>

namespace gfamp {

using Rng = std::mt19937_64;

// Counter-style stream derivation: a (base seed, purpose tag, index) triple maps to one
// independent seed, so per-sample draws do not depend on generation order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

inline Rng make_stream(std::uint64_t base, std::string_view tag, std::uint64_t index) {
  return Rng(derive_seed(base, tag, index));
}

// Standard normal draws, always generated at double precision.
inline double randn(Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

}  // namespace gfamp
