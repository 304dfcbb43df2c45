#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

#include "hpg/types.hpp"

namespace hpg {

using Rng = std::mt19937_64;

// Deterministic child stream keyed by (seed, tags...). Used to hand each
// chunk of a batch, each seed of an experiment, etc. its own generator.
inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Geometric on {0, 1, 2, ...} with P(k) = p (1-p)^k.
inline std::int64_t geom_draw(double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ValidationError("geom_draw: p must lie in (0,1], got " + std::to_string(p));
  }
  if (p == 1.0) return 0;
  std::geometric_distribution<std::int64_t> dist(p);
  return dist(rng);
}

}  // namespace hpg
