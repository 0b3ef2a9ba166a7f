#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "cprnn/tensor.hpp"

namespace cprnn {

/// Engine for stream `path` under `seed`. Distinct paths give independent
/// streams, so parallel workers can each own one without sharing state.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

inline Matrix random_uniform(Index rows, Index cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  // Column-major fill order; fixed so draws are reproducible.
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

inline Vector random_uniform(Index size, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v[i] = dist(rng);
  return v;
}

inline Tensor3 random_uniform(Dims3 dims, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor3 t(dims);
  for (double& x : t.values()) x = dist(rng);
  return t;
}

}  // namespace cprnn
