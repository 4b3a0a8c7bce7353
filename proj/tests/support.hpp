#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sfsurrogate/tensor.hpp"

namespace sfs::test {

inline std::vector<double> normal_values(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0,
                            bool requires_grad = false) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), normal_values(n, seed, scale), requires_grad);
}

/// Random projection weights that turn any tensor into a well-conditioned scalar.
inline std::vector<double> projection(std::size_t n, std::uint64_t seed) {
  return normal_values(n, seed ^ 0xabcdefULL);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace sfs::test
