#pragma once

#include <cstdint>
#include <random>

#include "sparsecd/tensor.hpp"

namespace sparsecd {

using Rng = std::mt19937_64;

/// Mixes several 64-bit values into one seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

namespace init {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual conv/linear default.
template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

template <typename T>
Tensor<T> uniform(Shape shape, T lo, T hi, Rng& rng, bool requires_grad = true);

template <typename T>
Tensor<T> normal(Shape shape, T mean, T stddev, Rng& rng, bool requires_grad = false);

template <typename T>
Tensor<T> constant(Shape shape, T value, bool requires_grad = true);

}  // namespace init
}  // namespace sparsecd
