#include "sparsecd/init.hpp"

#include <cmath>

namespace sparsecd {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

namespace init {

template <typename T>
Tensor<T> uniform(Shape shape, T lo, T hi, Rng& rng, bool requires_grad) {
  Tensor<T> t(std::move(shape), T(0), requires_grad);
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const T bound = T(1) / static_cast<T>(std::sqrt(static_cast<double>(fan_in)));
  return uniform<T>(std::move(shape), -bound, bound, rng, true);
}

template <typename T>
Tensor<T> normal(Shape shape, T mean, T stddev, Rng& rng, bool requires_grad) {
  Tensor<T> t(std::move(shape), T(0), requires_grad);
  std::normal_distribution<double> dist(static_cast<double>(mean), static_cast<double>(stddev));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> constant(Shape shape, T value, bool requires_grad) {
  return Tensor<T>(std::move(shape), value, requires_grad);
}

#define INSTANTIATE(T)                                                 \
  template Tensor<T> uniform(Shape, T, T, Rng&, bool);                 \
  template Tensor<T> fan_in_uniform(Shape, std::size_t, Rng&);         \
  template Tensor<T> normal(Shape, T, T, Rng&, bool);                  \
  template Tensor<T> constant(Shape, T, bool);
INSTANTIATE(float)
INSTANTIATE(double)
#undef INSTANTIATE

}  // namespace init
}  // namespace sparsecd
