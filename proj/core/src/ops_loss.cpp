#include <cmath>
#include <vector>

#include "op_util.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> targets) {
  detail::require(logits.rank() == 4, "cross_entropy: expected logits [B, K, H, W], got " +
                                          shape_str(logits.shape()));
  const std::size_t batch = logits.size(0), classes = logits.size(1);
  const std::size_t spatial = logits.size(2) * logits.size(3);
  detail::require(targets.size() == batch * spatial,
                  "cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                      shape_str(logits.shape()));
  for (auto t : targets) {
    if (t >= classes) {
      throw LabelError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
  const auto v = logits.data();
  // Softmax probabilities are kept for the backward rule (p - onehot) / N.
  auto probs = std::make_shared<std::vector<T>>(v.size());
  double total = 0;
  std::vector<T> z(classes);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* base = v.data() + b * classes * spatial;
    T* pb = probs->data() + b * classes * spatial;
    for (std::size_t s = 0; s < spatial; ++s) {
      std::size_t arg = 0;
      for (std::size_t k = 0; k < classes; ++k) {
        z[k] = base[k * spatial + s];
        if (!std::isfinite(z[k])) throw NumericError("cross_entropy: non-finite logit");
        if (z[k] > z[arg]) arg = k;
      }
      // log-sum-exp as max + log1p(sum of the others) keeps tiny losses exact.
      T rest = 0;
      for (std::size_t k = 0; k < classes; ++k) {
        if (k != arg) rest += std::exp(z[k] - z[arg]);
      }
      const T lse = z[arg] + std::log1p(rest);
      total += static_cast<double>(lse - z[targets[b * spatial + s]]);
      for (std::size_t k = 0; k < classes; ++k) pb[k * spatial + s] = std::exp(z[k] - lse);
    }
  }
  const std::size_t n = batch * spatial;
  Buffer<T> out{static_cast<T>(total / static_cast<double>(n))};
  std::vector<std::uint8_t> saved(targets.begin(), targets.end());
  return make_result<T>(Shape{1}, std::move(out), {&logits},
                        [ln = logits.node(), probs, saved = std::move(saved), batch, classes, spatial,
                         n](Node<T>& self) {
                          T* g = grad_of(ln);
                          const T scale = self.grad[0] / static_cast<T>(n);
                          for (std::size_t b = 0; b < batch; ++b) {
                            for (std::size_t k = 0; k < classes; ++k) {
                              for (std::size_t s = 0; s < spatial; ++s) {
                                const std::size_t j = (b * classes + k) * spatial + s;
                                const T onehot = saved[b * spatial + s] == k ? T(1) : T(0);
                                g[j] += scale * ((*probs)[j] - onehot);
                              }
                            }
                          }
                        });
}

template Tensor<float> cross_entropy(const Tensor<float>&, std::span<const std::uint8_t>);
template Tensor<double> cross_entropy(const Tensor<double>&, std::span<const std::uint8_t>);

}  // namespace sparsecd::ops
