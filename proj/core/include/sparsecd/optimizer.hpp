#pragma once

#include <cstdint>
#include <vector>

#include "sparsecd/tensor.hpp"

namespace sparsecd {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

/// Adam with decoupled weight decay and bias correction:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// A parameter without an accumulated gradient is treated as having a zero
/// gradient (it still decays).
template <typename T>
class AdamW {
 public:
  AdamW(NamedTensors<T> params, AdamWConfig cfg);

  /// Rejects the whole step, leaving every parameter untouched, if any
  /// gradient is non-finite; the error names the parameter.
  void step(double lr);
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  NamedTensors<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t step_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

/// lr0 * (1 - epoch / total_epochs) for 0 <= epoch < total_epochs.
double linear_decay_lr(std::size_t epoch, std::size_t total_epochs, double lr0);

}  // namespace sparsecd
