#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sparsecd/init.hpp"
#include "sparsecd/ops.hpp"

namespace sparsecd::testing {

// One differentiable computation: `leaves` are perturbed in place, `fn`
// rebuilds the output from them.
struct GradInstance {
  std::vector<std::pair<std::string, TensorD>> leaves;
  std::function<TensorD()> fn;
};

struct GradReport {
  double max_rel_error = 0;
  std::string worst;  // "leaf[index]"
  std::size_t checked = 0;
};

// Scalarizes with a fixed random projection so every output element matters.
inline TensorD project(const TensorD& out, const TensorD& weights) {
  return ops::sum(ops::mul(out, weights));
}

// Central differences against reverse mode. Relative error uses
// max(|analytic|, |numeric|, floor) as the denominator.
inline GradReport gradcheck(GradInstance& inst, std::uint64_t seed, double step = 1e-4, double floor = 1e-2) {
  TensorD probe;
  {
    NoGradGuard ng;
    probe = inst.fn();
  }
  Rng rng(seed);
  const auto w = init::uniform<double>(probe.shape(), -1.0, 1.0, rng, false);
  auto loss_of = [&] {
    NoGradGuard ng;
    return project(inst.fn(), w).item();
  };

  for (auto& [name, t] : inst.leaves) t.zero_grad();
  project(inst.fn(), w).backward();

  GradReport report;
  for (auto& [name, t] : inst.leaves) {
    const auto analytic = std::vector<double>(t.grad().begin(), t.grad().end());
    auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss_of();
      data[i] = saved - step;
      const double down = loss_of();
      data[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace sparsecd::testing
