#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace sparsecd::testing {

struct GradCase {
  std::string name;
  std::function<GradInstance(Rng&)> make;
};

// Every differentiable operation, built on small random double instances
// that stay clear of kinks (ReLU zero, clamp bounds, integer sample points).
const std::vector<GradCase>& grad_cases();

}  // namespace sparsecd::testing
