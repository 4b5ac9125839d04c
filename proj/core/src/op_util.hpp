#pragma once

#include <initializer_list>
#include <string>
#include <utility>

#include "sparsecd/ops.hpp"

namespace sparsecd::ops::detail {

using sparsecd::detail::Node;
using sparsecd::detail::NodePtr;

template <typename T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (!GradMode::enabled()) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Wraps a freshly computed buffer as an op output. The backward rule is only
// kept (and inputs only retained) when some input requires a gradient.
template <typename T, typename Fn>
Tensor<T> make_result(Shape shape, Buffer<T> data, std::initializer_list<const Tensor<T>*> inputs,
                      Fn&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (needs_grad<T>(inputs)) {
    node->requires_grad = true;
    for (const auto* t : inputs) {
      if (t && t->defined()) node->parents.push_back(t->node());
    }
    node->backward_fn = std::forward<Fn>(backward);
  }
  return Tensor<T>(std::move(node));
}

// Gradient buffer of an input if it participates in backward, else nullptr.
template <typename T>
T* grad_of(const NodePtr<T>& n) {
  return (n && n->requires_grad) ? n->ensure_grad() : nullptr;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace sparsecd::ops::detail

#define SPARSECD_INSTANTIATE_OPS(MACRO) \
  MACRO(float)                          \
  MACRO(double)
