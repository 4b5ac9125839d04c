#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsecd/errors.hpp"

namespace sparsecd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Byte accounting for every tensor buffer (data and grad). The bench reports
// the peak as its transient-memory column.
struct MemoryStats {
  std::int64_t current_bytes = 0;
  std::int64_t peak_bytes = 0;
};
MemoryStats memory_stats();
void reset_peak_memory();

namespace detail {
void track_alloc(std::size_t bytes);
void track_free(std::size_t bytes);

template <typename T>
struct TrackedAllocator {
  using value_type = T;
  TrackedAllocator() = default;
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    track_alloc(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    track_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <typename U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};
}  // namespace detail

template <typename T>
using Buffer = std::vector<T, detail::TrackedAllocator<T>>;

/// Recording switch for the autodiff tape. Thread-local.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node (grad populated) and accumulates into parents.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  T* ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

/// Dense row-major tensor handle with an optional autodiff tape node.
///
/// Copies share the underlying node (handle semantics); use clone() for a deep
/// copy. Operations in sparsecd::ops record a backward rule whenever gradient
/// mode is on and at least one input requires a gradient.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), T(0), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<T> data();
  std::span<const T> data() const;
  /// Empty span when no gradient has been accumulated.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  bool has_grad() const;

  bool requires_grad() const;
  /// Only valid on leaves.
  void set_requires_grad(bool value);
  void zero_grad();

  T item() const;
  T at(std::initializer_list<std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index);

  /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
  /// interior gradients are recomputed on every call.
  void backward() const;

  /// New leaf sharing no storage with this tensor.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Op-construction interface used by sparsecd::ops.
  explicit Tensor(detail::NodePtr<T> node) : node_(std::move(node)) {}
  const detail::NodePtr<T>& node() const { return node_; }

 private:
  detail::NodePtr<T> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace sparsecd
