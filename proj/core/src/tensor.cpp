#include "sparsecd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace sparsecd {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
std::atomic<std::int64_t> g_current_bytes{0};
std::atomic<std::int64_t> g_peak_bytes{0};
thread_local bool t_grad_enabled = true;
}  // namespace

namespace detail {
void track_alloc(std::size_t bytes) {
  auto now = g_current_bytes.fetch_add(static_cast<std::int64_t>(bytes)) +
             static_cast<std::int64_t>(bytes);
  auto peak = g_peak_bytes.load();
  while (now > peak && !g_peak_bytes.compare_exchange_weak(peak, now)) {
  }
}
void track_free(std::size_t bytes) {
  g_current_bytes.fetch_sub(static_cast<std::int64_t>(bytes));
}
}  // namespace detail

MemoryStats memory_stats() { return {g_current_bytes.load(), g_peak_bytes.load()}; }
void reset_peak_memory() { g_peak_bytes.store(g_current_bytes.load()); }

bool GradMode::enabled() { return t_grad_enabled; }
void GradMode::set_enabled(bool enabled) { t_grad_enabled = enabled; }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_->data.assign(values.begin(), values.end());
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw ContractError("undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return node_ ? node_->data.size() : 0;
}

template <typename T>
std::span<T> Tensor<T>::data() {
  return {node_->data.data(), node_->data.size()};
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return {node_->data.data(), node_->data.size()};
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) return {};
  return {node_->grad.data(), node_->grad.size()};
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  return {node_->ensure_grad(), node_->data.size()};
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size() && !node_->data.empty();
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (!node_->is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = value;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

namespace {
std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> index) {
  if (index.size() != shape.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) + " for shape " +
                         shape_str(shape));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape[axis]) throw DimensionError("index out of range for " + shape_str(shape));
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}
}  // namespace

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  return node_->data[flat_index(shape(), index)];
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> index) {
  return node_->data[flat_index(shape(), index)];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_) throw ContractError("backward() on undefined tensor");
  if (node_->data.size() != 1) {
    throw ContractError("backward() requires a scalar, got shape " + shape_str(node_->shape));
  }
  if (!node_->requires_grad) throw ContractError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> visited;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      auto* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace sparsecd
