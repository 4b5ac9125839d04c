#include <numeric>

#include "op_util.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  detail::require(shape_numel(shape) == x.numel(),
                  "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  const auto v = x.data();
  Buffer<T> out(v.begin(), v.end());
  return make_result<T>(std::move(shape), std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* gx = grad_of(xn);
    for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += self.grad[i];
  });
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// For output flat index o (row-major over out_shape), source flat index.
// Walks an odometer so the work per element is O(1) amortized.
template <typename Fn>
void for_each_permuted(const Shape& out_shape, const std::vector<std::size_t>& src_strides, Fn&& fn) {
  const std::size_t rank = out_shape.size();
  const std::size_t total = shape_numel(out_shape);
  if (rank == 0) {
    fn(std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t inner_stride = src_strides[rank - 1];
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) fn(o + j, src + j * inner_stride);
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      ++idx[ax];
      src += src_strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= idx[ax] * src_strides[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const auto& in_shape = x.shape();
  detail::require(axes.size() == in_shape.size(), "permute: axes rank mismatch for " + shape_str(in_shape));
  std::vector<bool> seen(axes.size(), false);
  for (auto a : axes) {
    detail::require(a < axes.size() && !seen[a], "permute: invalid axis permutation");
    seen[a] = true;
  }
  const auto in_strides = strides_of(in_shape);
  Shape out_shape(axes.size());
  std::vector<std::size_t> src_strides(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    out_shape[i] = in_shape[axes[i]];
    src_strides[i] = in_strides[axes[i]];
  }
  const auto v = x.data();
  Buffer<T> out(v.size());
  for_each_permuted(out_shape, src_strides, [&](std::size_t o, std::size_t s) { out[o] = v[s]; });
  return make_result<T>(out_shape, std::move(out), {&x},
                        [xn = x.node(), out_shape, src_strides](Node<T>& self) {
                          T* gx = grad_of(xn);
                          for_each_permuted(out_shape, src_strides,
                                            [&](std::size_t o, std::size_t s) { gx[s] += self.grad[o]; });
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  detail::require(!xs.empty(), "concat: no inputs");
  const Shape& first = xs.front().shape();
  detail::require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    const auto& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    detail::require(ok, "concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_row = out_shape[axis] * inner;

  Buffer<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& t : xs) {
    const std::size_t row = t.size(axis) * inner;
    const auto v = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(v.begin() + o * row, v.begin() + (o + 1) * row, out.begin() + o * out_row + offset);
    }
    offsets.push_back(offset);
    offset += row;
  }

  std::vector<detail::NodePtr<T>> nodes;
  for (const auto& t : xs) nodes.push_back(t.node());
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = out_shape;
  node->data = std::move(out);
  bool any = false;
  if (GradMode::enabled()) {
    for (const auto& t : xs) any = any || t.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->parents = nodes;
    node->backward_fn = [nodes, offsets, outer, out_row](detail::Node<T>& self) {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        T* g = grad_of(nodes[k]);
        if (!g) continue;
        const std::size_t row = nodes[k]->data.size() / outer;
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * out_row + offsets[k];
          for (std::size_t j = 0; j < row; ++j) g[o * row + j] += src[j];
        }
      }
    };
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& s = x.shape();
  detail::require(axis < s.size() && length > 0 && start + length <= s[axis],
                  "narrow: range out of bounds for " + shape_str(s));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t in_row = s[axis] * inner;
  const std::size_t out_row = length * inner;
  const auto v = x.data();
  Buffer<T> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(v.begin() + o * in_row + start * inner, v.begin() + o * in_row + start * inner + out_row,
              out.begin() + o * out_row);
  }
  return make_result<T>(out_shape, std::move(out), {&x},
                        [xn = x.node(), outer, in_row, out_row, off = start * inner](Node<T>& self) {
                          T* gx = grad_of(xn);
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t j = 0; j < out_row; ++j) {
                              gx[o * in_row + off + j] += self.grad[o * out_row + j];
                            }
                          }
                        });
}

#define INSTANTIATE(T)                                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                  \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                \
  template Tensor<T> narrow(const Tensor<T>&, std::size_t, std::size_t, std::size_t);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
