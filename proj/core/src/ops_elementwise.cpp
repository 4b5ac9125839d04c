#include <cmath>
#include <numbers>

#include "op_util.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  Buffer<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an = a.node(), bn = b.node()](Node<T>& self) {
                          const auto n = self.data.size();
                          if (T* ga = grad_of(an)) {
                            for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
                          }
                          if (T* gb = grad_of(bn)) {
                            for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  Buffer<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an = a.node(), bn = b.node()](Node<T>& self) {
                          const auto n = self.data.size();
                          if (T* ga = grad_of(an)) {
                            for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
                          }
                          if (T* gb = grad_of(bn)) {
                            for (std::size_t i = 0; i < n; ++i) gb[i] -= self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  Buffer<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>(a.shape(), std::move(out), {&a, &b},
                        [an = a.node(), bn = b.node()](Node<T>& self) {
                          const auto n = self.data.size();
                          if (T* ga = grad_of(an)) {
                            for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * bn->data[i];
                          }
                          if (T* gb = grad_of(bn)) {
                            for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i] * an->data[i];
                          }
                        });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  const auto x = a.data();
  Buffer<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + s;
  return make_result<T>(a.shape(), std::move(out), {&a}, [an = a.node()](Node<T>& self) {
    T* ga = grad_of(an);
    for (std::size_t i = 0; i < self.data.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  const auto x = a.data();
  Buffer<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  return make_result<T>(a.shape(), std::move(out), {&a}, [an = a.node(), s](Node<T>& self) {
    T* ga = grad_of(an);
    for (std::size_t i = 0; i < self.data.size(); ++i) ga[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto v = x.data();
  Buffer<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > T(0) ? v[i] : T(0);
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* gx = grad_of(xn);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      if (xn->data[i] > T(0)) gx[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  const auto v = x.data();
  Buffer<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(0.5) * v[i] * (T(1) + std::erf(v[i] * kInvSqrt2));
  }
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
    T* gx = grad_of(xn);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const T u = xn->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(u * kInvSqrt2));
      const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * u * u);
      gx[i] += self.grad[i] * (cdf + u * pdf);
    }
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  const auto v = x.data();
  Buffer<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* gx = grad_of(xn);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const T y = self.data[i];
      gx[i] += self.grad[i] * (T(1) - y * y);
    }
  });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  const auto v = x.data();
  Buffer<T> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, v[i]));
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn = x.node(), lo, hi](Node<T>& self) {
    T* gx = grad_of(xn);
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const T u = xn->data[i];
      if (u > lo && u < hi) gx[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& w) {
  detail::require(x.rank() >= 2 && w.rank() == 2 && w.size(0) == x.size(0) && w.size(1) == x.size(1),
                  "scale_channels: weights " + shape_str(w.shape()) + " do not match features " +
                      shape_str(x.shape()));
  const std::size_t groups = x.size(0) * x.size(1);
  const std::size_t inner = x.numel() / groups;
  const auto v = x.data();
  const auto s = w.data();
  Buffer<T> out(v.size());
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t i = 0; i < inner; ++i) out[g * inner + i] = v[g * inner + i] * s[g];
  }
  return make_result<T>(x.shape(), std::move(out), {&x, &w},
                        [xn = x.node(), wn = w.node(), groups, inner](Node<T>& self) {
                          T* gx = grad_of(xn);
                          T* gw = grad_of(wn);
                          for (std::size_t g = 0; g < groups; ++g) {
                            const T* go = self.grad.data() + g * inner;
                            if (gx) {
                              for (std::size_t i = 0; i < inner; ++i) gx[g * inner + i] += go[i] * wn->data[g];
                            }
                            if (gw) {
                              T acc = 0;
                              for (std::size_t i = 0; i < inner; ++i) acc += go[i] * xn->data[g * inner + i];
                              gw[g] += acc;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  long double acc = 0;
  for (T v : x.data()) acc += v;
  Buffer<T> out{static_cast<T>(acc)};
  return make_result<T>(Shape{1}, std::move(out), {&x}, [xn = x.node()](Node<T>& self) {
    T* gx = grad_of(xn);
    const T g = self.grad[0];
    for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  long double acc = 0;
  for (T v : x.data()) acc += v;
  const auto n = static_cast<T>(x.numel());
  Buffer<T> out{static_cast<T>(acc / n)};
  return make_result<T>(Shape{1}, std::move(out), {&x}, [xn = x.node(), n](Node<T>& self) {
    T* gx = grad_of(xn);
    const T g = self.grad[0] / n;
    for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += g;
  });
}

#define INSTANTIATE(T)                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                  \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                  \
  template Tensor<T> relu(const Tensor<T>&);                           \
  template Tensor<T> gelu(const Tensor<T>&);                           \
  template Tensor<T> tanh(const Tensor<T>&);                           \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                    \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> sum(const Tensor<T>&);                            \
  template Tensor<T> mean(const Tensor<T>&);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
