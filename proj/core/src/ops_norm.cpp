#include <cmath>
#include <vector>

#include "op_util.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;

namespace {

struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.length = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  detail::require(axis < x.rank(), "softmax: axis " + std::to_string(axis) + " out of range for " +
                                       shape_str(x.shape()));
  const auto sp = split_at(x.shape(), axis);
  const auto v = x.data();
  for (T e : v) {
    if (!std::isfinite(e)) throw NumericError("softmax: non-finite input");
  }
  Buffer<T> out(v.size());
  std::vector<T> peak(sp.inner), total(sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const T* src = v.data() + o * sp.length * sp.inner;
    T* dst = out.data() + o * sp.length * sp.inner;
    std::copy(src, src + sp.inner, peak.begin());
    for (std::size_t l = 1; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) peak[i] = std::max(peak[i], src[l * sp.inner + i]);
    }
    std::fill(total.begin(), total.end(), T(0));
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const T e = std::exp(src[l * sp.inner + i] - peak[i]);
        dst[l * sp.inner + i] = e;
        total[i] += e;
      }
    }
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) dst[l * sp.inner + i] /= total[i];
    }
  }
  return make_result<T>(x.shape(), std::move(out), {&x}, [xn = x.node(), sp](Node<T>& self) {
    // dx = y * (dy - sum(dy * y))
    T* gx = grad_of(xn);
    std::vector<T> dot(sp.inner);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const std::size_t base = o * sp.length * sp.inner;
      const T* y = self.data.data() + base;
      const T* dy = self.grad.data() + base;
      std::fill(dot.begin(), dot.end(), T(0));
      for (std::size_t l = 0; l < sp.length; ++l) {
        for (std::size_t i = 0; i < sp.inner; ++i) dot[i] += dy[l * sp.inner + i] * y[l * sp.inner + i];
      }
      for (std::size_t l = 0; l < sp.length; ++l) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          const std::size_t j = l * sp.inner + i;
          gx[base + j] += y[j] * (dy[j] - dot[i]);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, std::size_t axis, const Tensor<T>& weight, const Tensor<T>& bias,
                     T eps) {
  detail::require(axis < x.rank(), "layer_norm: axis out of range for " + shape_str(x.shape()));
  const auto sp = split_at(x.shape(), axis);
  detail::require(weight.rank() == 1 && weight.size(0) == sp.length && bias.rank() == 1 &&
                      bias.size(0) == sp.length,
                  "layer_norm: affine parameters must have extent " + std::to_string(sp.length));
  const auto v = x.data();
  const auto wv = weight.data();
  const auto bv = bias.data();
  Buffer<T> out(v.size());
  // Saved for backward: normalized values and per-group reciprocal std.
  auto xhat = std::make_shared<std::vector<T>>(v.size());
  auto rstd = std::make_shared<std::vector<T>>(sp.outer * sp.inner);
  std::vector<T> mu(sp.inner), var(sp.inner);
  const T inv_len = T(1) / static_cast<T>(sp.length);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const std::size_t base = o * sp.length * sp.inner;
    const T* src = v.data() + base;
    std::fill(mu.begin(), mu.end(), T(0));
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) mu[i] += src[l * sp.inner + i];
    }
    for (auto& m : mu) m *= inv_len;
    std::fill(var.begin(), var.end(), T(0));
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const T d = src[l * sp.inner + i] - mu[i];
        var[i] += d * d;
      }
    }
    T* rs = rstd->data() + o * sp.inner;
    for (std::size_t i = 0; i < sp.inner; ++i) rs[i] = T(1) / std::sqrt(var[i] * inv_len + eps);
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t j = base + l * sp.inner + i;
        const T xh = (v[j] - mu[i]) * rs[i];
        (*xhat)[j] = xh;
        out[j] = xh * wv[l] + bv[l];
      }
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {&x, &weight, &bias},
      [xn = x.node(), wn = weight.node(), bn = bias.node(), sp, xhat, rstd](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = grad_of(bn);
        const T inv_len = T(1) / static_cast<T>(sp.length);
        std::vector<T> mean_g(sp.inner), mean_gx(sp.inner);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const std::size_t base = o * sp.length * sp.inner;
          const T* dy = self.grad.data() + base;
          const T* xh = xhat->data() + base;
          for (std::size_t l = 0; l < sp.length; ++l) {
            T accw = 0, accb = 0;
            for (std::size_t i = 0; i < sp.inner; ++i) {
              accw += dy[l * sp.inner + i] * xh[l * sp.inner + i];
              accb += dy[l * sp.inner + i];
            }
            if (gw) gw[l] += accw;
            if (gb) gb[l] += accb;
          }
          if (!gx) continue;
          std::fill(mean_g.begin(), mean_g.end(), T(0));
          std::fill(mean_gx.begin(), mean_gx.end(), T(0));
          for (std::size_t l = 0; l < sp.length; ++l) {
            const T wl = wn->data[l];
            for (std::size_t i = 0; i < sp.inner; ++i) {
              const T g = dy[l * sp.inner + i] * wl;
              mean_g[i] += g;
              mean_gx[i] += g * xh[l * sp.inner + i];
            }
          }
          const T* rs = rstd->data() + o * sp.inner;
          for (std::size_t l = 0; l < sp.length; ++l) {
            const T wl = wn->data[l];
            for (std::size_t i = 0; i < sp.inner; ++i) {
              const std::size_t j = l * sp.inner + i;
              const T g = dy[j] * wl;
              gx[base + j] += rs[i] * (g - mean_g[i] * inv_len - xh[j] * mean_gx[i] * inv_len);
            }
          }
        }
      });
}

#define INSTANTIATE(T)                                  \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t); \
  template Tensor<T> layer_norm(const Tensor<T>&, std::size_t, const Tensor<T>&, const Tensor<T>&, T);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
