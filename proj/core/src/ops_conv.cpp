#include <vector>

#include "op_util.hpp"
#include "sparsecd/gemm.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;
using sparsecd::detail::gemm;

namespace {

struct ConvGeometry {
  std::size_t channels, height, width;  // the "image" side
  std::size_t kh, kw, stride, padding;
  std::size_t out_h, out_w;             // the "column" side
};

// col[(c*kh + i)*kw + j, oh*out_w + ow] = img[c, oh*stride + i - pad, ow*stride + j - pad]
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t cols = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* dst = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.padding);
          T* row = dst + oh * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.padding);
            row[ow] = (x < 0 || x >= static_cast<std::ptrdiff_t>(g.width)) ? T(0) : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into img.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t cols = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* src = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          const T* row = src + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.padding);
            if (x >= 0 && x < static_cast<std::ptrdiff_t>(g.width)) dst[x] += row[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t spatial) {
  for (std::size_t c = 0; c < channels; ++c) {
    T* row = out + c * spatial;
    for (std::size_t s = 0; s < spatial; ++s) row[s] += bias[c];
  }
}

template <typename T>
void accumulate_bias_grad(const T* dy, T* gb, std::size_t channels, std::size_t spatial) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = dy + c * spatial;
    T acc = 0;
    for (std::size_t s = 0; s < spatial; ++s) acc += row[s];
    gb[c] += acc;
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t padding) {
  detail::require(x.rank() == 4 && w.rank() == 4 && w.size(1) == x.size(1),
                  "conv2d: weight " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
  if (stride == 0) throw GeometryError("conv2d: stride must be positive");
  const std::size_t batch = x.size(0), cin = x.size(1), h = x.size(2), wd = x.size(3);
  const std::size_t cout = w.size(0), kh = w.size(2), kw = w.size(3);
  if (h + 2 * padding < kh || wd + 2 * padding < kw) {
    throw GeometryError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                        " larger than padded input " + shape_str(x.shape()));
  }
  if (b.defined()) {
    detail::require(b.rank() == 1 && b.size(0) == cout, "conv2d: bias shape " + shape_str(b.shape()));
  }
  ConvGeometry g{cin, h, wd, kh, kw, stride, padding, (h + 2 * padding - kh) / stride + 1,
                 (wd + 2 * padding - kw) / stride + 1};
  const std::size_t k = cin * kh * kw;
  const std::size_t spatial = g.out_h * g.out_w;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;

  Buffer<T> out(batch * cout * spatial);
  std::vector<T> col(pointwise ? 0 : k * spatial);
  for (std::size_t i = 0; i < batch; ++i) {
    const T* img = x.data().data() + i * cin * h * wd;
    const T* colp = img;
    if (!pointwise) {
      im2col(img, g, col.data());
      colp = col.data();
    }
    T* o = out.data() + i * cout * spatial;
    gemm<T>(false, false, cout, spatial, k, w.data().data(), colp, o, false);
    if (b.defined()) add_bias(o, b.data().data(), cout, spatial);
  }
  return make_result<T>(
      Shape{batch, cout, g.out_h, g.out_w}, std::move(out), {&x, &w, &b},
      [xn = x.node(), wn = w.node(), bn = b.node(), g, batch, cout, k, spatial, pointwise](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = bn ? grad_of(bn) : nullptr;
        const std::size_t img_size = g.channels * g.height * g.width;
        std::vector<T> col(pointwise ? 0 : k * spatial);
        for (std::size_t i = 0; i < batch; ++i) {
          const T* dy = self.grad.data() + i * cout * spatial;
          const T* img = xn->data.data() + i * img_size;
          if (gw) {
            const T* colp = img;
            if (!pointwise) {
              im2col(img, g, col.data());
              colp = col.data();
            }
            gemm<T>(false, true, cout, k, spatial, dy, colp, gw, true);
          }
          if (gx) {
            if (pointwise) {
              gemm<T>(true, false, k, spatial, cout, wn->data.data(), dy, gx + i * img_size, true);
            } else {
              gemm<T>(true, false, k, spatial, cout, wn->data.data(), dy, col.data(), false);
              col2im(col.data(), g, gx + i * img_size);
            }
          }
          if (gb) accumulate_bias_grad(dy, gb, cout, spatial);
        }
      });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           std::size_t stride, std::size_t padding) {
  detail::require(x.rank() == 4 && w.rank() == 4 && w.size(0) == x.size(1),
                  "conv_transpose2d: weight " + shape_str(w.shape()) + " does not match input " +
                      shape_str(x.shape()));
  if (stride == 0) throw GeometryError("conv_transpose2d: stride must be positive");
  const std::size_t batch = x.size(0), cin = x.size(1), h = x.size(2), wd = x.size(3);
  const std::size_t cout = w.size(1), kh = w.size(2), kw = w.size(3);
  if ((h - 1) * stride + kh <= 2 * padding || (wd - 1) * stride + kw <= 2 * padding) {
    throw GeometryError("conv_transpose2d: padding leaves an empty output for " + shape_str(x.shape()));
  }
  const std::size_t out_h = (h - 1) * stride + kh - 2 * padding;
  const std::size_t out_w = (wd - 1) * stride + kw - 2 * padding;
  if (b.defined()) {
    detail::require(b.rank() == 1 && b.size(0) == cout, "conv_transpose2d: bias shape " + shape_str(b.shape()));
  }
  // The output plays the "image" role and the input the "column" role.
  ConvGeometry g{cout, out_h, out_w, kh, kw, stride, padding, h, wd};
  const std::size_t k = cout * kh * kw;
  const std::size_t spatial = h * wd;
  const std::size_t out_size = cout * out_h * out_w;

  Buffer<T> out(batch * out_size, T(0));
  std::vector<T> col(k * spatial);
  for (std::size_t i = 0; i < batch; ++i) {
    const T* xi = x.data().data() + i * cin * spatial;
    gemm<T>(true, false, k, spatial, cin, w.data().data(), xi, col.data(), false);
    T* o = out.data() + i * out_size;
    col2im(col.data(), g, o);
    if (b.defined()) add_bias(o, b.data().data(), cout, out_h * out_w);
  }
  return make_result<T>(
      Shape{batch, cout, out_h, out_w}, std::move(out), {&x, &w, &b},
      [xn = x.node(), wn = w.node(), bn = b.node(), g, batch, cin, cout, k, spatial, out_size](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = bn ? grad_of(bn) : nullptr;
        std::vector<T> col(k * spatial);
        for (std::size_t i = 0; i < batch; ++i) {
          const T* dy = self.grad.data() + i * out_size;
          im2col(dy, g, col.data());
          if (gx) gemm<T>(false, false, cin, spatial, k, wn->data.data(), col.data(), gx + i * cin * spatial, true);
          if (gw) gemm<T>(false, true, cin, k, spatial, xn->data.data() + i * cin * spatial, col.data(), gw, true);
          if (gb) accumulate_bias_grad(dy, gb, cout, g.height * g.width);
        }
      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::require(x.rank() == 4, "global_avg_pool: expected [B, C, H, W], got " + shape_str(x.shape()));
  const std::size_t groups = x.size(0) * x.size(1);
  const std::size_t spatial = x.size(2) * x.size(3);
  const auto v = x.data();
  Buffer<T> out(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    T acc = 0;
    for (std::size_t s = 0; s < spatial; ++s) acc += v[g * spatial + s];
    out[g] = acc / static_cast<T>(spatial);
  }
  return make_result<T>(Shape{x.size(0), x.size(1)}, std::move(out), {&x},
                        [xn = x.node(), groups, spatial](Node<T>& self) {
                          T* gx = grad_of(xn);
                          for (std::size_t g = 0; g < groups; ++g) {
                            const T d = self.grad[g] / static_cast<T>(spatial);
                            for (std::size_t s = 0; s < spatial; ++s) gx[g * spatial + s] += d;
                          }
                        });
}

#define INSTANTIATE(T)                                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,   \
                                      std::size_t);                                                      \
  template Tensor<T> global_avg_pool(const Tensor<T>&);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
