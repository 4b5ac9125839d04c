#include <algorithm>
#include <cmath>
#include <vector>

#include "op_util.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;

namespace {

// One clamped bilinear read position along an axis of extent n.
template <typename T>
struct Lerp {
  std::size_t lo, hi;
  T frac;
  bool interior;  // false when the coordinate was clamped
};

template <typename T>
Lerp<T> lerp_at(T coord, std::size_t n) {
  const T max_c = static_cast<T>(n - 1);
  Lerp<T> r{};
  // Points exactly on the border keep the inward one-sided derivative.
  r.interior = coord >= T(0) && coord <= max_c;
  const T c = std::clamp(coord, T(0), max_c);
  const T f = std::floor(c);
  r.lo = static_cast<std::size_t>(f);
  r.frac = c - f;
  if (n > 1 && r.lo == n - 1) {
    r.lo = n - 2;
    r.frac = T(1);
  }
  r.hi = std::min(r.lo + 1, n - 1);
  return r;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& x, const Tensor<T>& coords) {
  detail::require(x.rank() == 4 && coords.rank() == 4 && coords.size(0) == x.size(0) && coords.size(3) == 2,
                  "bilinear_sample: expected x[B,C,H,W] and coords[B,P,Q,2], got " + shape_str(x.shape()) +
                      " and " + shape_str(coords.shape()));
  for (T c : coords.data()) {
    if (!std::isfinite(c)) throw NumericError("bilinear_sample: non-finite coordinate");
  }
  const std::size_t batch = x.size(0), ch = x.size(1), h = x.size(2), w = x.size(3);
  const std::size_t p = coords.size(1), q = coords.size(2);
  const std::size_t points = p * q;
  const auto xv = x.data();
  const auto cv = coords.data();
  Buffer<T> out(batch * ch * points);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < points; ++s) {
      const auto r = lerp_at(cv[(b * points + s) * 2], h);
      const auto c = lerp_at(cv[(b * points + s) * 2 + 1], w);
      const T w00 = (T(1) - r.frac) * (T(1) - c.frac);
      const T w01 = (T(1) - r.frac) * c.frac;
      const T w10 = r.frac * (T(1) - c.frac);
      const T w11 = r.frac * c.frac;
      for (std::size_t k = 0; k < ch; ++k) {
        const T* img = xv.data() + (b * ch + k) * h * w;
        out[(b * ch + k) * points + s] = w00 * img[r.lo * w + c.lo] + w01 * img[r.lo * w + c.hi] +
                                         w10 * img[r.hi * w + c.lo] + w11 * img[r.hi * w + c.hi];
      }
    }
  }
  return make_result<T>(
      Shape{batch, ch, p, q}, std::move(out), {&x, &coords},
      [xn = x.node(), cn = coords.node(), batch, ch, h, w, points](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gc = grad_of(cn);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t s = 0; s < points; ++s) {
            const auto r = lerp_at(cn->data[(b * points + s) * 2], h);
            const auto c = lerp_at(cn->data[(b * points + s) * 2 + 1], w);
            const T w00 = (T(1) - r.frac) * (T(1) - c.frac);
            const T w01 = (T(1) - r.frac) * c.frac;
            const T w10 = r.frac * (T(1) - c.frac);
            const T w11 = r.frac * c.frac;
            T d_row = 0, d_col = 0;
            for (std::size_t k = 0; k < ch; ++k) {
              const T g = self.grad[(b * ch + k) * points + s];
              const std::size_t plane = (b * ch + k) * h * w;
              const T* img = xn->data.data() + plane;
              const T v00 = img[r.lo * w + c.lo], v01 = img[r.lo * w + c.hi];
              const T v10 = img[r.hi * w + c.lo], v11 = img[r.hi * w + c.hi];
              if (gx) {
                gx[plane + r.lo * w + c.lo] += g * w00;
                gx[plane + r.lo * w + c.hi] += g * w01;
                gx[plane + r.hi * w + c.lo] += g * w10;
                gx[plane + r.hi * w + c.hi] += g * w11;
              }
              d_row += g * ((T(1) - c.frac) * (v10 - v00) + c.frac * (v11 - v01));
              d_col += g * ((T(1) - r.frac) * (v01 - v00) + r.frac * (v11 - v10));
            }
            if (gc) {
              if (r.interior) gc[(b * points + s) * 2] += d_row;
              if (c.interior) gc[(b * points + s) * 2 + 1] += d_col;
            }
          }
        }
      });
}

namespace {

struct ResizeTap {
  std::size_t lo, hi;
  double frac;
};

// align_corners=false: src = (dst + 0.5) * in / out - 0.5, clamped to the border.
std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<ResizeTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const double f = std::floor(src);
    taps[i].lo = static_cast<std::size_t>(f);
    taps[i].hi = std::min(taps[i].lo + 1, in - 1);
    taps[i].frac = src - f;
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  detail::require(x.rank() == 4, "resize_bilinear: expected [B, C, H, W], got " + shape_str(x.shape()));
  if (out_h == 0 || out_w == 0) throw GeometryError("resize_bilinear: empty output size");
  const std::size_t planes = x.size(0) * x.size(1), h = x.size(2), w = x.size(3);
  const auto rows = resize_taps(h, out_h);
  const auto cols = resize_taps(w, out_w);
  const auto v = x.data();
  Buffer<T> out(planes * out_h * out_w);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const T* img = v.data() + pl * h * w;
    T* dst = out.data() + pl * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto& r = rows[i];
      const T fr = static_cast<T>(r.frac);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto& c = cols[j];
        const T fc = static_cast<T>(c.frac);
        const T top = img[r.lo * w + c.lo] * (T(1) - fc) + img[r.lo * w + c.hi] * fc;
        const T bottom = img[r.hi * w + c.lo] * (T(1) - fc) + img[r.hi * w + c.hi] * fc;
        dst[i * out_w + j] = top * (T(1) - fr) + bottom * fr;
      }
    }
  }
  Shape out_shape{x.size(0), x.size(1), out_h, out_w};
  return make_result<T>(out_shape, std::move(out), {&x},
                        [xn = x.node(), planes, h, w, out_h, out_w, rows, cols](Node<T>& self) {
                          T* gx = grad_of(xn);
                          for (std::size_t pl = 0; pl < planes; ++pl) {
                            T* g = gx + pl * h * w;
                            const T* dy = self.grad.data() + pl * out_h * out_w;
                            for (std::size_t i = 0; i < out_h; ++i) {
                              const auto& r = rows[i];
                              const T fr = static_cast<T>(r.frac);
                              for (std::size_t j = 0; j < out_w; ++j) {
                                const auto& c = cols[j];
                                const T fc = static_cast<T>(c.frac);
                                const T d = dy[i * out_w + j];
                                g[r.lo * w + c.lo] += d * (T(1) - fr) * (T(1) - fc);
                                g[r.lo * w + c.hi] += d * (T(1) - fr) * fc;
                                g[r.hi * w + c.lo] += d * fr * (T(1) - fc);
                                g[r.hi * w + c.hi] += d * fr * fc;
                              }
                            }
                          }
                        });
}

#define INSTANTIATE(T)                                                   \
  template Tensor<T> bilinear_sample(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
