#include "op_util.hpp"
#include "sparsecd/gemm.hpp"

namespace sparsecd::ops {

using detail::grad_of;
using detail::make_result;
using detail::Node;
using sparsecd::detail::gemm;

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.size(1) == b.size(0),
                  "matmul: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  Buffer<T> out(m * n);
  gemm<T>(false, false, m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return make_result<T>(Shape{m, n}, std::move(out), {&a, &b},
                        [an = a.node(), bn = b.node(), m, n, k](Node<T>& self) {
                          if (T* ga = grad_of(an)) {
                            gemm<T>(false, true, m, k, n, self.grad.data(), bn->data.data(), ga, true);
                          }
                          if (T* gb = grad_of(bn)) {
                            gemm<T>(true, false, k, n, m, an->data.data(), self.grad.data(), gb, true);
                          }
                        });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  detail::require(a.rank() == 3 && b.rank() == 3 && a.size(0) == b.size(0),
                  "bmm: expected matching [G, ., .] operands, got " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  const std::size_t g = a.size(0);
  const std::size_t m = trans_a ? a.size(2) : a.size(1);
  const std::size_t k = trans_a ? a.size(1) : a.size(2);
  const std::size_t kb = trans_b ? b.size(2) : b.size(1);
  const std::size_t n = trans_b ? b.size(1) : b.size(2);
  detail::require(k == kb, "bmm: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                               shape_str(b.shape()));
  Buffer<T> out(g * m * n);
  const T* ap = a.data().data();
  const T* bp = b.data().data();
  for (std::size_t i = 0; i < g; ++i) {
    gemm<T>(trans_a, trans_b, m, n, k, ap + i * m * k, bp + i * k * n, out.data() + i * m * n, false);
  }
  return make_result<T>(
      Shape{g, m, n}, std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), g, m, n, k, trans_a, trans_b](Node<T>& self) {
        T* ga = grad_of(an);
        T* gb = grad_of(bn);
        for (std::size_t i = 0; i < g; ++i) {
          const T* dc = self.grad.data() + i * m * n;
          const T* av = an->data.data() + i * m * k;
          const T* bv = bn->data.data() + i * k * n;
          if (ga) {
            if (!trans_a) {
              gemm<T>(false, !trans_b, m, k, n, dc, bv, ga + i * m * k, true);
            } else {
              gemm<T>(trans_b, true, k, m, n, bv, dc, ga + i * m * k, true);
            }
          }
          if (gb) {
            if (!trans_b) {
              gemm<T>(!trans_a, false, k, n, m, av, dc, gb + i * k * n, true);
            } else {
              gemm<T>(true, trans_a, n, k, m, dc, av, gb + i * k * n, true);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::require(x.rank() >= 2 && w.rank() == 2 && w.size(1) == x.size(1),
                  "conv1x1: weight " + shape_str(w.shape()) + " does not match input " +
                      shape_str(x.shape()));
  const std::size_t batch = x.size(0);
  const std::size_t cin = x.size(1);
  const std::size_t cout = w.size(0);
  const std::size_t spatial = x.numel() / (batch * cin);
  const bool has_bias = b.defined();
  if (has_bias) {
    detail::require(b.rank() == 1 && b.size(0) == cout, "conv1x1: bias shape " + shape_str(b.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[1] = cout;
  Buffer<T> out(batch * cout * spatial);
  const T* xp = x.data().data();
  const T* wp = w.data().data();
  if (spatial == 1) {
    gemm<T>(false, true, batch, cout, cin, xp, wp, out.data(), false);
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      gemm<T>(false, false, cout, spatial, cin, wp, xp + i * cin * spatial, out.data() + i * cout * spatial,
              false);
    }
  }
  if (has_bias) {
    const auto bv = b.data();
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t c = 0; c < cout; ++c) {
        T* row = out.data() + (i * cout + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) row[s] += bv[c];
      }
    }
  }
  return make_result<T>(
      out_shape, std::move(out), {&x, &w, &b},
      [xn = x.node(), wn = w.node(), bn = b.node(), batch, cin, cout, spatial](Node<T>& self) {
        T* gx = grad_of(xn);
        T* gw = grad_of(wn);
        T* gb = bn ? grad_of(bn) : nullptr;
        const T* dy = self.grad.data();
        if (spatial == 1) {
          if (gx) gemm<T>(false, false, batch, cin, cout, dy, wn->data.data(), gx, true);
          if (gw) gemm<T>(true, false, cout, cin, batch, dy, xn->data.data(), gw, true);
        } else {
          for (std::size_t i = 0; i < batch; ++i) {
            const T* dyi = dy + i * cout * spatial;
            if (gx) gemm<T>(true, false, cin, spatial, cout, wn->data.data(), dyi, gx + i * cin * spatial, true);
            if (gw) gemm<T>(false, true, cout, cin, spatial, dyi, xn->data.data() + i * cin * spatial, gw, true);
          }
        }
        if (gb) {
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t c = 0; c < cout; ++c) {
              const T* row = dy + (i * cout + c) * spatial;
              T acc = 0;
              for (std::size_t s = 0; s < spatial; ++s) acc += row[s];
              gb[c] += acc;
            }
          }
        }
      });
}

#define INSTANTIATE(T)                                                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool, bool);        \
  template Tensor<T> conv1x1(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);
SPARSECD_INSTANTIATE_OPS(INSTANTIATE)
#undef INSTANTIATE

}  // namespace sparsecd::ops
