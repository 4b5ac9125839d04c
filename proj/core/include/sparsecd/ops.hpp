#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sparsecd/tensor.hpp"

// Differentiable operations over Tensor<T>. Feature maps are [B, C, H, W].
// Broadcasting is limited to scalar-with-tensor and per-channel vectors.
namespace sparsecd::ops {

// --- elementwise -----------------------------------------------------------
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
/// Exact (erf) GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
/// Hard clamp; gradient is zero outside (lo, hi).
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);
/// x[b, c, ...] * w[b, c]
template <typename T> Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& w);
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// --- shape -----------------------------------------------------------------
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

// --- linear algebra --------------------------------------------------------
/// [m, k] x [k, n] -> [m, n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Batched: [G, m, k] x [G, k, n] -> [G, m, n]; trans flags transpose the
/// last two axes of the stored operand.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);
/// Channel mixing: x[B, Cin, ...] with w[Cout, Cin] and optional b[Cout].
/// A rank-2 x ([B, Cin]) is a fully connected layer.
template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b = {});

// --- convolution -----------------------------------------------------------
/// x[B, Cin, H, W], w[Cout, Cin, kh, kw], optional b[Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 std::size_t stride, std::size_t padding);
/// x[B, Cin, H, W], w[Cin, Cout, kh, kw]; output (H-1)*stride - 2*padding + kh.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           std::size_t stride, std::size_t padding);
/// [B, C, H, W] -> [B, C]
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

// --- normalization ---------------------------------------------------------
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);
/// Normalizes over `axis` with per-element affine weight/bias of that extent.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, std::size_t axis, const Tensor<T>& weight,
                     const Tensor<T>& bias, T eps = T(1e-5));

// --- sampling --------------------------------------------------------------
/// x[B, C, H, W], coords[B, P, Q, 2] holding (row, col) -> [B, C, P, Q].
/// Coordinates are clamped to [0, H-1] x [0, W-1]; the gradient with respect
/// to a clamped coordinate is zero.
template <typename T> Tensor<T> bilinear_sample(const Tensor<T>& x, const Tensor<T>& coords);
/// Half-pixel-centre bilinear resize of [B, C, H, W] to [B, C, out_h, out_w].
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

// --- loss ------------------------------------------------------------------
/// Mean pixel-wise cross-entropy. logits[B, K, H, W]; targets hold B*H*W
/// class indices in [0, K).
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> targets);

}  // namespace sparsecd::ops

namespace sparsecd {

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return ops::add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return ops::sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return ops::mul(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, T s) { return ops::mul_scalar(a, s); }
template <typename T> Tensor<T> operator*(T s, const Tensor<T>& a) { return ops::mul_scalar(a, s); }
template <typename T> Tensor<T> operator+(const Tensor<T>& a, T s) { return ops::add_scalar(a, s); }

}  // namespace sparsecd
