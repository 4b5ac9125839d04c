#include "sparsecd/gemm.hpp"

#include <algorithm>
#include <vector>

namespace sparsecd::detail {
namespace {

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

// Register tile: kRows rows of C by kCols columns, accumulated over a k-block.
template <typename T>
struct Tile {
  static constexpr std::size_t kRows = 4;
  static constexpr std::size_t kCols = 128 / sizeof(T);
  static constexpr std::size_t kDepth = 256;
};

template <typename T>
void kernel_full(std::size_t k_len, const T* __restrict a, std::size_t lda,
                 const T* __restrict b, std::size_t ldb, T* __restrict c, std::size_t ldc,
                 bool load_c) {
  constexpr std::size_t R = Tile<T>::kRows;
  constexpr std::size_t C = Tile<T>::kCols;
  T acc[R][C];
  if (load_c) {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < C; ++j) acc[r][j] = c[r * ldc + j];
  } else {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < C; ++j) acc[r][j] = T(0);
  }
  for (std::size_t p = 0; p < k_len; ++p) {
    const T* brow = b + p * ldb;
    const T a0 = a[p];
    const T a1 = a[lda + p];
    const T a2 = a[2 * lda + p];
    const T a3 = a[3 * lda + p];
    for (std::size_t j = 0; j < C; ++j) {
      const T bv = brow[j];
      acc[0][j] += a0 * bv;
      acc[1][j] += a1 * bv;
      acc[2][j] += a2 * bv;
      acc[3][j] += a3 * bv;
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) c[r * ldc + j] = acc[r][j];
}

template <typename T>
void kernel_edge(std::size_t rows, std::size_t cols, std::size_t k_len, const T* a,
                 std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                 bool load_c) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* crow = c + r * ldc;
    if (!load_c) std::fill(crow, crow + cols, T(0));
    for (std::size_t p = 0; p < k_len; ++p) {
      const T av = a[r * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  constexpr std::size_t R = Tile<T>::kRows;
  constexpr std::size_t C = Tile<T>::kCols;
  constexpr std::size_t D = Tile<T>::kDepth;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    return;
  }
  for (std::size_t j0 = 0; j0 < n; j0 += C) {
    const std::size_t cols = std::min(C, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += D) {
      const std::size_t depth = std::min(D, k - p0);
      const bool load_c = accumulate || p0 > 0;
      std::size_t i0 = 0;
      if (cols == C) {
        for (; i0 + R <= m; i0 += R) {
          kernel_full(depth, a + i0 * k + p0, k, b + p0 * n + j0, n, c + i0 * n + j0, n, load_c);
        }
      }
      if (i0 < m) {
        kernel_edge(m - i0, cols, depth, a + i0 * k + p0, k, b + p0 * n + j0, n,
                    c + i0 * n + j0, n, load_c);
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  std::vector<T> a_packed;
  std::vector<T> b_packed;
  if (trans_a) {
    a_packed.resize(m * k);
    transpose(a, k, m, a_packed.data());
    a = a_packed.data();
  }
  if (trans_b) {
    b_packed.resize(k * n);
    transpose(b, n, k, b_packed.data());
    b = b_packed.data();
  }
  gemm_nn(m, n, k, a, b, c, accumulate);
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);

}  // namespace sparsecd::detail
