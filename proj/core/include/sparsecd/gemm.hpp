#pragma once

#include <cstddef>

namespace sparsecd::detail {

// C[m x n] (+)= op(A) * op(B), all row-major and densely packed.
// op(A) is m x k: A is stored m x k, or k x m when trans_a.
// op(B) is k x n: B is stored k x n, or n x k when trans_b.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

}  // namespace sparsecd::detail
