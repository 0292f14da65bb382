#pragma once

#include <cstdint>

namespace mtil::grad {

// Raw row-major matrix kernels shared by the matmul ops and their backward
// passes. Parallelism is over output rows only, so results are bitwise
// identical for any thread count.

// C[m,n] = (or +=) A[m,k] * B[k,n]
template <typename S>
void mm_nn(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        S* crow = c + i * n;
        if (!accumulate)
            for (int64_t j = 0; j < n; ++j) crow[j] = S(0);
        const S* arow = a + i * k;
        for (int64_t l = 0; l < k; ++l) {
            const S av = arow[l];
            if (av == S(0)) continue;
            const S* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] = (or +=) A[m,k] * B^T where B is stored [n,k]
template <typename S>
void mm_nt(const S* a, const S* bt, S* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        S* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const S* brow = bt + j * k;
            S acc = S(0);
            for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

// C[m,n] = (or +=) A^T * B where A is stored [k,m], B is [k,n]
template <typename S>
void mm_tn(const S* at, const S* b, S* c, int64_t m, int64_t k, int64_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        S* crow = c + i * n;
        if (!accumulate)
            for (int64_t j = 0; j < n; ++j) crow[j] = S(0);
        for (int64_t l = 0; l < k; ++l) {
            const S av = at[l * m + i];
            if (av == S(0)) continue;
            const S* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace mtil::grad
