#include "dtmc/kernels.hpp"

// AVX2 backend. No FMA: explicit mul/add keeps per-element rounding equal
// to the scalar reference. Reductions use the striped accumulation order
// from kernels.hpp; the tail past the 4-aligned prefix is handled with
// scalar adds (reductions) or masked load/store (elementwise updates).

#if defined(__x86_64__) && defined(__AVX2__)

#include <immintrin.h>

#include <cstdint>

namespace dtmc::kernels {
namespace {

// Mask selecting the first rem lanes, rem in 1..3.
inline __m256i tail_mask(std::size_t rem) {
    alignas(32) static const std::int64_t bits[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + 4 - rem));
}

// (s0 + s2) + (s1 + s3)
inline double hsum_stripes(__m256d acc) {
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
}

void vec_mat_avx2(const double* x, const double* m, std::size_t k, double* y) {
    const std::size_t prefix = k & ~std::size_t{3};
    const std::size_t rem = k - prefix;
    const __m256i mask = rem ? tail_mask(rem) : _mm256_setzero_si256();

    for (std::size_t j = 0; j < prefix; j += 4)
        _mm256_storeu_pd(y + j, _mm256_setzero_pd());
    if (rem) _mm256_maskstore_pd(y + prefix, mask, _mm256_setzero_pd());

    for (std::size_t i = 0; i < k; ++i) {
        const __m256d xi = _mm256_set1_pd(x[i]);
        const double* row = m + i * k;
        for (std::size_t j = 0; j < prefix; j += 4) {
            __m256d acc = _mm256_loadu_pd(y + j);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_loadu_pd(row + j)));
            _mm256_storeu_pd(y + j, acc);
        }
        if (rem) {
            __m256d acc = _mm256_maskload_pd(y + prefix, mask);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_maskload_pd(row + prefix, mask)));
            _mm256_maskstore_pd(y + prefix, mask, acc);
        }
    }
}

double dot_avx2(const double* x, const double* y, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < prefix; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    double r = hsum_stripes(acc);
    for (std::size_t i = prefix; i < k; ++i) r += x[i] * y[i];
    return r;
}

double sq_dist_avx2(const double* p, const double* q, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < prefix; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(q + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double r = hsum_stripes(acc);
    for (std::size_t i = prefix; i < k; ++i) {
        const double d = p[i] - q[i];
        r += d * d;
    }
    return r;
}

void mat_vec_avx2(const double* m, const double* x, std::size_t k, double* y) {
    for (std::size_t i = 0; i < k; ++i) y[i] = dot_avx2(m + i * k, x, k);
}

void outer_acc_avx2(const double* x, const double* y, std::size_t k, double* a) {
    const std::size_t prefix = k & ~std::size_t{3};
    const std::size_t rem = k - prefix;
    const __m256i mask = rem ? tail_mask(rem) : _mm256_setzero_si256();

    for (std::size_t i = 0; i < k; ++i) {
        const __m256d xi = _mm256_set1_pd(x[i]);
        double* row = a + i * k;
        for (std::size_t j = 0; j < prefix; j += 4) {
            __m256d acc = _mm256_loadu_pd(row + j);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_loadu_pd(y + j)));
            _mm256_storeu_pd(row + j, acc);
        }
        if (rem) {
            __m256d acc = _mm256_maskload_pd(row + prefix, mask);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_maskload_pd(y + prefix, mask)));
            _mm256_maskstore_pd(row + prefix, mask, acc);
        }
    }
}

}  // namespace

const Backend& avx2_impl() {
    static const Backend backend{
        "avx2", vec_mat_avx2, mat_vec_avx2, outer_acc_avx2,
        sq_dist_avx2, dot_avx2,
    };
    return backend;
}

}  // namespace dtmc::kernels

#endif  // __x86_64__ && __AVX2__
