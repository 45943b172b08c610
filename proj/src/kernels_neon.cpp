#include "dtmc/kernels.hpp"

// NEON backend (aarch64, where NEON is baseline). Two float64x2 registers
// per 4-stripe block reproduce the reduction contract from kernels.hpp:
// acc_a holds stripes {0,1}, acc_b holds {2,3}, and the combine
// vaddq(acc_a, acc_b) -> lane0 + lane1 yields (s0 + s2) + (s1 + s3).

#if defined(__aarch64__)

#include <arm_neon.h>

namespace dtmc::kernels {
namespace {

inline double combine_stripes(float64x2_t acc_a, float64x2_t acc_b) {
    const float64x2_t pair = vaddq_f64(acc_a, acc_b);
    return vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
}

void vec_mat_neon(const double* x, const double* m, std::size_t k, double* y) {
    const std::size_t prefix = k & ~std::size_t{1};
    for (std::size_t j = 0; j < k; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const float64x2_t xi = vdupq_n_f64(x[i]);
        const double* row = m + i * k;
        for (std::size_t j = 0; j < prefix; j += 2) {
            float64x2_t acc = vld1q_f64(y + j);
            acc = vaddq_f64(acc, vmulq_f64(xi, vld1q_f64(row + j)));
            vst1q_f64(y + j, acc);
        }
        if (prefix < k) y[prefix] += x[i] * row[prefix];
    }
}

double dot_neon(const double* x, const double* y, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    float64x2_t acc_a = vdupq_n_f64(0.0);
    float64x2_t acc_b = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < prefix; i += 4) {
        acc_a = vaddq_f64(acc_a, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        acc_b = vaddq_f64(acc_b, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    double r = combine_stripes(acc_a, acc_b);
    for (std::size_t i = prefix; i < k; ++i) r += x[i] * y[i];
    return r;
}

double sq_dist_neon(const double* p, const double* q, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    float64x2_t acc_a = vdupq_n_f64(0.0);
    float64x2_t acc_b = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < prefix; i += 4) {
        const float64x2_t da = vsubq_f64(vld1q_f64(p + i), vld1q_f64(q + i));
        const float64x2_t db = vsubq_f64(vld1q_f64(p + i + 2), vld1q_f64(q + i + 2));
        acc_a = vaddq_f64(acc_a, vmulq_f64(da, da));
        acc_b = vaddq_f64(acc_b, vmulq_f64(db, db));
    }
    double r = combine_stripes(acc_a, acc_b);
    for (std::size_t i = prefix; i < k; ++i) {
        const double d = p[i] - q[i];
        r += d * d;
    }
    return r;
}

void mat_vec_neon(const double* m, const double* x, std::size_t k, double* y) {
    for (std::size_t i = 0; i < k; ++i) y[i] = dot_neon(m + i * k, x, k);
}

void outer_acc_neon(const double* x, const double* y, std::size_t k, double* a) {
    const std::size_t prefix = k & ~std::size_t{1};
    for (std::size_t i = 0; i < k; ++i) {
        const float64x2_t xi = vdupq_n_f64(x[i]);
        double* row = a + i * k;
        for (std::size_t j = 0; j < prefix; j += 2) {
            float64x2_t acc = vld1q_f64(row + j);
            acc = vaddq_f64(acc, vmulq_f64(xi, vld1q_f64(y + j)));
            vst1q_f64(row + j, acc);
        }
        if (prefix < k) row[prefix] += x[i] * y[prefix];
    }
}

}  // namespace

const Backend& neon_impl() {
    static const Backend backend{
        "neon", vec_mat_neon, mat_vec_neon, outer_acc_neon,
        sq_dist_neon, dot_neon,
    };
    return backend;
}

}  // namespace dtmc::kernels

#endif  // __aarch64__
