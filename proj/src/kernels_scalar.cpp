#include "dtmc/kernels.hpp"

// Reference backend. The striped reduction below is the contract every
// SIMD backend reproduces bit-for-bit (see kernels.hpp).

namespace dtmc::kernels {
namespace {

void vec_mat_scalar(const double* x, const double* m, std::size_t k, double* y) {
    for (std::size_t j = 0; j < k; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double xi = x[i];
        const double* row = m + i * k;
        for (std::size_t j = 0; j < k; ++j) y[j] += xi * row[j];
    }
}

double dot_striped(const double* x, const double* y, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t i = 0; i < prefix; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    double r = (s0 + s2) + (s1 + s3);
    for (std::size_t i = prefix; i < k; ++i) r += x[i] * y[i];
    return r;
}

double sq_dist_striped(const double* p, const double* q, std::size_t k) {
    const std::size_t prefix = k & ~std::size_t{3};
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t i = 0; i < prefix; i += 4) {
        const double d0 = p[i] - q[i];
        const double d1 = p[i + 1] - q[i + 1];
        const double d2 = p[i + 2] - q[i + 2];
        const double d3 = p[i + 3] - q[i + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    double r = (s0 + s2) + (s1 + s3);
    for (std::size_t i = prefix; i < k; ++i) {
        const double d = p[i] - q[i];
        r += d * d;
    }
    return r;
}

void mat_vec_scalar(const double* m, const double* x, std::size_t k, double* y) {
    for (std::size_t i = 0; i < k; ++i) y[i] = dot_striped(m + i * k, x, k);
}

void outer_acc_scalar(const double* x, const double* y, std::size_t k, double* a) {
    for (std::size_t i = 0; i < k; ++i) {
        const double xi = x[i];
        double* row = a + i * k;
        for (std::size_t j = 0; j < k; ++j) row[j] += xi * y[j];
    }
}

}  // namespace

const Backend& scalar() {
    static const Backend backend{
        "scalar", vec_mat_scalar, mat_vec_scalar, outer_acc_scalar,
        sq_dist_striped, dot_striped,
    };
    return backend;
}

}  // namespace dtmc::kernels
