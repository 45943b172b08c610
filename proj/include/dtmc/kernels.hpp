#pragma once

#include <cstddef>
#include <vector>

// Dense kernels for the chain-projection and calibration inner loops.
// A scalar reference backend plus SIMD variants selected at runtime.
//
// Every backend must produce bit-identical results:
//   - kernel sources are built with -ffp-contract=off and the SIMD paths
//     use explicit mul/add (no FMA), so per-element rounding matches;
//   - reductions accumulate four partial sums over the block-aligned
//     prefix (stripe l takes indices i == l mod 4), combine them as
//     (s0 + s2) + (s1 + s3), then add tail elements in index order.
// The equivalence tests assert exact equality between backends, which
// keeps seeded runs reproducible no matter which backend is picked.

namespace dtmc::kernels {

struct Backend {
    const char* name;

    /// y = x * M with M row-major k x k. y must not alias x or m.
    void (*vec_mat)(const double* x, const double* m, std::size_t k, double* y);

    /// y = M * x, i.e. y_i = <row i of M, x>. y must not alias x or m.
    void (*mat_vec)(const double* m, const double* x, std::size_t k, double* y);

    /// a_ij += x_i * y_j for the k x k row-major matrix a.
    void (*outer_acc)(const double* x, const double* y, std::size_t k, double* a);

    /// sum_i (p_i - q_i)^2, striped reduction order.
    double (*sq_dist)(const double* p, const double* q, std::size_t k);

    /// sum_i x_i * y_i, striped reduction order.
    double (*dot)(const double* x, const double* y, std::size_t k);
};

const Backend& scalar();

/// Null when the host or the build lacks the instruction set.
const Backend* avx2();
const Backend* neon();

/// Backend picked once at first use: AVX2, then NEON, then scalar.
/// DTMC_KERNELS=scalar|avx2|neon forces a choice (throws if unavailable).
const Backend& active();

/// Every backend usable on this host, scalar first. For equivalence tests.
std::vector<const Backend*> available();

}
