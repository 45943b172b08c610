#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "dtmc/chain.hpp"
#include "dtmc/rng.hpp"
#include "dtmc/synth.hpp"

// Independent oracles the tests check library results against. These
// deliberately avoid the library's linear-algebra kernels: the
// distribution oracle multiplies path probabilities one transition at a
// time, and the gradient oracle uses central finite differences.

namespace oracles {

/// Distribution after n steps by explicit path enumeration (K^n paths).
inline std::vector<double> enumerate_distribution(const std::vector<double>& s0,
                                                  const dtmc::TransitionMatrix& matrix, int n) {
    const int k = matrix.size();
    std::vector<double> dist(static_cast<std::size_t>(k), 0.0);
    std::function<void(int, int, double)> walk = [&](int state, int depth, double prob) {
        if (prob == 0.0) return;
        if (depth == n) {
            dist[static_cast<std::size_t>(state)] += prob;
            return;
        }
        for (int j = 0; j < k; ++j) {
            walk(j, depth + 1, prob * matrix.at(state, j));
        }
    };
    for (int i = 0; i < k; ++i) {
        walk(i, 0, s0[static_cast<std::size_t>(i)]);
    }
    return dist;
}

/// Random point on the probability simplex over `support` positions.
inline void random_simplex_row(dtmc::rng::Stream& stream, const std::vector<int>& support,
                               double* row) {
    double total = 0.0;
    std::vector<double> raw(support.size());
    while (total == 0.0) {
        for (double& x : raw) {
            x = stream.next_unit();
            total += x;
        }
    }
    for (std::size_t p = 0; p < support.size(); ++p) {
        row[support[p]] = raw[p] / total;
    }
}

struct RandomChain {
    std::vector<double> s0;
    dtmc::TransitionMatrix matrix;
};

/// Valid random chain: random simplex rows over the permitted entries,
/// absorbing last row, random initial distribution.
inline RandomChain random_chain(dtmc::rng::Stream& stream, dtmc::ChainTopology topology) {
    const int k = topology.num_states;
    RandomChain out;
    out.matrix.topology = topology;
    out.matrix.entries.assign(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k - 1; ++i) {
        random_simplex_row(stream, topology.row_support(i), out.matrix.row(i));
    }
    out.matrix.entries[static_cast<std::size_t>(k) * k - 1] = 1.0;

    out.s0.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<int> full(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) full[static_cast<std::size_t>(j)] = j;
    random_simplex_row(stream, full, out.s0.data());
    return out;
}

/// Empirical state frequencies of `samples` simulated trajectories at
/// step n.
inline std::vector<double> mc_frequencies(const std::vector<double>& s0,
                                          const dtmc::TransitionMatrix& matrix, int n,
                                          long samples, std::uint64_t seed) {
    const int k = matrix.size();
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    dtmc::rng::Stream stream(seed);
    for (long i = 0; i < samples; ++i) {
        counts[static_cast<std::size_t>(dtmc::simulate_state(s0, matrix, n, stream) - 1)] += 1;
    }
    std::vector<double> freqs(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        freqs[static_cast<std::size_t>(j)] =
            static_cast<double>(counts[static_cast<std::size_t>(j)]) /
            static_cast<double>(samples);
    }
    return freqs;
}

inline double binomial_se(double p, long samples) {
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(samples));
}

/// Central finite-difference gradient of f at theta.
inline std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> theta, double h) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = f(theta);
        theta[i] = saved - h;
        const double down = f(theta);
        theta[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (const double x : a) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace oracles
