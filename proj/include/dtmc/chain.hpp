#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

// Homogeneous discrete-time Markov chains over ordered severity states.
// All values are immutable after construction and every operation is a
// pure function, so they can be shared across bootstrap workers freely.

namespace dtmc {

/// Row sums and probability vectors are checked to this tolerance at
/// construction / validation time.
inline constexpr double kStochasticTol = 1e-9;

/// Looser bound used after long products, where rounding accumulates.
inline constexpr double kProductTol = 1e-6;

/// Severity classes 1..K. 1 is pristine, K is the worst (and absorbing).
struct SeverityScale {
    int num_states = 5;

    /// The class vector [1, 2, ..., K].
    std::vector<double> classes() const;
};

enum class TopologyKind { Single, Multi };

const char* to_string(TopologyKind kind);
TopologyKind topology_from_string(const std::string& name);

/// Structural transition mask. Chains never improve, so all entries below
/// the diagonal are forbidden; Multi additionally permits every j >= i,
/// Single only j == i and j == i + 1. The last state is absorbing.
struct ChainTopology {
    TopologyKind kind = TopologyKind::Single;
    int num_states = 5;

    /// Whether the one-step transition i -> j is permitted (0-based).
    bool allows(int i, int j) const;

    /// Number of permitted positions (9 for Single K=5, 15 for Multi K=5).
    int mask_cardinality() const;

    /// Permitted columns of row i, ascending.
    std::vector<int> row_support(int i) const;

    static ChainTopology single(int num_states) { return {TopologyKind::Single, num_states}; }
    static ChainTopology multi(int num_states) { return {TopologyKind::Multi, num_states}; }
};

/// Row-stochastic K x K one-step transition probability matrix.
struct TransitionMatrix {
    ChainTopology topology;
    std::vector<double> entries;  // row-major K x K

    int size() const { return topology.num_states; }
    double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * size() + j]; }
    const double* row(int i) const { return entries.data() + static_cast<std::size_t>(i) * size(); }
    double* row(int i) { return entries.data() + static_cast<std::size_t>(i) * size(); }

    /// Zero every forbidden position and pin the absorbing row to e_K.
    /// Called after any parameter update so structural zeros stay exact.
    void impose_structure();

    static TransitionMatrix identity(ChainTopology topology);

    /// Build from explicit rows. Throws std::invalid_argument when the
    /// shape does not match the topology. Entries are taken verbatim
    /// (no masking), so a forbidden nonzero shows up in validate().
    static TransitionMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                      ChainTopology topology);
};

/// Probability distribution over the K states after `step` transitions.
struct StateVector {
    std::vector<double> probs;
    int step = 0;

    static StateVector pristine(int num_states);  // [1, 0, ..., 0] at step 0
};

struct ValidationReport {
    bool bounds_ok = false;             // every entry in [0, 1]
    bool row_sums_ok = false;           // each row sums to 1 within 1e-9
    bool structural_zeros_ok = false;   // forbidden positions exactly zero
    bool absorbing_ok = false;          // last row is e_K

    bool pass() const { return bounds_ok && row_sums_ok && structural_zeros_ok && absorbing_ok; }
    std::string describe() const;
};

/// Check every chain invariant. Dimension mismatches are structural
/// errors and throw std::invalid_argument before any check runs.
ValidationReport validate(const TransitionMatrix& matrix);

/// Entries nonnegative and summing to 1 within tol.
bool is_distribution(std::span<const double> probs, double tol = kStochasticTol);

/// C = A * B. Result carries the Multi (upper-triangle) topology, the
/// closure of both masks under products.
TransitionMatrix matmul(const TransitionMatrix& a, const TransitionMatrix& b);

/// P^n by iterated multiplication; n = 0 gives the identity. The result
/// carries the Multi closure topology.
TransitionMatrix n_step_matrix(const TransitionMatrix& matrix, int n);

/// s0 * P^n, evaluated incrementally. Result has step = n.
StateVector project(const StateVector& s0, const TransitionMatrix& matrix, int n);

/// Probability-weighted mean severity class at step n, in [1, K].
double expected_severity(const StateVector& s0, const TransitionMatrix& matrix, int n,
                         const SeverityScale& scale);

// --- serialization ------------------------------------------------------
// {"topology": "single"|"multi", "K": int, "s0": [K], "P": [K][K]}
// Doubles round-trip losslessly (shortest round-trip decimal encoding).

nlohmann::json chain_to_json(const StateVector& s0, const TransitionMatrix& matrix);

struct ParsedChain {
    StateVector s0;
    TransitionMatrix matrix;
};

/// Parse and validate; throws dtmc::IoError on malformed or invalid input.
ParsedChain chain_from_json(const nlohmann::json& doc);

}
