#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtmc/chain.hpp"
#include "dtmc/discretize.hpp"
#include "dtmc/rng.hpp"

// Fits (s0, P) to a discretized table by minimizing the root mean weighted
// square error
//
//   Err = sqrt( sum_{r,k} (S_k(n_r) - Shat_k(n_r))^2 w_r / (R K) )
//
// with row weights w_r = c_r / max(c), and quantifies uncertainty with a
// repeated half-sample bootstrap at the pipe level.
//
// The optimizer is a spectral projected gradient method on the raw simplex
// blocks (the initial vector plus each non-absorbing matrix row restricted
// to its permitted entries): analytic adjoint gradients, Barzilai-Borwein
// steps clamped to [1e-10, 1e10], a monotone Armijo line search, and a
// Euclidean projection back onto each block's simplex. Every accepted
// iterate is feasible and the objective never increases. The start is the
// exact identity chain, which is already feasible, so no initial projection
// is applied and a perfectly pristine table converges in zero iterations
// with err exactly 0.

namespace dtmc {

struct CalibrationConfig {
    ChainTopology topology = ChainTopology::single(5);
    int max_iterations = 500;
    double convergence_tol = 1e-10;  // on Err improvement between iterates
    int replicas = 1000;
    std::uint64_t rng_seed = 0;
    bool fit_initial_vector = true;

    void validate() const;
};

struct CalibratedChain {
    std::vector<double> s0;
    TransitionMatrix matrix;
    double err = 0.0;
    int iterations_used = 0;
    bool converged = false;
};

struct Ensemble {
    CalibrationConfig config;
    DiscretizationConfig disc;
    std::string source_fingerprint;
    int replicas_requested = 0;
    std::vector<CalibratedChain> members;  // successful fits, replica order
    std::vector<int> failed_replicas;      // replica indices, ascending
};

/// Root mean weighted square error of the chain's predictions against the
/// table. No stochasticity requirement on (s0, matrix): the objective is
/// evaluable at any point, which finite-difference checks rely on.
double error(const StateVector& s0, const TransitionMatrix& matrix,
             const DiscretizedTable& table, const std::vector<double>& w);

/// The optimization problem over the packed parameter vector theta:
/// [s0 block (when fit_initial_vector)] then each non-absorbing row's
/// permitted entries in ascending column order. Forbidden entries are
/// never parametrized and the absorbing row stays pinned, so structural
/// zeros hold exactly at every iterate.
class CalibrationProblem {
  public:
    CalibrationProblem(const DiscretizedTable& table, const CalibrationConfig& config);

    std::size_t dimension() const { return dimension_; }

    /// Exact identity chain: s0 = [1,0,...,0], P = I.
    std::vector<double> initial() const;

    /// Euclidean projection of every block onto its probability simplex.
    void make_feasible(std::vector<double>& theta) const;

    /// Err at theta, and the weighted sum of squares W = Err^2 * R * K that
    /// the line search minimizes (a monotone transform, smooth at zero).
    double err(const std::vector<double>& theta) const;
    double weighted_sse(const std::vector<double>& theta) const;

    /// Analytic adjoint gradients. err_gradient is dW scaled by
    /// 1 / (2 Err R K); at Err = 0 it returns zeros.
    std::vector<double> sse_gradient(const std::vector<double>& theta) const;
    std::vector<double> err_gradient(const std::vector<double>& theta) const;

    void unpack(const std::vector<double>& theta, std::vector<double>& s0,
                TransitionMatrix& matrix) const;

  private:
    struct Block {
        std::size_t offset;
        int row;                // -1 for the s0 block
        std::vector<int> cols;  // state indices, ascending
    };

    double forward(const std::vector<double>& theta, std::vector<double>* trajectory) const;

    ChainTopology topology_;
    bool fit_initial_vector_ = true;
    int num_states_ = 5;
    int max_step_ = 0;
    std::vector<int> row_step_;      // table row -> step
    std::vector<double> observed_;   // R x K, row-major
    std::vector<double> weights_;    // R
    std::vector<Block> blocks_;
    std::size_t dimension_ = 0;
};

/// Minimize Err from the identity start. converged = true when the Err
/// improvement between successive accepted iterates falls below
/// convergence_tol (or the iterate is stationary), false when
/// max_iterations is exhausted first. Throws CalibrationError if the
/// objective turns non-finite.
CalibratedChain fit(const DiscretizedTable& table, const CalibrationConfig& config);

/// floor(n/2) distinct indices drawn without replacement, returned
/// ascending; one replica's pipe subset. Throws EmptyDataError when n < 2.
std::vector<std::size_t> half_sample(std::size_t n, rng::Stream& stream);

/// B replicas of half_sample -> build_table -> weights -> fit over the
/// cohort's pipes. Replica r uses the child stream child_seed(rng_seed, r),
/// so members are identical regardless of thread count or execution order.
/// Replicas whose table is empty or whose fit fails are recorded in
/// failed_replicas; more than 20% failures is an ensemble-level
/// CalibrationError.
Ensemble bootstrap(const std::vector<PipeRecord>& pipes,
                   const std::vector<InspectionRecord>& inspections,
                   const DiscretizationConfig& disc, const CalibrationConfig& config,
                   int threads = 1);

/// Linear-interpolation empirical quantile: h = (n-1)q between order
/// statistics. q in [0, 1].
double quantile_linear(std::vector<double> values, double q);

struct BandQuantity {
    enum class Kind { StateProb, Expectation };
    Kind kind = Kind::Expectation;
    int state = 0;  // 1-based, used by StateProb

    static BandQuantity state_prob(int k) { return {Kind::StateProb, k}; }
    static BandQuantity expectation() { return {Kind::Expectation, 0}; }
};

struct BandRow {
    int step = 0;
    double lower = 0.0;   // 2.5th percentile
    double median = 0.0;
    double upper = 0.0;   // 97.5th percentile
};

/// Central 95% band and median of the quantity across ensemble members,
/// per step 0..horizon_steps.
std::vector<BandRow> bands(const Ensemble& ensemble, int horizon_steps,
                           const BandQuantity& quantity);

/// Bands serialized as CSV step,t_years,lower,median,upper with
/// t_years = step * delta_t + delta_t / 2.
std::string bands_to_csv(const std::vector<BandRow>& rows, int delta_t);

/// Non-final states whose self-transition exceeds 1 - 1e-4 (1-based);
/// flags effectively absorbing intermediate states.
std::vector<int> near_absorbing_states(const TransitionMatrix& matrix);

nlohmann::json ensemble_to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const nlohmann::json& doc);
Ensemble load_ensemble_file(const std::string& path);

}
