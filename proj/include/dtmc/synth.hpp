#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtmc/chain.hpp"
#include "dtmc/rng.hpp"

// Synthetic pipe populations drawn from a known ground-truth chain: the
// Monte Carlo oracle behind calibration-recovery and projection checks.
// Output is the exact CSV schema the ingest module parses, so generated
// data round-trips through the full pipeline with zero rejects.

namespace dtmc {

struct AgeWeight {
    int age = 0;        // age in years at the first inspection
    double weight = 0.0;

    bool operator==(const AgeWeight&) const = default;
};

struct SynthesisConfig {
    std::vector<double> s0;
    TransitionMatrix matrix;
    long n_pipes = 0;
    std::vector<AgeWeight> ages;     // weights normalized internally
    int inspections_per_pipe = 1;    // follow-ups spaced delta_t years apart
    std::uint64_t rng_seed = 0;
    int delta_t = 3;
    std::string material = "concrete";
    std::string content = "mixed";
    double width_mm = 300.0;
    std::string damage_code = "BAF";
    int reference_year = 2020;       // year of every first inspection

    void validate() const;
};

/// Sample an initial state from s0, then apply n_steps one-step
/// transitions drawn from the rows of the matrix. Returns a class 1..K.
int simulate_state(const std::vector<double>& s0, const TransitionMatrix& matrix, int n_steps,
                   rng::Stream& stream);

/// Ages at the bin midpoints of the delta_t grid, equally weighted:
/// n * delta_t + delta_t / 2 for every bin below max_age_years.
std::vector<AgeWeight> uniform_grid_ages(int max_age_years, int delta_t);

struct SynthFiles {
    std::string pipes_csv;
    std::string inspections_csv;
};

/// Generate the population. Pipe counts per age follow largest-remainder
/// apportionment of the weights; pipe p uses the child stream
/// child_seed(rng_seed, p), so output is reproducible byte for byte.
/// A pipe inspected more than once is observed along one simulated
/// trajectory, so repeat inspections never report improvement.
/// Construction years land at reference_year - age; ages that would place
/// construction before 1920 are a ConfigError (clean() would drop them).
SynthFiles generate_dataset(const SynthesisConfig& config);

}
