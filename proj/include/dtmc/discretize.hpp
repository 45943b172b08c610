#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dtmc/ingest.hpp"

// Age-binned state-frequency tables: the empirical ground truth that
// calibration fits against. One table = one cohort x one damage code.

namespace dtmc {

struct DiscretizationConfig {
    int delta_t = 3;          // bin width in years
    std::string damage_code;
    int max_age = 126;        // observations at or past this age are dropped

    /// Throws ConfigError unless delta_t >= 1 and max_age is a positive
    /// multiple of delta_t.
    void validate() const;
};

struct TableRow {
    long count = 0;
    int age_lo = 0;
    int age_hi = 0;   // exclusive
    double t = 0.0;   // interval midpoint, age_lo + delta_t/2
    int step = 0;     // age_lo / delta_t
    std::vector<double> freqs;  // length K, sums to 1

    bool operator==(const TableRow&) const = default;
};

struct DiscretizedTable {
    int num_states = 5;
    int delta_t = 3;
    std::string damage_code;
    std::vector<TableRow> rows;      // ascending step, zero-count bins omitted
    long observations = 0;           // total contributing inspections
    long dropped_over_horizon = 0;   // observations with age >= max_age

    bool operator==(const DiscretizedTable&) const = default;
};

/// Severity of one inspection for one damage code: the maximum class among
/// the inspection's rows carrying that code, or 1 when none do.
int pipe_state_at_inspection(const std::vector<const InspectionRecord*>& inspection_rows,
                             const std::string& damage_code);

/// Per-pipe observation list; one (step, state) pair per inspection of the
/// pipe. Pipes without inspections keep an empty list so resampling frames
/// cover the whole cohort.
struct PipeObservations {
    std::string pipe_id;
    std::vector<std::pair<int, int>> obs;  // (step, severity class 1..K)
};

/// Group inspections by inspection_id, evaluate each at the configured
/// damage code, and bin by age = inspection year - construction year.
/// Inspections referencing pipes outside `pipes` are ignored. Counts
/// observations dropped for age >= max_age into *dropped if non-null.
std::vector<PipeObservations> collect_observations(const std::vector<PipeRecord>& pipes,
                                                   const std::vector<InspectionRecord>& inspections,
                                                   const DiscretizationConfig& config,
                                                   long* dropped = nullptr);

/// Tally per-bin class counts and normalize. Throws EmptyDataError when no
/// inspection contributes.
DiscretizedTable build_table(const std::vector<PipeRecord>& pipes,
                             const std::vector<InspectionRecord>& inspections,
                             const DiscretizationConfig& config, int num_states = 5);

/// Table from precollected observations; same result as build_table on the
/// pipes underlying `observations`.
DiscretizedTable table_from_observations(const std::vector<const PipeObservations*>& observations,
                                         const DiscretizationConfig& config, int num_states);

/// Row weights c_r / max(c): the largest row weighs exactly 1.
std::vector<double> weights(const DiscretizedTable& table);

/// CSV round-trip; header count,age_lo,age_hi,t,step,s1..sK.
std::string table_to_csv(const DiscretizedTable& table);
DiscretizedTable table_from_csv(const std::string& text, const std::string& origin);

}
