#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

// Inspection-record ingestion: CSV parsing with a rejects report, the
// cleaning rules (pre-1920 pipes, erroneous years, impossible dates) and
// cohort filters. See README for the file schemas.

namespace dtmc {

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;
    std::string iso() const;
};

/// Parse strict ISO-8601 YYYY-MM-DD; rejects impossible calendar dates.
std::optional<Date> parse_date(const std::string& text);

struct PipeRecord {
    std::string pipe_id;
    int construction_year = 0;
    std::string material;
    std::string content;
    double width_mm = 0.0;

    bool operator==(const PipeRecord&) const = default;
};

/// One observed damage instance on one pipe at one date. An inspection
/// that found no damage is encoded as a single row with damage code
/// "NONE" and class 1.
struct InspectionRecord {
    std::string inspection_id;
    std::string pipe_id;
    Date date;
    std::string damage_code;
    int damage_class = 1;

    bool operator==(const InspectionRecord&) const = default;
};

struct Reject {
    std::string file;    // "pipes" or "inspections"
    std::size_t line;    // 1-based source line
    std::string reason;

    bool operator==(const Reject&) const = default;
};

struct Dataset {
    std::vector<PipeRecord> pipes;
    std::vector<InspectionRecord> inspections;
    std::vector<Reject> rejects;
};

/// Parse both input files. Malformed rows land in the rejects report with
/// row numbers and reasons; unreadable files or missing required columns
/// throw dtmc::IoError. num_states bounds the accepted damage classes.
Dataset load_dataset(const std::string& pipes_path, const std::string& inspections_path,
                     int num_states = 5);

/// Deterministic CSV serialization of the rejects report.
std::string rejects_report_csv(const std::vector<Reject>& rejects);

struct CleanStats {
    long pipes_erroneous_year = 0;     // construction year < 1800
    long pipes_before_1920 = 0;        // 1800 <= year < 1920
    long inspections_of_removed_pipes = 0;
    long inspections_orphaned = 0;     // pipe_id absent from the pipe set
    long inspections_erroneous_date = 0;  // dated before construction year

    long pipes_removed() const { return pipes_erroneous_year + pipes_before_1920; }
    long inspections_removed() const {
        return inspections_of_removed_pipes + inspections_orphaned + inspections_erroneous_date;
    }
};

struct CleanResult {
    std::vector<PipeRecord> pipes;
    std::vector<InspectionRecord> inspections;
    CleanStats stats;
};

/// Apply the cleaning rules. Every surviving inspection references a
/// surviving pipe.
CleanResult clean(const std::vector<PipeRecord>& pipes,
                  const std::vector<InspectionRecord>& inspections);

/// Conjunctive attribute filter over pipe records. Material and content
/// compare case-insensitively; width_min is inclusive, width_max exclusive.
struct CohortDefinition {
    std::string name;
    std::optional<std::string> material;
    std::vector<std::string> content;  // any-of; empty = unconstrained
    std::optional<double> width_min_mm;
    std::optional<double> width_max_mm;
};

/// The six default cohorts (CMW, CR, PMW, PR, CdL, CdG).
const std::vector<CohortDefinition>& default_cohorts();

/// Parse a cohorts config: JSON list of {name, material?, content?,
/// width_min_mm?, width_max_mm?}. Unknown keys are configuration errors.
std::vector<CohortDefinition> parse_cohorts_json(const nlohmann::json& doc);
std::vector<CohortDefinition> load_cohorts_file(const std::string& path);

/// The pipes satisfying every predicate of the definition. Cohorts may
/// overlap; assigning twice is a no-op.
std::vector<PipeRecord> assign_cohort(const std::vector<PipeRecord>& pipes,
                                      const CohortDefinition& definition);

}
