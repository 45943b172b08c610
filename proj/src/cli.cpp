#include "dtmc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtmc/calibrate.hpp"
#include "dtmc/chain.hpp"
#include "dtmc/csv.hpp"
#include "dtmc/discretize.hpp"
#include "dtmc/errors.hpp"
#include "dtmc/ingest.hpp"
#include "dtmc/kernels.hpp"
#include "dtmc/manifest.hpp"
#include "dtmc/synth.hpp"
#include "dtmc/version.hpp"

namespace dtmc {

namespace {

namespace fs = std::filesystem;

/// Values for options the user left unset may come from a JSON config
/// file; explicit flags always win.
class ConfigOverlay {
  public:
    void load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot read config file: " + path);
        }
        try {
            in >> doc_;
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ": " + e.what());
        }
        if (!doc_.is_object()) {
            throw ConfigError(path + ": config must be a JSON object");
        }
        active_ = true;
    }

    template <typename T>
    void merge(const CLI::Option* option, const std::string& key, T& value) {
        known_.insert(key);
        if (!active_ || option->count() > 0 || !doc_.contains(key)) return;
        try {
            value = doc_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }

    void finish() const {
        if (!active_) return;
        for (const auto& [key, value] : doc_.items()) {
            if (!known_.contains(key)) {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    }

  private:
    nlohmann::json doc_;
    std::set<std::string> known_;
    bool active_ = false;
};

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    }
}

TopologyKind parse_chain_kind(const std::string& name) {
    if (name == "single") return TopologyKind::Single;
    if (name == "multi") return TopologyKind::Multi;
    throw ConfigError("--chain must be 'single' or 'multi' (got '" + name + "')");
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read file: " + path);
    }
    try {
        nlohmann::json doc;
        in >> doc;
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

ParsedChain load_chain_file(const std::string& path) {
    return chain_from_json(load_json_file(path));
}

std::vector<CohortDefinition> resolve_cohorts(const std::string& cohorts_config) {
    return cohorts_config.empty() ? default_cohorts() : load_cohorts_file(cohorts_config);
}

const CohortDefinition& find_cohort(const std::vector<CohortDefinition>& cohorts,
                                    const std::string& name) {
    for (const CohortDefinition& def : cohorts) {
        if (def.name == name) return def;
    }
    std::string available;
    for (const CohortDefinition& def : cohorts) {
        if (!available.empty()) available += ", ";
        available += def.name;
    }
    throw ConfigError("unknown cohort '" + name + "'; available: " + available);
}

/// Damage codes present in the data, the "NONE" marker excluded.
std::set<std::string> available_codes(const std::vector<InspectionRecord>& inspections) {
    std::set<std::string> codes;
    for (const InspectionRecord& insp : inspections) {
        if (insp.damage_code != "NONE") codes.insert(insp.damage_code);
    }
    return codes;
}

void require_damage_code(const std::string& code,
                         const std::vector<InspectionRecord>& inspections) {
    const std::set<std::string> codes = available_codes(inspections);
    std::string listing;
    for (const std::string& c : codes) {
        if (!listing.empty()) listing += ", ";
        listing += c;
    }
    if (listing.empty()) listing = "(none)";
    if (code.empty()) {
        throw ConfigError("--damage-code is required; available codes: " + listing);
    }
    if (!codes.contains(code)) {
        throw ConfigError("damage code '" + code + "' not present in the data; available: " +
                          listing);
    }
}

// Shared front half of discretize and calibrate: load, clean, cohort
// filter, damage-code validation. Writes rejects.csv into out_dir.
struct PreparedData {
    CleanResult cleaned;
    std::vector<PipeRecord> cohort_pipes;
    std::string fingerprint;  // combined content hash of both inputs
};

struct IngestSettings {
    std::string pipes;
    std::string inspections;
    std::string cohorts_config;
    std::string cohort;
    std::string damage_code;
};

PreparedData prepare(const IngestSettings& s, const std::string& out_dir,
                     RunManifest& manifest) {
    if (s.pipes.empty() || s.inspections.empty()) {
        throw ConfigError("--pipes and --inspections are required");
    }
    if (s.cohort.empty()) {
        throw ConfigError("--cohort is required");
    }
    manifest.inputs[s.pipes] = file_fingerprint(s.pipes);
    manifest.inputs[s.inspections] = file_fingerprint(s.inspections);
    if (!s.cohorts_config.empty()) {
        manifest.inputs[s.cohorts_config] = file_fingerprint(s.cohorts_config);
    }

    const Dataset dataset = load_dataset(s.pipes, s.inspections);
    ensure_out_dir(out_dir);
    csv::write_text_file(out_dir + "/rejects.csv", rejects_report_csv(dataset.rejects));

    PreparedData out;
    out.cleaned = clean(dataset.pipes, dataset.inspections);
    const std::vector<CohortDefinition> cohorts = resolve_cohorts(s.cohorts_config);
    out.cohort_pipes = assign_cohort(out.cleaned.pipes, find_cohort(cohorts, s.cohort));
    if (out.cohort_pipes.empty()) {
        throw EmptyDataError("cohort '" + s.cohort + "' matches no pipes after cleaning");
    }
    require_damage_code(s.damage_code, out.cleaned.inspections);
    out.fingerprint =
        sha256_hex(manifest.inputs[s.pipes] + "+" + manifest.inputs[s.inspections]);
    return out;
}

int resolve_horizon_steps(int horizon_years, int delta_t) {
    if (horizon_years < 0) {
        throw ConfigError("--horizon-years must be >= 0");
    }
    return horizon_years / delta_t;
}

// --- discretize -----------------------------------------------------------

struct DiscretizeSettings {
    IngestSettings ingest;
    int delta_t = 3;
    int max_age = 126;
    std::string out_dir;
    std::string config_file;
};

int cmd_discretize(const DiscretizeSettings& s, const std::string& command) {
    Timer timer;
    RunManifest manifest;
    manifest.command = command;

    const PreparedData data = prepare(s.ingest, s.out_dir, manifest);
    const DiscretizationConfig config{s.delta_t, s.ingest.damage_code, s.max_age};
    config.validate();
    const DiscretizedTable table =
        build_table(data.cohort_pipes, data.cleaned.inspections, config);
    csv::write_text_file(s.out_dir + "/table.csv", table_to_csv(table));

    manifest.config = {{"subcommand", "discretize"},
                       {"cohort", s.ingest.cohort},
                       {"damage_code", s.ingest.damage_code},
                       {"delta_t", s.delta_t},
                       {"max_age", s.max_age},
                       {"source_fingerprint", data.fingerprint}};
    manifest.wall_time_seconds = timer.seconds();
    write_manifest(manifest, s.out_dir);

    std::cout << "table rows=" << table.rows.size() << " observations=" << table.observations
              << " dropped_over_horizon=" << table.dropped_over_horizon << "\n"
              << "wrote " << s.out_dir << "/table.csv\n";
    return 0;
}

// --- calibrate --------------------------------------------------------------

struct CalibrateSettings {
    IngestSettings ingest;
    std::string table_file;
    int delta_t = 3;
    int max_age = 126;
    std::string chain = "single";
    int replicas = 1000;
    std::uint64_t seed = 0;
    int horizon_years = 125;
    int threads = 1;
    int max_iterations = 500;
    double convergence_tol = 1e-10;
    bool fit_initial_vector = true;
    std::string out_dir;
    std::string config_file;
};

void write_band_outputs(const Ensemble& ensemble, int horizon_steps, const std::string& out_dir) {
    const int k = ensemble.config.topology.num_states;
    const int delta_t = ensemble.disc.delta_t;
    csv::write_text_file(
        out_dir + "/bands_expectation.csv",
        bands_to_csv(bands(ensemble, horizon_steps, BandQuantity::expectation()), delta_t));
    for (int state = 1; state <= k; ++state) {
        csv::write_text_file(
            out_dir + "/bands_state_" + std::to_string(state) + ".csv",
            bands_to_csv(bands(ensemble, horizon_steps, BandQuantity::state_prob(state)),
                         delta_t));
    }
}

int cmd_calibrate(const CalibrateSettings& s, const std::string& command) {
    Timer timer;
    RunManifest manifest;
    manifest.command = command;

    const bool table_mode = !s.table_file.empty();
    if (table_mode && (!s.ingest.pipes.empty() || !s.ingest.inspections.empty())) {
        throw ConfigError("--table cannot be combined with --pipes/--inspections");
    }

    CalibrationConfig config;
    config.topology = ChainTopology{parse_chain_kind(s.chain), 5};
    config.max_iterations = s.max_iterations;
    config.convergence_tol = s.convergence_tol;
    config.replicas = s.replicas;
    config.rng_seed = s.seed;
    config.fit_initial_vector = s.fit_initial_vector;

    Ensemble ensemble;
    if (table_mode) {
        // A bare table has no pipe identities, so half-sampling is
        // impossible; only a single direct fit is meaningful.
        if (s.replicas != 1) {
            throw ConfigError("--table supports --replicas 1 only "
                              "(half-sampling needs pipe-level data)");
        }
        manifest.inputs[s.table_file] = file_fingerprint(s.table_file);
        const DiscretizedTable table =
            table_from_csv(csv::read_text_file(s.table_file), s.table_file);
        config.topology.num_states = table.num_states;
        ensure_out_dir(s.out_dir);
        ensemble.config = config;
        ensemble.disc = DiscretizationConfig{
            table.delta_t, s.ingest.damage_code,
            (table.rows.back().step + 1) * table.delta_t};
        ensemble.source_fingerprint = manifest.inputs[s.table_file];
        ensemble.replicas_requested = 1;
        ensemble.members.push_back(fit(table, config));
    } else {
        const PreparedData data = prepare(s.ingest, s.out_dir, manifest);
        const DiscretizationConfig disc{s.delta_t, s.ingest.damage_code, s.max_age};
        disc.validate();
        ensemble = bootstrap(data.cohort_pipes, data.cleaned.inspections, disc, config,
                             s.threads);
        ensemble.source_fingerprint = data.fingerprint;
    }

    const int horizon_steps = resolve_horizon_steps(s.horizon_years, ensemble.disc.delta_t);
    csv::write_text_file(s.out_dir + "/ensemble.json", ensemble_to_json(ensemble).dump(2) + "\n");
    write_band_outputs(ensemble, horizon_steps, s.out_dir);

    manifest.config = {{"subcommand", "calibrate"},
                       {"cohort", s.ingest.cohort},
                       {"damage_code", s.ingest.damage_code},
                       {"delta_t", ensemble.disc.delta_t},
                       {"max_age", ensemble.disc.max_age},
                       {"chain", s.chain},
                       {"replicas", s.replicas},
                       {"seed", s.seed},
                       {"fit_initial_vector", s.fit_initial_vector},
                       {"max_iterations", s.max_iterations},
                       {"convergence_tol", s.convergence_tol},
                       {"horizon_years", s.horizon_years},
                       {"source_fingerprint", ensemble.source_fingerprint}};
    manifest.wall_time_seconds = timer.seconds();
    write_manifest(manifest, s.out_dir);

    std::cout << "ensemble members=" << ensemble.members.size()
              << " failed=" << ensemble.failed_replicas.size()
              << " horizon_steps=" << horizon_steps << "\n"
              << "wrote " << s.out_dir << "/ensemble.json\n";
    return 0;
}

// --- project ----------------------------------------------------------------

struct ProjectSettings {
    std::string model;
    int delta_t = 3;
    int horizon_years = 125;
    std::string out_dir;
    std::string config_file;
};

int cmd_project(const ProjectSettings& s, const std::string& command) {
    Timer timer;
    RunManifest manifest;
    manifest.command = command;

    if (s.model.empty()) {
        throw ConfigError("--model is required");
    }
    if (s.delta_t < 1) {
        throw ConfigError("--delta-t must be >= 1");
    }
    manifest.inputs[s.model] = file_fingerprint(s.model);
    const ParsedChain chain = load_chain_file(s.model);
    const int horizon_steps = resolve_horizon_steps(s.horizon_years, s.delta_t);

    const kernels::Backend& kb = kernels::active();
    const auto k = static_cast<std::size_t>(chain.matrix.size());
    std::vector<double> classes(k);
    for (std::size_t i = 0; i < k; ++i) classes[i] = static_cast<double>(i + 1);

    std::string csv_text;
    std::vector<std::string> header = {"step", "t_years"};
    for (std::size_t i = 1; i <= k; ++i) header.push_back("s" + std::to_string(i));
    header.push_back("expectation");
    csv::append_line(csv_text, header);

    std::vector<double> v = chain.s0.probs;
    std::vector<double> next(k);
    double final_expectation = 0.0;
    for (int n = 0; n <= horizon_steps; ++n) {
        if (n > 0) {
            kb.vec_mat(v.data(), chain.matrix.entries.data(), k, next.data());
            v.swap(next);
        }
        std::vector<std::string> fields = {
            std::to_string(n), csv::format_double(n * static_cast<double>(s.delta_t) +
                                                  s.delta_t / 2.0)};
        for (std::size_t i = 0; i < k; ++i) fields.push_back(csv::format_double(v[i]));
        final_expectation = kb.dot(v.data(), classes.data(), k);
        fields.push_back(csv::format_double(final_expectation));
        csv::append_line(csv_text, fields);
    }

    ensure_out_dir(s.out_dir);
    csv::write_text_file(s.out_dir + "/projection.csv", csv_text);

    manifest.config = {{"subcommand", "project"},
                       {"delta_t", s.delta_t},
                       {"horizon_years", s.horizon_years}};
    manifest.wall_time_seconds = timer.seconds();
    write_manifest(manifest, s.out_dir);

    std::cout << "projection steps=" << horizon_steps
              << " final_expectation=" << final_expectation << "\n"
              << "wrote " << s.out_dir << "/projection.csv\n";
    return 0;
}

// --- compare ----------------------------------------------------------------

struct CompareSettings {
    std::vector<std::string> ensembles;
    int horizon_years = 125;
    std::string out_dir;
    std::string config_file;
};

int cmd_compare(const CompareSettings& s, const std::string& command) {
    Timer timer;
    RunManifest manifest;
    manifest.command = command;

    if (s.ensembles.size() < 2) {
        throw ConfigError("compare needs at least 2 ensemble files");
    }

    std::vector<Ensemble> loaded;
    std::vector<std::string> stems;
    std::set<std::string> used;
    for (const std::string& path : s.ensembles) {
        manifest.inputs[path] = file_fingerprint(path);
        loaded.push_back(load_ensemble_file(path));
        std::string stem = fs::path(path).stem().string();
        std::string candidate = stem;
        for (int suffix = 2; used.contains(candidate); ++suffix) {
            candidate = stem + "_" + std::to_string(suffix);
        }
        used.insert(candidate);
        stems.push_back(candidate);
    }
    for (std::size_t i = 1; i < loaded.size(); ++i) {
        if (loaded[i].config.topology.num_states != loaded[0].config.topology.num_states) {
            throw ConfigError("ensembles disagree on K: " + s.ensembles[0] + " vs " +
                              s.ensembles[i]);
        }
        if (loaded[i].disc.delta_t != loaded[0].disc.delta_t) {
            throw ConfigError("ensembles disagree on delta_t: " + s.ensembles[0] + " vs " +
                              s.ensembles[i]);
        }
    }

    const int delta_t = loaded[0].disc.delta_t;
    const int horizon_steps = resolve_horizon_steps(s.horizon_years, delta_t);
    std::vector<std::vector<BandRow>> all_bands;
    all_bands.reserve(loaded.size());
    for (const Ensemble& e : loaded) {
        all_bands.push_back(bands(e, horizon_steps, BandQuantity::expectation()));
    }

    std::string csv_text;
    std::vector<std::string> header = {"step", "t_years"};
    for (const std::string& stem : stems) {
        header.push_back(stem + "_lower");
        header.push_back(stem + "_median");
        header.push_back(stem + "_upper");
    }
    csv::append_line(csv_text, header);
    for (int n = 0; n <= horizon_steps; ++n) {
        const auto ns = static_cast<std::size_t>(n);
        std::vector<std::string> fields = {
            std::to_string(n),
            csv::format_double(n * static_cast<double>(delta_t) + delta_t / 2.0)};
        for (const std::vector<BandRow>& b : all_bands) {
            fields.push_back(csv::format_double(b[ns].lower));
            fields.push_back(csv::format_double(b[ns].median));
            fields.push_back(csv::format_double(b[ns].upper));
        }
        csv::append_line(csv_text, fields);
    }

    ensure_out_dir(s.out_dir);
    csv::write_text_file(s.out_dir + "/comparison.csv", csv_text);

    manifest.config = {{"subcommand", "compare"},
                       {"horizon_years", s.horizon_years},
                       {"columns", stems}};
    manifest.wall_time_seconds = timer.seconds();
    write_manifest(manifest, s.out_dir);

    std::cout << "compared " << loaded.size() << " ensembles over " << horizon_steps + 1
              << " steps\n"
              << "wrote " << s.out_dir << "/comparison.csv\n";
    return 0;
}

// --- synth ------------------------------------------------------------------

struct SynthSettings {
    std::string model;
    long n_pipes = 1000;
    int max_age_years = 75;
    int inspections_per_pipe = 1;
    std::uint64_t seed = 0;
    int delta_t = 3;
    std::string material = "concrete";
    std::string content = "mixed";
    double width_mm = 300.0;
    std::string damage_code = "BAF";
    int reference_year = 2020;
    std::string out_dir;
    std::string config_file;
};

int cmd_synth(const SynthSettings& s, const std::string& command) {
    Timer timer;
    RunManifest manifest;
    manifest.command = command;

    if (s.model.empty()) {
        throw ConfigError("--model is required");
    }
    manifest.inputs[s.model] = file_fingerprint(s.model);
    const ParsedChain chain = load_chain_file(s.model);

    SynthesisConfig config;
    config.s0 = chain.s0.probs;
    config.matrix = chain.matrix;
    config.n_pipes = s.n_pipes;
    config.ages = uniform_grid_ages(s.max_age_years, s.delta_t);
    config.inspections_per_pipe = s.inspections_per_pipe;
    config.rng_seed = s.seed;
    config.delta_t = s.delta_t;
    config.material = s.material;
    config.content = s.content;
    config.width_mm = s.width_mm;
    config.damage_code = s.damage_code;
    config.reference_year = s.reference_year;

    const SynthFiles files = generate_dataset(config);
    ensure_out_dir(s.out_dir);
    csv::write_text_file(s.out_dir + "/pipes.csv", files.pipes_csv);
    csv::write_text_file(s.out_dir + "/inspections.csv", files.inspections_csv);

    manifest.config = {{"subcommand", "synth"},
                       {"n_pipes", s.n_pipes},
                       {"max_age_years", s.max_age_years},
                       {"inspections_per_pipe", s.inspections_per_pipe},
                       {"seed", s.seed},
                       {"delta_t", s.delta_t},
                       {"material", s.material},
                       {"content", s.content},
                       {"width_mm", s.width_mm},
                       {"damage_code", s.damage_code},
                       {"reference_year", s.reference_year}};
    manifest.wall_time_seconds = timer.seconds();
    write_manifest(manifest, s.out_dir);

    std::cout << "generated pipes=" << s.n_pipes
              << " inspections=" << s.n_pipes * s.inspections_per_pipe << "\n"
              << "wrote " << s.out_dir << "/pipes.csv and " << s.out_dir
              << "/inspections.csv\n";
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    std::string command = "dtmc";
    for (const std::string& a : args) command += " " + a;

    CLI::App app{"Markov-chain deterioration modeling for sewer inspection data"};
    app.name("dtmc");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    DiscretizeSettings ds;
    CLI::App* discretize = app.add_subcommand(
        "discretize", "Build the age-binned state-frequency table for one cohort");
    auto* ds_pipes = discretize->add_option("--pipes", ds.ingest.pipes, "Pipe records CSV");
    auto* ds_insp =
        discretize->add_option("--inspections", ds.ingest.inspections, "Inspection rows CSV");
    auto* ds_cc = discretize->add_option("--cohorts-config", ds.ingest.cohorts_config,
                                         "Cohort definitions JSON (defaults built in)");
    auto* ds_cohort = discretize->add_option("--cohort", ds.ingest.cohort, "Cohort name");
    auto* ds_code =
        discretize->add_option("--damage-code", ds.ingest.damage_code, "Damage code to model");
    auto* ds_dt = discretize->add_option("--delta-t", ds.delta_t, "Bin width in years");
    auto* ds_ma = discretize->add_option("--max-age", ds.max_age, "Table horizon in years");
    auto* ds_out = discretize->add_option("--out-dir", ds.out_dir, "Output directory");
    discretize->add_option("--config", ds.config_file, "JSON config file; flags win");

    CalibrateSettings cs;
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "Fit chain parameters with a bootstrap ensemble");
    auto* cs_pipes = calibrate->add_option("--pipes", cs.ingest.pipes, "Pipe records CSV");
    auto* cs_insp =
        calibrate->add_option("--inspections", cs.ingest.inspections, "Inspection rows CSV");
    auto* cs_cc = calibrate->add_option("--cohorts-config", cs.ingest.cohorts_config,
                                        "Cohort definitions JSON (defaults built in)");
    auto* cs_cohort = calibrate->add_option("--cohort", cs.ingest.cohort, "Cohort name");
    auto* cs_code =
        calibrate->add_option("--damage-code", cs.ingest.damage_code, "Damage code to model");
    auto* cs_table = calibrate->add_option(
        "--table", cs.table_file, "Precomputed table CSV (single fit, no resampling)");
    auto* cs_dt = calibrate->add_option("--delta-t", cs.delta_t, "Bin width in years");
    auto* cs_ma = calibrate->add_option("--max-age", cs.max_age, "Table horizon in years");
    auto* cs_chain =
        calibrate->add_option("--chain", cs.chain, "Transition topology: single or multi");
    auto* cs_replicas =
        calibrate->add_option("--replicas", cs.replicas, "Bootstrap replica count");
    auto* cs_seed = calibrate->add_option("--seed", cs.seed, "Root RNG seed");
    auto* cs_horizon =
        calibrate->add_option("--horizon-years", cs.horizon_years, "Band horizon in years");
    auto* cs_threads = calibrate->add_option("--threads", cs.threads, "Worker thread cap");
    auto* cs_iter = calibrate->add_option("--max-iterations", cs.max_iterations,
                                          "Optimizer iteration cap");
    auto* cs_tol = calibrate->add_option("--convergence-tol", cs.convergence_tol,
                                         "Err improvement convergence threshold");
    auto* cs_fit = calibrate->add_flag("--fit-initial-vector,!--no-fit-initial-vector",
                                       cs.fit_initial_vector,
                                       "Optimize the initial state vector jointly with P");
    auto* cs_out = calibrate->add_option("--out-dir", cs.out_dir, "Output directory");
    calibrate->add_option("--config", cs.config_file, "JSON config file; flags win");

    ProjectSettings ps;
    CLI::App* project =
        app.add_subcommand("project", "Project state probabilities from a chain JSON");
    auto* ps_model = project->add_option("--model", ps.model, "Chain JSON file");
    auto* ps_dt = project->add_option("--delta-t", ps.delta_t, "Years per step");
    auto* ps_horizon =
        project->add_option("--horizon-years", ps.horizon_years, "Projection horizon in years");
    auto* ps_out = project->add_option("--out-dir", ps.out_dir, "Output directory");
    project->add_option("--config", ps.config_file, "JSON config file; flags win");

    CompareSettings xs;
    CLI::App* compare =
        app.add_subcommand("compare", "Align expectation bands of two or more ensembles");
    auto* xs_inputs =
        compare->add_option("ensembles", xs.ensembles, "Ensemble JSON files (two or more)");
    auto* xs_horizon =
        compare->add_option("--horizon-years", xs.horizon_years, "Comparison horizon in years");
    auto* xs_out = compare->add_option("--out-dir", xs.out_dir, "Output directory");
    compare->add_option("--config", xs.config_file, "JSON config file; flags win");

    SynthSettings ss;
    CLI::App* synth =
        app.add_subcommand("synth", "Generate a synthetic dataset from a known chain");
    auto* ss_model = synth->add_option("--model", ss.model, "Ground-truth chain JSON");
    auto* ss_n = synth->add_option("--n-pipes", ss.n_pipes, "Number of pipes");
    auto* ss_ages = synth->add_option("--max-age-years", ss.max_age_years,
                                      "Ages cover the delta-t grid midpoints below this");
    auto* ss_ipp = synth->add_option("--inspections-per-pipe", ss.inspections_per_pipe,
                                     "Follow-up inspections per pipe");
    auto* ss_seed = synth->add_option("--seed", ss.seed, "Root RNG seed");
    auto* ss_dt = synth->add_option("--delta-t", ss.delta_t, "Years per step");
    auto* ss_material = synth->add_option("--material", ss.material, "Pipe material");
    auto* ss_content = synth->add_option("--content", ss.content, "Pipe content");
    auto* ss_width = synth->add_option("--width-mm", ss.width_mm, "Pipe width in mm");
    auto* ss_code = synth->add_option("--damage-code", ss.damage_code, "Emitted damage code");
    auto* ss_year =
        synth->add_option("--reference-year", ss.reference_year, "Year of first inspections");
    auto* ss_out = synth->add_option("--out-dir", ss.out_dir, "Output directory");
    synth->add_option("--config", ss.config_file, "JSON config file; flags win");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (discretize->parsed()) {
            ConfigOverlay overlay;
            if (!ds.config_file.empty()) overlay.load(ds.config_file);
            overlay.merge(ds_pipes, "pipes", ds.ingest.pipes);
            overlay.merge(ds_insp, "inspections", ds.ingest.inspections);
            overlay.merge(ds_cc, "cohorts_config", ds.ingest.cohorts_config);
            overlay.merge(ds_cohort, "cohort", ds.ingest.cohort);
            overlay.merge(ds_code, "damage_code", ds.ingest.damage_code);
            overlay.merge(ds_dt, "delta_t", ds.delta_t);
            overlay.merge(ds_ma, "max_age", ds.max_age);
            overlay.merge(ds_out, "out_dir", ds.out_dir);
            overlay.finish();
            if (ds.out_dir.empty()) throw ConfigError("--out-dir is required");
            return cmd_discretize(ds, command);
        }
        if (calibrate->parsed()) {
            ConfigOverlay overlay;
            if (!cs.config_file.empty()) overlay.load(cs.config_file);
            overlay.merge(cs_pipes, "pipes", cs.ingest.pipes);
            overlay.merge(cs_insp, "inspections", cs.ingest.inspections);
            overlay.merge(cs_cc, "cohorts_config", cs.ingest.cohorts_config);
            overlay.merge(cs_cohort, "cohort", cs.ingest.cohort);
            overlay.merge(cs_code, "damage_code", cs.ingest.damage_code);
            overlay.merge(cs_table, "table", cs.table_file);
            overlay.merge(cs_dt, "delta_t", cs.delta_t);
            overlay.merge(cs_ma, "max_age", cs.max_age);
            overlay.merge(cs_chain, "chain", cs.chain);
            overlay.merge(cs_replicas, "replicas", cs.replicas);
            overlay.merge(cs_seed, "seed", cs.seed);
            overlay.merge(cs_horizon, "horizon_years", cs.horizon_years);
            overlay.merge(cs_threads, "threads", cs.threads);
            overlay.merge(cs_iter, "max_iterations", cs.max_iterations);
            overlay.merge(cs_tol, "convergence_tol", cs.convergence_tol);
            overlay.merge(cs_fit, "fit_initial_vector", cs.fit_initial_vector);
            overlay.merge(cs_out, "out_dir", cs.out_dir);
            overlay.finish();
            if (cs.out_dir.empty()) throw ConfigError("--out-dir is required");
            if (cs.table_file.empty() && cs.ingest.pipes.empty()) {
                throw ConfigError("calibrate needs --pipes/--inspections/--cohort or --table");
            }
            return cmd_calibrate(cs, command);
        }
        if (project->parsed()) {
            ConfigOverlay overlay;
            if (!ps.config_file.empty()) overlay.load(ps.config_file);
            overlay.merge(ps_model, "model", ps.model);
            overlay.merge(ps_dt, "delta_t", ps.delta_t);
            overlay.merge(ps_horizon, "horizon_years", ps.horizon_years);
            overlay.merge(ps_out, "out_dir", ps.out_dir);
            overlay.finish();
            if (ps.out_dir.empty()) throw ConfigError("--out-dir is required");
            return cmd_project(ps, command);
        }
        if (compare->parsed()) {
            ConfigOverlay overlay;
            if (!xs.config_file.empty()) overlay.load(xs.config_file);
            overlay.merge(xs_inputs, "ensembles", xs.ensembles);
            overlay.merge(xs_horizon, "horizon_years", xs.horizon_years);
            overlay.merge(xs_out, "out_dir", xs.out_dir);
            overlay.finish();
            if (xs.out_dir.empty()) throw ConfigError("--out-dir is required");
            return cmd_compare(xs, command);
        }
        if (synth->parsed()) {
            ConfigOverlay overlay;
            if (!ss.config_file.empty()) overlay.load(ss.config_file);
            overlay.merge(ss_model, "model", ss.model);
            overlay.merge(ss_n, "n_pipes", ss.n_pipes);
            overlay.merge(ss_ages, "max_age_years", ss.max_age_years);
            overlay.merge(ss_ipp, "inspections_per_pipe", ss.inspections_per_pipe);
            overlay.merge(ss_seed, "seed", ss.seed);
            overlay.merge(ss_dt, "delta_t", ss.delta_t);
            overlay.merge(ss_material, "material", ss.material);
            overlay.merge(ss_content, "content", ss.content);
            overlay.merge(ss_width, "width_mm", ss.width_mm);
            overlay.merge(ss_code, "damage_code", ss.damage_code);
            overlay.merge(ss_year, "reference_year", ss.reference_year);
            overlay.merge(ss_out, "out_dir", ss.out_dir);
            overlay.finish();
            if (ss.out_dir.empty()) throw ConfigError("--out-dir is required");
            return cmd_synth(ss, command);
        }
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EmptyDataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const CalibrationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}

}
