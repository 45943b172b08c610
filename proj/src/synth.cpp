#include "dtmc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dtmc/csv.hpp"
#include "dtmc/errors.hpp"
#include "dtmc/ingest.hpp"

namespace dtmc {

namespace {

/// CDF inversion over a probability row. Falls back to the last positive
/// entry when accumulated rounding leaves u above the total.
int sample_index(const double* probs, int k, rng::Stream& stream) {
    const double u = stream.next_unit();
    double cum = 0.0;
    int last_positive = 0;
    for (int j = 0; j < k; ++j) {
        if (probs[j] > 0.0) last_positive = j;
        cum += probs[j];
        if (u < cum) return j;
    }
    return last_positive;
}

std::string format_id(const char* prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, index);
    return buf;
}

}  // namespace

void SynthesisConfig::validate() const {
    const ValidationReport report = dtmc::validate(matrix);
    if (!report.pass()) {
        throw ConfigError("synthesis chain is invalid: " + report.describe());
    }
    if (static_cast<int>(s0.size()) != matrix.size() || !is_distribution(s0)) {
        throw ConfigError("synthesis s0 must be a distribution over the chain's states");
    }
    if (n_pipes < 1) {
        throw ConfigError("n_pipes must be >= 1");
    }
    if (inspections_per_pipe < 1) {
        throw ConfigError("inspections_per_pipe must be >= 1");
    }
    if (delta_t < 1) {
        throw ConfigError("delta_t must be >= 1");
    }
    if (ages.empty()) {
        throw ConfigError("age distribution must not be empty");
    }
    double total = 0.0;
    for (const AgeWeight& aw : ages) {
        if (aw.age < 0) {
            throw ConfigError("ages must be >= 0");
        }
        if (!(aw.weight >= 0.0)) {
            throw ConfigError("age weights must be >= 0");
        }
        total += aw.weight;
        if (reference_year - aw.age < 1920) {
            throw ConfigError("age " + std::to_string(aw.age) +
                              " puts construction before 1920; raise reference_year");
        }
    }
    if (!(total > 0.0)) {
        throw ConfigError("age weights must have positive total");
    }
    if (!(width_mm > 0.0)) {
        throw ConfigError("width_mm must be positive");
    }
    if (damage_code.empty() || damage_code == "NONE") {
        throw ConfigError("damage_code must be a non-empty code other than NONE");
    }
}

int simulate_state(const std::vector<double>& s0, const TransitionMatrix& matrix, int n_steps,
                   rng::Stream& stream) {
    const int k = matrix.size();
    int state = sample_index(s0.data(), k, stream);
    for (int n = 0; n < n_steps && state != k - 1; ++n) {
        state = sample_index(matrix.row(state), k, stream);
    }
    return state + 1;
}

std::vector<AgeWeight> uniform_grid_ages(int max_age_years, int delta_t) {
    if (delta_t < 1 || max_age_years <= delta_t / 2) {
        throw ConfigError("age grid needs delta_t >= 1 and room for at least one midpoint");
    }
    std::vector<AgeWeight> ages;
    for (int age = delta_t / 2; age < max_age_years; age += delta_t) {
        ages.push_back({age, 1.0});
    }
    return ages;
}

SynthFiles generate_dataset(const SynthesisConfig& config) {
    config.validate();
    const int k = config.matrix.size();

    // Largest-remainder apportionment of n_pipes over the age weights.
    double total_weight = 0.0;
    for (const AgeWeight& aw : config.ages) total_weight += aw.weight;
    const std::size_t n_ages = config.ages.size();
    std::vector<long> counts(n_ages, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    long assigned = 0;
    for (std::size_t i = 0; i < n_ages; ++i) {
        const double quota =
            static_cast<double>(config.n_pipes) * config.ages[i].weight / total_weight;
        counts[i] = static_cast<long>(std::floor(quota));
        assigned += counts[i];
        remainders.emplace_back(quota - std::floor(quota), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (long r = config.n_pipes - assigned, i = 0; r > 0; --r, ++i) {
        counts[remainders[static_cast<std::size_t>(i)].second] += 1;
    }

    SynthFiles out;
    csv::append_line(out.pipes_csv,
                     {"pipe_id", "construction_year", "material", "content", "width_mm"});
    csv::append_line(out.inspections_csv,
                     {"inspection_id", "pipe_id", "inspection_date", "damage_code",
                      "damage_class"});
    const std::string width_text = csv::format_double(config.width_mm);

    std::size_t pipe_index = 0;
    for (std::size_t i = 0; i < n_ages; ++i) {
        const int first_age = config.ages[i].age;
        for (long c = 0; c < counts[i]; ++c) {
            pipe_index += 1;
            const std::string pipe_id = format_id("P", pipe_index);
            const int construction_year = config.reference_year - first_age;
            csv::append_line(out.pipes_csv,
                             {pipe_id, std::to_string(construction_year), config.material,
                              config.content, width_text});

            // One trajectory per pipe, observed at each inspection.
            rng::Stream stream(rng::child_seed(config.rng_seed, pipe_index - 1));
            int state = sample_index(config.s0.data(), k, stream);
            int simulated_steps = 0;
            for (int j = 1; j <= config.inspections_per_pipe; ++j) {
                const int age = first_age + (j - 1) * config.delta_t;
                const int target_steps = age / config.delta_t;
                while (simulated_steps < target_steps && state != k - 1) {
                    state = sample_index(config.matrix.row(state), k, stream);
                    simulated_steps += 1;
                }
                const int damage_class = state + 1;
                const int year = config.reference_year + (j - 1) * config.delta_t;
                const std::string inspection_id =
                    format_id("I", pipe_index) + "-" + std::to_string(j);
                const std::string date = Date{year, 6, 15}.iso();
                if (damage_class == 1) {
                    csv::append_line(out.inspections_csv,
                                     {inspection_id, pipe_id, date, "NONE", "1"});
                } else {
                    csv::append_line(out.inspections_csv,
                                     {inspection_id, pipe_id, date, config.damage_code,
                                      std::to_string(damage_class)});
                }
            }
        }
    }
    return out;
}

}
