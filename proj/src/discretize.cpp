#include "dtmc/discretize.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <unordered_map>

#include "dtmc/csv.hpp"
#include "dtmc/errors.hpp"

namespace dtmc {

namespace {

long parse_long_field(const std::string& text, const std::string& origin, std::size_t line) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw IoError(origin + ":" + std::to_string(line) + ": expected integer, got '" + text +
                      "'");
    }
    return value;
}

double parse_double_field(const std::string& text, const std::string& origin, std::size_t line) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw IoError(origin + ":" + std::to_string(line) + ": expected number, got '" + text +
                      "'");
    }
    return value;
}

}  // namespace

void DiscretizationConfig::validate() const {
    if (delta_t < 1) {
        throw ConfigError("delta_t must be a positive integer (got " + std::to_string(delta_t) +
                          ")");
    }
    if (max_age < delta_t || max_age % delta_t != 0) {
        throw ConfigError("max_age must be a positive multiple of delta_t (got " +
                          std::to_string(max_age) + " with delta_t " + std::to_string(delta_t) +
                          ")");
    }
}

int pipe_state_at_inspection(const std::vector<const InspectionRecord*>& inspection_rows,
                             const std::string& damage_code) {
    int state = 1;
    for (const InspectionRecord* row : inspection_rows) {
        if (row->damage_code == damage_code) {
            state = std::max(state, row->damage_class);
        }
    }
    return state;
}

std::vector<PipeObservations> collect_observations(const std::vector<PipeRecord>& pipes,
                                                   const std::vector<InspectionRecord>& inspections,
                                                   const DiscretizationConfig& config,
                                                   long* dropped) {
    config.validate();

    std::vector<PipeObservations> out;
    out.reserve(pipes.size());
    std::unordered_map<std::string, std::size_t> pipe_index;
    std::unordered_map<std::string, int> pipe_year;
    for (const PipeRecord& pipe : pipes) {
        pipe_index.emplace(pipe.pipe_id, out.size());
        pipe_year.emplace(pipe.pipe_id, pipe.construction_year);
        out.push_back({pipe.pipe_id, {}});
    }

    // One group per inspection_id; metadata agreement across its rows is
    // guaranteed by load_dataset.
    struct Group {
        std::string pipe_id;
        int year = 0;
        int max_class = 0;  // 0 until a row carries the configured code
    };
    std::vector<Group> groups;
    std::unordered_map<std::string, std::size_t> group_index;
    for (const InspectionRecord& insp : inspections) {
        auto [it, inserted] = group_index.try_emplace(insp.inspection_id, groups.size());
        if (inserted) {
            groups.push_back({insp.pipe_id, insp.date.year, 0});
        }
        if (insp.damage_code == config.damage_code) {
            Group& g = groups[it->second];
            g.max_class = std::max(g.max_class, insp.damage_class);
        }
    }

    long over_horizon = 0;
    for (const Group& g : groups) {
        const auto pit = pipe_index.find(g.pipe_id);
        if (pit == pipe_index.end()) continue;  // outside the cohort
        const int age = g.year - pipe_year.at(g.pipe_id);
        if (age < 0) {
            throw std::invalid_argument("inspection predates construction; run clean() first");
        }
        if (age >= config.max_age) {
            over_horizon += 1;
            continue;
        }
        const int state = g.max_class == 0 ? 1 : g.max_class;
        out[pit->second].obs.emplace_back(age / config.delta_t, state);
    }
    if (dropped != nullptr) *dropped = over_horizon;
    return out;
}

DiscretizedTable table_from_observations(const std::vector<const PipeObservations*>& observations,
                                         const DiscretizationConfig& config, int num_states) {
    config.validate();
    const int num_steps = config.max_age / config.delta_t;
    const auto k = static_cast<std::size_t>(num_states);
    std::vector<long> tally(static_cast<std::size_t>(num_steps) * k, 0);

    long total = 0;
    for (const PipeObservations* pipe : observations) {
        for (const auto& [step, state] : pipe->obs) {
            tally[static_cast<std::size_t>(step) * k + static_cast<std::size_t>(state - 1)] += 1;
            total += 1;
        }
    }
    if (total == 0) {
        throw EmptyDataError("no inspections contribute to the table");
    }

    DiscretizedTable table;
    table.num_states = num_states;
    table.delta_t = config.delta_t;
    table.damage_code = config.damage_code;
    table.observations = total;
    for (int step = 0; step < num_steps; ++step) {
        const long* counts = tally.data() + static_cast<std::size_t>(step) * k;
        long row_count = 0;
        for (std::size_t i = 0; i < k; ++i) row_count += counts[i];
        if (row_count == 0) continue;
        TableRow row;
        row.count = row_count;
        row.age_lo = step * config.delta_t;
        row.age_hi = row.age_lo + config.delta_t;
        row.t = row.age_lo + config.delta_t / 2.0;
        row.step = step;
        row.freqs.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            row.freqs[i] = static_cast<double>(counts[i]) / static_cast<double>(row_count);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

DiscretizedTable build_table(const std::vector<PipeRecord>& pipes,
                             const std::vector<InspectionRecord>& inspections,
                             const DiscretizationConfig& config, int num_states) {
    long dropped = 0;
    const std::vector<PipeObservations> per_pipe =
        collect_observations(pipes, inspections, config, &dropped);
    std::vector<const PipeObservations*> all;
    all.reserve(per_pipe.size());
    for (const PipeObservations& p : per_pipe) all.push_back(&p);
    DiscretizedTable table = table_from_observations(all, config, num_states);
    table.dropped_over_horizon = dropped;
    return table;
}

std::vector<double> weights(const DiscretizedTable& table) {
    if (table.rows.empty()) {
        throw EmptyDataError("weights of an empty table");
    }
    long max_count = 0;
    for (const TableRow& row : table.rows) max_count = std::max(max_count, row.count);
    std::vector<double> w;
    w.reserve(table.rows.size());
    for (const TableRow& row : table.rows) {
        w.push_back(static_cast<double>(row.count) / static_cast<double>(max_count));
    }
    return w;
}

std::string table_to_csv(const DiscretizedTable& table) {
    std::string out;
    std::vector<std::string> header = {"count", "age_lo", "age_hi", "t", "step"};
    for (int i = 1; i <= table.num_states; ++i) header.push_back("s" + std::to_string(i));
    csv::append_line(out, header);
    for (const TableRow& row : table.rows) {
        std::vector<std::string> fields = {std::to_string(row.count), std::to_string(row.age_lo),
                                           std::to_string(row.age_hi), csv::format_double(row.t),
                                           std::to_string(row.step)};
        for (const double f : row.freqs) fields.push_back(csv::format_double(f));
        csv::append_line(out, fields);
    }
    return out;
}

DiscretizedTable table_from_csv(const std::string& text, const std::string& origin) {
    const csv::Table raw = csv::parse(text);
    const int c_count = raw.column("count");
    const int c_lo = raw.column("age_lo");
    const int c_hi = raw.column("age_hi");
    const int c_t = raw.column("t");
    const int c_step = raw.column("step");
    if (c_count < 0 || c_lo < 0 || c_hi < 0 || c_t < 0 || c_step < 0) {
        throw IoError(origin + ": not a discretized table (missing header columns)");
    }
    std::vector<int> c_freq;
    while (true) {
        const int idx = raw.column("s" + std::to_string(c_freq.size() + 1));
        if (idx < 0) break;
        c_freq.push_back(idx);
    }
    if (c_freq.size() < 2) {
        throw IoError(origin + ": table needs at least columns s1 and s2");
    }

    DiscretizedTable table;
    table.num_states = static_cast<int>(c_freq.size());
    int delta_t = 0;
    int prev_step = -1;
    for (const csv::Row& row : raw.rows) {
        if (row.fields.size() != raw.header.size()) {
            throw IoError(origin + ":" + std::to_string(row.line) + ": wrong number of fields");
        }
        auto field = [&](int col) -> const std::string& {
            return row.fields[static_cast<std::size_t>(col)];
        };
        TableRow r;
        r.count = parse_long_field(field(c_count), origin, row.line);
        r.age_lo = static_cast<int>(parse_long_field(field(c_lo), origin, row.line));
        r.age_hi = static_cast<int>(parse_long_field(field(c_hi), origin, row.line));
        r.t = parse_double_field(field(c_t), origin, row.line);
        r.step = static_cast<int>(parse_long_field(field(c_step), origin, row.line));
        if (r.count <= 0 || r.age_hi <= r.age_lo || r.age_lo < 0) {
            throw IoError(origin + ":" + std::to_string(row.line) + ": invalid table row");
        }
        if (delta_t == 0) {
            delta_t = r.age_hi - r.age_lo;
        } else if (r.age_hi - r.age_lo != delta_t) {
            throw IoError(origin + ":" + std::to_string(row.line) + ": inconsistent bin width");
        }
        if (r.age_lo % delta_t != 0 || r.step != r.age_lo / delta_t) {
            throw IoError(origin + ":" + std::to_string(row.line) +
                          ": step does not match age interval");
        }
        if (r.t != r.age_lo + delta_t / 2.0) {
            throw IoError(origin + ":" + std::to_string(row.line) +
                          ": t is not the interval midpoint");
        }
        if (r.step <= prev_step) {
            throw IoError(origin + ":" + std::to_string(row.line) +
                          ": steps must be strictly increasing");
        }
        prev_step = r.step;
        double sum = 0.0;
        for (const int col : c_freq) {
            const double f = parse_double_field(field(col), origin, row.line);
            if (f < 0.0 || f > 1.0) {
                throw IoError(origin + ":" + std::to_string(row.line) +
                              ": frequency outside [0,1]");
            }
            r.freqs.push_back(f);
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw IoError(origin + ":" + std::to_string(row.line) +
                          ": frequencies do not sum to 1");
        }
        table.observations += r.count;
        table.rows.push_back(std::move(r));
    }
    if (table.rows.empty()) {
        throw EmptyDataError(origin + ": table has no rows");
    }
    table.delta_t = delta_t;
    return table;
}

}
