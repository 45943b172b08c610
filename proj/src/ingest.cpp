#include "dtmc/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "dtmc/csv.hpp"
#include "dtmc/errors.hpp"

namespace dtmc {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_int_strict(const std::string& text, long& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !text.empty();
}

bool parse_double_strict(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !text.empty();
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
    });
}

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2) {
        const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        return leap ? 29 : 28;
    }
    return kDays[static_cast<std::size_t>(month - 1)];
}

int require_column(const csv::Table& table, const std::string& name, const std::string& path) {
    const int idx = table.column(name);
    if (idx < 0) {
        throw IoError(path + ": missing required column '" + name + "'");
    }
    return idx;
}

}  // namespace

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::optional<Date> parse_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const std::string ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
    Date d{std::stoi(ys), std::stoi(ms), std::stoi(ds)};
    if (d.month < 1 || d.month > 12) return std::nullopt;
    if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
    return d;
}

Dataset load_dataset(const std::string& pipes_path, const std::string& inspections_path,
                     int num_states) {
    Dataset out;

    // ---- pipes ----------------------------------------------------------
    {
        const csv::Table table = csv::read_file(pipes_path);
        const int c_id = require_column(table, "pipe_id", pipes_path);
        const int c_year = require_column(table, "construction_year", pipes_path);
        const int c_material = require_column(table, "material", pipes_path);
        const int c_content = require_column(table, "content", pipes_path);
        const int c_width = require_column(table, "width_mm", pipes_path);
        const std::size_t width = table.header.size();

        std::unordered_set<std::string> seen_ids;
        for (const csv::Row& row : table.rows) {
            auto reject = [&](std::string reason) {
                out.rejects.push_back({"pipes", row.line, std::move(reason)});
            };
            if (row.fields.size() == 1 && row.fields[0].empty()) {
                reject("empty row");
                continue;
            }
            if (row.fields.size() != width) {
                reject("wrong number of fields");
                continue;
            }
            PipeRecord rec;
            rec.pipe_id = row.fields[static_cast<std::size_t>(c_id)];
            if (rec.pipe_id.empty()) {
                reject("missing pipe_id");
                continue;
            }
            if (seen_ids.contains(rec.pipe_id)) {
                reject("duplicate pipe_id");
                continue;
            }
            const std::string& year_text = row.fields[static_cast<std::size_t>(c_year)];
            if (year_text.empty()) {
                reject("missing construction year");
                continue;
            }
            long year = 0;
            if (!parse_int_strict(year_text, year)) {
                reject("invalid construction year");
                continue;
            }
            rec.construction_year = static_cast<int>(year);
            rec.material = row.fields[static_cast<std::size_t>(c_material)];
            rec.content = row.fields[static_cast<std::size_t>(c_content)];
            const std::string& width_text = row.fields[static_cast<std::size_t>(c_width)];
            if (!parse_double_strict(width_text, rec.width_mm) || !(rec.width_mm > 0.0)) {
                reject("invalid width");
                continue;
            }
            seen_ids.insert(rec.pipe_id);
            out.pipes.push_back(std::move(rec));
        }
    }

    // ---- inspections ----------------------------------------------------
    {
        const csv::Table table = csv::read_file(inspections_path);
        const int c_id = require_column(table, "inspection_id", inspections_path);
        const int c_pipe = require_column(table, "pipe_id", inspections_path);
        const int c_date = require_column(table, "inspection_date", inspections_path);
        const int c_code = require_column(table, "damage_code", inspections_path);
        const int c_class = require_column(table, "damage_class", inspections_path);
        const std::size_t width = table.header.size();

        // Rows of one inspection must agree on pipe and date; the first
        // well-formed row fixes both.
        std::unordered_map<std::string, std::pair<std::string, Date>> first_seen;
        for (const csv::Row& row : table.rows) {
            auto reject = [&](std::string reason) {
                out.rejects.push_back({"inspections", row.line, std::move(reason)});
            };
            if (row.fields.size() == 1 && row.fields[0].empty()) {
                reject("empty row");
                continue;
            }
            if (row.fields.size() != width) {
                reject("wrong number of fields");
                continue;
            }
            InspectionRecord rec;
            rec.inspection_id = row.fields[static_cast<std::size_t>(c_id)];
            if (rec.inspection_id.empty()) {
                reject("missing inspection_id");
                continue;
            }
            rec.pipe_id = row.fields[static_cast<std::size_t>(c_pipe)];
            if (rec.pipe_id.empty()) {
                reject("missing pipe_id");
                continue;
            }
            const auto date = parse_date(row.fields[static_cast<std::size_t>(c_date)]);
            if (!date) {
                reject("invalid date");
                continue;
            }
            rec.date = *date;
            rec.damage_code = row.fields[static_cast<std::size_t>(c_code)];
            if (rec.damage_code.empty()) {
                reject("missing damage code");
                continue;
            }
            long cls = 0;
            if (!parse_int_strict(row.fields[static_cast<std::size_t>(c_class)], cls)) {
                reject("invalid damage class");
                continue;
            }
            if (cls < 1 || cls > num_states) {
                reject("class out of range");
                continue;
            }
            rec.damage_class = static_cast<int>(cls);
            auto [it, inserted] =
                first_seen.try_emplace(rec.inspection_id, rec.pipe_id, rec.date);
            if (!inserted && (it->second.first != rec.pipe_id || it->second.second != rec.date)) {
                reject("inconsistent inspection metadata");
                continue;
            }
            out.inspections.push_back(std::move(rec));
        }
    }

    return out;
}

std::string rejects_report_csv(const std::vector<Reject>& rejects) {
    std::string out;
    csv::append_line(out, {"file", "line", "reason"});
    for (const Reject& r : rejects) {
        csv::append_line(out, {r.file, std::to_string(r.line), r.reason});
    }
    return out;
}

CleanResult clean(const std::vector<PipeRecord>& pipes,
                  const std::vector<InspectionRecord>& inspections) {
    CleanResult out;

    std::unordered_map<std::string, int> surviving_year;
    std::unordered_set<std::string> removed_ids;
    for (const PipeRecord& pipe : pipes) {
        if (pipe.construction_year < 1800) {
            out.stats.pipes_erroneous_year += 1;
            removed_ids.insert(pipe.pipe_id);
            continue;
        }
        if (pipe.construction_year < 1920) {
            out.stats.pipes_before_1920 += 1;
            removed_ids.insert(pipe.pipe_id);
            continue;
        }
        surviving_year.emplace(pipe.pipe_id, pipe.construction_year);
        out.pipes.push_back(pipe);
    }

    for (const InspectionRecord& insp : inspections) {
        if (removed_ids.contains(insp.pipe_id)) {
            out.stats.inspections_of_removed_pipes += 1;
            continue;
        }
        const auto it = surviving_year.find(insp.pipe_id);
        if (it == surviving_year.end()) {
            out.stats.inspections_orphaned += 1;
            continue;
        }
        if (insp.date.year < it->second) {
            out.stats.inspections_erroneous_date += 1;
            continue;
        }
        out.inspections.push_back(insp);
    }

    return out;
}

const std::vector<CohortDefinition>& default_cohorts() {
    static const std::vector<CohortDefinition> kDefaults = {
        {"CMW", "concrete", {"mixed", "waste"}, std::nullopt, std::nullopt},
        {"CR", "concrete", {"rainwater"}, std::nullopt, std::nullopt},
        {"PMW", "pvc", {"mixed", "waste"}, std::nullopt, std::nullopt},
        {"PR", "pvc", {"rainwater"}, std::nullopt, std::nullopt},
        {"CdL", "concrete", {}, std::nullopt, 500.0},
        {"CdG", "concrete", {}, 500.0, std::nullopt},
    };
    return kDefaults;
}

std::vector<CohortDefinition> parse_cohorts_json(const nlohmann::json& doc) {
    if (!doc.is_array()) {
        throw ConfigError("cohorts config must be a JSON list");
    }
    std::vector<CohortDefinition> out;
    std::unordered_set<std::string> names;
    for (const nlohmann::json& item : doc) {
        if (!item.is_object()) {
            throw ConfigError("cohort definition must be a JSON object");
        }
        CohortDefinition def;
        for (const auto& [key, value] : item.items()) {
            if (key == "name") {
                if (!value.is_string()) throw ConfigError("cohort name must be a string");
                def.name = value.get<std::string>();
            } else if (key == "material") {
                if (!value.is_string()) throw ConfigError("cohort material must be a string");
                def.material = value.get<std::string>();
            } else if (key == "content") {
                if (!value.is_array()) throw ConfigError("cohort content must be a list");
                for (const nlohmann::json& entry : value) {
                    if (!entry.is_string()) throw ConfigError("cohort content must be strings");
                    def.content.push_back(entry.get<std::string>());
                }
            } else if (key == "width_min_mm") {
                if (!value.is_number()) throw ConfigError("width_min_mm must be a number");
                def.width_min_mm = value.get<double>();
            } else if (key == "width_max_mm") {
                if (!value.is_number()) throw ConfigError("width_max_mm must be a number");
                def.width_max_mm = value.get<double>();
            } else {
                throw ConfigError("unknown cohort attribute '" + key + "'");
            }
        }
        if (def.name.empty()) {
            throw ConfigError("cohort definition requires a non-empty name");
        }
        if (!names.insert(def.name).second) {
            throw ConfigError("duplicate cohort name '" + def.name + "'");
        }
        out.push_back(std::move(def));
    }
    return out;
}

std::vector<CohortDefinition> load_cohorts_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read cohorts config: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return parse_cohorts_json(doc);
}

std::vector<PipeRecord> assign_cohort(const std::vector<PipeRecord>& pipes,
                                      const CohortDefinition& definition) {
    std::vector<std::string> wanted_content;
    wanted_content.reserve(definition.content.size());
    for (const std::string& c : definition.content) wanted_content.push_back(lower(c));

    std::vector<PipeRecord> out;
    for (const PipeRecord& pipe : pipes) {
        if (definition.material && lower(pipe.material) != lower(*definition.material)) continue;
        if (!wanted_content.empty() &&
            std::find(wanted_content.begin(), wanted_content.end(), lower(pipe.content)) ==
                wanted_content.end()) {
            continue;
        }
        if (definition.width_min_mm && !(pipe.width_mm >= *definition.width_min_mm)) continue;
        if (definition.width_max_mm && !(pipe.width_mm < *definition.width_max_mm)) continue;
        out.push_back(pipe);
    }
    return out;
}

}
