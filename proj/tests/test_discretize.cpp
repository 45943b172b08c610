#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtmc/discretize.hpp"
#include "dtmc/errors.hpp"
#include "dtmc/rng.hpp"
#include "support.hpp"

using namespace dtmc;

namespace {

PipeRecord pipe(std::string id, int year) {
    return PipeRecord{std::move(id), year, "concrete", "mixed", 300.0};
}

InspectionRecord inspection(std::string id, std::string pipe_id, int year, std::string code,
                            int cls) {
    return InspectionRecord{std::move(id), std::move(pipe_id), Date{year, 6, 15},
                            std::move(code), cls};
}

DiscretizationConfig config_baf() {
    DiscretizationConfig config;
    config.damage_code = "BAF";
    return config;
}

}  // namespace

TEST_CASE("inspection severity is the worst matching row, pristine when absent") {
    const InspectionRecord a = inspection("I1", "P", 2000, "BAF", 2);
    const InspectionRecord b = inspection("I1", "P", 2000, "BAF", 4);
    const InspectionRecord c = inspection("I1", "P", 2000, "BBC", 5);
    const InspectionRecord d = inspection("I1", "P", 2000, "BAF", 1);

    CHECK(pipe_state_at_inspection({&a, &b, &d}, "BAF") == 4);
    CHECK(pipe_state_at_inspection({&a, &b, &c}, "BAF") == 4);
    CHECK(pipe_state_at_inspection({&c}, "BAF") == 1);
    CHECK(pipe_state_at_inspection({}, "BAF") == 1);
    CHECK(pipe_state_at_inspection({&c}, "BBC") == 5);
}

TEST_CASE("a single pristine inspection lands in the first bin") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 2000, "NONE", 1)};

    const DiscretizedTable table = build_table(pipes, inspections, config_baf());
    CHECK(table.observations == 1);
    CHECK(table.dropped_over_horizon == 0);
    REQUIRE(table.rows.size() == 1);
    const TableRow& row = table.rows[0];
    CHECK(row.count == 1);
    CHECK(row.age_lo == 0);
    CHECK(row.age_hi == 3);
    CHECK(row.t == 1.5);
    CHECK(row.step == 0);
    CHECK(row.freqs == std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("ages map to bins by integer division") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 2002, "BAF", 2),  // age 2 -> bin [0,3)
        inspection("I2", "P1", 2003, "BAF", 2),  // age 3 -> bin [3,6)
        inspection("I3", "P1", 2004, "BAF", 3),  // age 4 -> bin [3,6)
    };

    const DiscretizedTable table = build_table(pipes, inspections, config_baf());
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].step == 0);
    CHECK(table.rows[0].count == 1);
    CHECK(table.rows[0].freqs[1] == 1.0);
    CHECK(table.rows[1].step == 1);
    CHECK(table.rows[1].age_lo == 3);
    CHECK(table.rows[1].age_hi == 6);
    CHECK(table.rows[1].t == 4.5);
    CHECK(table.rows[1].count == 2);
    CHECK(table.rows[1].freqs == std::vector<double>{0.0, 0.5, 0.5, 0.0, 0.0});
}

TEST_CASE("a populated age bin reproduces its tally frequencies exactly") {
    // 2339 inspections at ages 48..50 with class tallies 819/1169/281/47/23.
    const std::vector<long> tallies = {819, 1169, 281, 47, 23};
    std::vector<PipeRecord> pipes;
    std::vector<InspectionRecord> inspections;
    long serial = 0;
    for (int cls = 1; cls <= 5; ++cls) {
        for (long i = 0; i < tallies[static_cast<std::size_t>(cls - 1)]; ++i) {
            const std::string id = "P" + std::to_string(serial);
            pipes.push_back(pipe(id, 1950));
            const int inspection_year = 1998 + static_cast<int>(serial % 3);  // ages 48..50
            inspections.push_back(inspection("I" + std::to_string(serial), id, inspection_year,
                                             cls == 1 ? "NONE" : "BAF", cls == 1 ? 1 : cls));
            ++serial;
        }
    }

    const DiscretizedTable table = build_table(pipes, inspections, config_baf());
    CHECK(table.observations == 2339);
    REQUIRE(table.rows.size() == 1);
    const TableRow& row = table.rows[0];
    CHECK(row.count == 2339);
    CHECK(row.age_lo == 48);
    CHECK(row.age_hi == 51);
    CHECK(row.t == 49.5);
    CHECK(row.step == 16);
    for (int k = 0; k < 5; ++k) {
        const double expected =
            static_cast<double>(tallies[static_cast<std::size_t>(k)]) / 2339.0;
        CHECK(row.freqs[static_cast<std::size_t>(k)] ==
              doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(row.freqs[0] == doctest::Approx(0.35).epsilon(0.005));
    CHECK(row.freqs[1] == doctest::Approx(0.50).epsilon(0.005));
}

TEST_CASE("row frequencies conserve mass and counts conserve observations") {
    rng::Stream stream(2024);
    for (int round = 0; round < 30; ++round) {
        std::vector<PipeRecord> pipes;
        std::vector<InspectionRecord> inspections;
        const long n = 20 + static_cast<long>(stream.next_below(80));
        for (long i = 0; i < n; ++i) {
            const std::string id = "P" + std::to_string(i);
            const int year = 1950 + static_cast<int>(stream.next_below(50));
            pipes.push_back(pipe(id, year));
            const int age = static_cast<int>(stream.next_below(60));
            const int cls = 1 + static_cast<int>(stream.next_below(5));
            inspections.push_back(inspection("I" + std::to_string(i), id, year + age,
                                             cls == 1 ? "NONE" : "BAF", cls));
        }

        const DiscretizedTable table = build_table(pipes, inspections, config_baf());
        long total = 0;
        int prev_step = -1;
        for (const TableRow& row : table.rows) {
            CHECK(row.step > prev_step);
            prev_step = row.step;
            CHECK(row.count > 0);
            total += row.count;
            double sum = 0.0;
            for (const double f : row.freqs) {
                CHECK(f >= 0.0);
                sum += f;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(total == table.observations);
        CHECK(table.observations + table.dropped_over_horizon == n);

        // Input order must not matter.
        std::vector<PipeRecord> shuffled_pipes = pipes;
        std::vector<InspectionRecord> shuffled_inspections = inspections;
        for (std::size_t i = shuffled_pipes.size(); i > 1; --i)
            std::swap(shuffled_pipes[i - 1], shuffled_pipes[stream.next_below(i)]);
        for (std::size_t i = shuffled_inspections.size(); i > 1; --i)
            std::swap(shuffled_inspections[i - 1], shuffled_inspections[stream.next_below(i)]);
        CHECK(build_table(shuffled_pipes, shuffled_inspections, config_baf()) == table);
    }
}

TEST_CASE("observations at or past the horizon are dropped and counted") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 1900)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 2025, "BAF", 2),  // age 125, kept (last bin)
        inspection("I2", "P1", 2026, "BAF", 2),  // age 126, dropped
        inspection("I3", "P1", 2050, "BAF", 2),  // age 150, dropped
    };

    const DiscretizedTable table = build_table(pipes, inspections, config_baf());
    CHECK(table.observations == 1);
    CHECK(table.dropped_over_horizon == 2);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].step == 41);
    CHECK(table.rows[0].age_hi == 126);
}

TEST_CASE("an inspection predating construction is a contract violation") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 1995, "BAF", 2)};
    CHECK_THROWS_AS(build_table(pipes, inspections, config_baf()), std::invalid_argument);
}

TEST_CASE("no contributing observation is an empty-data error") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000)};
    CHECK_THROWS_AS(build_table(pipes, {}, config_baf()), EmptyDataError);

    const std::vector<InspectionRecord> orphan = {inspection("I1", "P2", 2005, "BAF", 2)};
    CHECK_THROWS_AS(build_table(pipes, orphan, config_baf()), EmptyDataError);
}

TEST_CASE("observation collection keeps uninspected pipes with empty lists") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000), pipe("P2", 2000)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 2004, "BAF", 3)};

    const std::vector<PipeObservations> obs =
        collect_observations(pipes, inspections, config_baf());
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].pipe_id == "P1");
    CHECK(obs[0].obs == std::vector<std::pair<int, int>>{{1, 3}});
    CHECK(obs[1].pipe_id == "P2");
    CHECK(obs[1].obs.empty());

    std::vector<const PipeObservations*> frame = {&obs[0], &obs[1]};
    const DiscretizedTable from_obs = table_from_observations(frame, config_baf(), 5);
    CHECK(from_obs == build_table(pipes, inspections, config_baf()));
}

TEST_CASE("row weights scale counts so the largest is exactly one") {
    DiscretizedTable table;
    table.rows = {support::table_row(832, 0, 3, {832, 0, 0, 0, 0}),
                  support::table_row(2339, 3, 3, {2339, 0, 0, 0, 0}),
                  support::table_row(64, 6, 3, {64, 0, 0, 0, 0})};
    const std::vector<double> w = weights(table);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == doctest::Approx(832.0 / 2339.0).epsilon(1e-15));
    CHECK(w[1] == 1.0);
    CHECK(w[2] == doctest::Approx(64.0 / 2339.0).epsilon(1e-15));

    table.rows = {support::table_row(10, 0, 3, {10, 0, 0, 0, 0})};
    CHECK(weights(table) == std::vector<double>{1.0});

    table.rows = {support::table_row(5, 0, 3, {5, 0, 0, 0, 0}),
                  support::table_row(5, 3, 3, {5, 0, 0, 0, 0}),
                  support::table_row(5, 6, 3, {5, 0, 0, 0, 0})};
    CHECK(weights(table) == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("table CSV round-trips to an equal table") {
    const std::vector<PipeRecord> pipes = {pipe("P1", 2000), pipe("P2", 1980)};
    const std::vector<InspectionRecord> inspections = {
        inspection("I1", "P1", 2002, "BAF", 2),
        inspection("I2", "P1", 2010, "BAF", 3),
        inspection("I3", "P2", 2010, "BAF", 4),
        inspection("I4", "P2", 1981, "NONE", 1),
    };
    const DiscretizedTable table = build_table(pipes, inspections, config_baf());

    const std::string text = table_to_csv(table);
    DiscretizedTable parsed = table_from_csv(text, "test.csv");
    parsed.damage_code = table.damage_code;  // not carried by the CSV
    CHECK(parsed == table);
    CHECK(table_to_csv(parsed) == text);
}

TEST_CASE("table CSV rejects structural inconsistencies") {
    auto parse = [](const std::string& body) {
        return table_from_csv("count,age_lo,age_hi,t,step,s1,s2\n" + body, "bad.csv");
    };

    CHECK(parse("10,0,3,1.5,0,0.4,0.6\n").rows.size() == 1);
    // Frequencies off unit mass.
    CHECK_THROWS_AS(parse("10,0,3,1.5,0,0.4,0.7\n"), IoError);
    // Midpoint inconsistent with the interval.
    CHECK_THROWS_AS(parse("10,0,3,2.0,0,0.4,0.6\n"), IoError);
    // Step inconsistent with age_lo / delta_t.
    CHECK_THROWS_AS(parse("10,0,3,1.5,1,0.4,0.6\n"), IoError);
    // Mixed bin widths.
    CHECK_THROWS_AS(parse("10,0,3,1.5,0,0.4,0.6\n5,3,8,5.5,1,1,0\n"), IoError);
    // Steps not strictly increasing.
    CHECK_THROWS_AS(parse("10,3,6,4.5,1,0.4,0.6\n5,0,3,1.5,0,1,0\n"), IoError);
    // Negative frequency.
    CHECK_THROWS_AS(parse("10,0,3,1.5,0,-0.1,1.1\n"), IoError);
    // Nonpositive count.
    CHECK_THROWS_AS(parse("0,0,3,1.5,0,0.4,0.6\n"), IoError);
    // Missing column.
    CHECK_THROWS_AS(table_from_csv("count,age_lo,age_hi,t,s1,s2\n10,0,3,1.5,0.4,0.6\n", "b"),
                    IoError);
    // Fewer than two state columns.
    CHECK_THROWS_AS(table_from_csv("count,age_lo,age_hi,t,step,s1\n10,0,3,1.5,0,1\n", "b"),
                    IoError);
    // No data rows.
    CHECK_THROWS_AS(table_from_csv("count,age_lo,age_hi,t,step,s1,s2\n", "b"), EmptyDataError);
}

TEST_CASE("discretization config validation") {
    DiscretizationConfig config = config_baf();
    CHECK_NOTHROW(config.validate());
    config.delta_t = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.delta_t = 4;
    config.max_age = 126;  // not a multiple of 4
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.max_age = 128;
    CHECK_NOTHROW(config.validate());
}
