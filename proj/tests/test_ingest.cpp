#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "dtmc/errors.hpp"
#include "dtmc/ingest.hpp"
#include "support.hpp"

using namespace dtmc;

namespace {

const char* kPipesHeader = "pipe_id,construction_year,material,content,width_mm\n";
const char* kInspectionsHeader = "inspection_id,pipe_id,inspection_date,damage_code,damage_class\n";

PipeRecord make_pipe(std::string id, int year, std::string material, std::string content,
                     double width) {
    return PipeRecord{std::move(id), year, std::move(material), std::move(content), width};
}

InspectionRecord make_inspection(std::string id, std::string pipe, Date date, std::string code,
                                 int cls) {
    return InspectionRecord{std::move(id), std::move(pipe), date, std::move(code), cls};
}

}  // namespace

TEST_CASE("date parsing enforces the calendar") {
    CHECK(parse_date("2001-05-17") == Date{2001, 5, 17});
    CHECK(parse_date("2000-02-29") == Date{2000, 2, 29});
    CHECK(parse_date("2400-02-29") == Date{2400, 2, 29});
    CHECK_FALSE(parse_date("1900-02-29").has_value());
    CHECK_FALSE(parse_date("2020-02-30").has_value());
    CHECK_FALSE(parse_date("2001-04-31").has_value());
    CHECK_FALSE(parse_date("2001-13-01").has_value());
    CHECK_FALSE(parse_date("2001-00-10").has_value());
    CHECK_FALSE(parse_date("2001-5-17").has_value());
    CHECK_FALSE(parse_date("2001/05/17").has_value());
    CHECK_FALSE(parse_date("20010517").has_value());
    CHECK_FALSE(parse_date("").has_value());
    CHECK(Date{2001, 5, 17}.iso() == "2001-05-17");
}

TEST_CASE("well-formed files load without rejects") {
    support::TempDir dir;
    support::write_file(dir.file("pipes.csv"),
                        std::string(kPipesHeader) +
                            "P1,1960,concrete,mixed,300\n"
                            "P2,1995,PVC,rainwater,160\n"
                            "P3,2004,Concrete,Waste,501.5\n");
    support::write_file(dir.file("inspections.csv"),
                        std::string(kInspectionsHeader) +
                            "I1,P1,2001-05-17,BAF,2\n"
                            "I1,P1,2001-05-17,BBC,4\n"
                            "I2,P2,2010-11-02,NONE,1\n");

    const Dataset data = load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv"));
    CHECK(data.rejects.empty());
    REQUIRE(data.pipes.size() == 3);
    CHECK(data.pipes[0] == make_pipe("P1", 1960, "concrete", "mixed", 300.0));
    CHECK(data.pipes[1] == make_pipe("P2", 1995, "PVC", "rainwater", 160.0));
    CHECK(data.pipes[2] == make_pipe("P3", 2004, "Concrete", "Waste", 501.5));
    REQUIRE(data.inspections.size() == 3);
    CHECK(data.inspections[0] == make_inspection("I1", "P1", {2001, 5, 17}, "BAF", 2));
    CHECK(data.inspections[1] == make_inspection("I1", "P1", {2001, 5, 17}, "BBC", 4));
    CHECK(data.inspections[2] == make_inspection("I2", "P2", {2010, 11, 2}, "NONE", 1));
}

TEST_CASE("malformed pipe rows are rejected with line and reason") {
    support::TempDir dir;
    support::write_file(dir.file("pipes.csv"),
                        std::string(kPipesHeader) +
                            "P1,1960,concrete,mixed,300\n"
                            "\n"
                            "P2,1960,concrete,mixed\n"
                            ",1960,concrete,mixed,300\n"
                            "P1,1970,pvc,waste,160\n"
                            "P3,,concrete,mixed,300\n"
                            "P4,abc,concrete,mixed,300\n"
                            "P5,1980,concrete,mixed,wide\n"
                            "P6,1985,concrete,mixed,0\n"
                            "P7,1990,concrete,mixed,150\n");
    support::write_file(dir.file("inspections.csv"), kInspectionsHeader);

    const Dataset data = load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv"));
    REQUIRE(data.pipes.size() == 2);
    CHECK(data.pipes[0].pipe_id == "P1");
    CHECK(data.pipes[1].pipe_id == "P7");

    const std::vector<Reject> expected = {
        {"pipes", 3, "empty row"},
        {"pipes", 4, "wrong number of fields"},
        {"pipes", 5, "missing pipe_id"},
        {"pipes", 6, "duplicate pipe_id"},
        {"pipes", 7, "missing construction year"},
        {"pipes", 8, "invalid construction year"},
        {"pipes", 9, "invalid width"},
        {"pipes", 10, "invalid width"},
    };
    CHECK(data.rejects == expected);
}

TEST_CASE("malformed inspection rows are rejected with line and reason") {
    support::TempDir dir;
    support::write_file(dir.file("pipes.csv"),
                        std::string(kPipesHeader) + "P1,1960,concrete,mixed,300\n");
    support::write_file(dir.file("inspections.csv"),
                        std::string(kInspectionsHeader) +
                            "I1,P1,2001-05-17,BAF,2\n"
                            ",P1,2001-05-17,BAF,2\n"
                            "I2,,2001-05-17,BAF,2\n"
                            "I3,P1,2020-02-30,BAF,2\n"
                            "I4,P1,1900-02-29,BAF,2\n"
                            "I5,P1,2000-02-29,BAF,2\n"
                            "I6,P1,2001-05-17,,2\n"
                            "I7,P1,2001-05-17,BAF,two\n"
                            "I8,P1,2001-05-17,BAF,0\n"
                            "I9,P1,2001-05-17,BAF,9\n"
                            "I1,P2,2001-05-17,BBC,3\n"
                            "I1,P1,2002-01-01,BBC,3\n"
                            "I1,P1,2001-05-17,BBC,3\n");

    const Dataset data = load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv"));
    REQUIRE(data.inspections.size() == 3);
    CHECK(data.inspections[0].inspection_id == "I1");
    CHECK(data.inspections[1].inspection_id == "I5");
    CHECK(data.inspections[2].damage_code == "BBC");

    const std::vector<Reject> expected = {
        {"inspections", 3, "missing inspection_id"},
        {"inspections", 4, "missing pipe_id"},
        {"inspections", 5, "invalid date"},
        {"inspections", 6, "invalid date"},
        {"inspections", 8, "missing damage code"},
        {"inspections", 9, "invalid damage class"},
        {"inspections", 10, "class out of range"},
        {"inspections", 11, "class out of range"},
        {"inspections", 12, "inconsistent inspection metadata"},
        {"inspections", 13, "inconsistent inspection metadata"},
    };
    CHECK(data.rejects == expected);
}

TEST_CASE("damage classes above a widened state count are accepted") {
    support::TempDir dir;
    support::write_file(dir.file("pipes.csv"),
                        std::string(kPipesHeader) + "P1,1960,concrete,mixed,300\n");
    support::write_file(dir.file("inspections.csv"),
                        std::string(kInspectionsHeader) + "I1,P1,2001-05-17,BAF,7\n");

    CHECK(load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv"), 5).rejects.size() == 1);
    const Dataset widened = load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv"), 8);
    CHECK(widened.rejects.empty());
    CHECK(widened.inspections.at(0).damage_class == 7);
}

TEST_CASE("a missing required column aborts the load") {
    support::TempDir dir;
    support::write_file(dir.file("pipes.csv"),
                        "pipe_id,material,content,width_mm\nP1,concrete,mixed,300\n");
    support::write_file(dir.file("inspections.csv"), kInspectionsHeader);
    CHECK_THROWS_AS(load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv")), IoError);

    support::write_file(dir.file("pipes.csv"),
                        std::string(kPipesHeader) + "P1,1960,concrete,mixed,300\n");
    support::write_file(dir.file("inspections.csv"),
                        "inspection_id,pipe_id,date,damage_code,damage_class\n");
    CHECK_THROWS_AS(load_dataset(dir.file("pipes.csv"), dir.file("inspections.csv")), IoError);

    CHECK_THROWS_AS(load_dataset(dir.file("absent.csv"), dir.file("inspections.csv")), IoError);
}

TEST_CASE("cleaning removes old pipes and impossible inspections") {
    const std::vector<PipeRecord> pipes = {
        make_pipe("A", 1750, "concrete", "mixed", 300),
        make_pipe("B", 1919, "concrete", "mixed", 300),
        make_pipe("C", 1920, "concrete", "mixed", 300),
        make_pipe("D", 1960, "pvc", "rainwater", 160),
    };
    const std::vector<InspectionRecord> inspections = {
        make_inspection("i1", "A", {1990, 1, 1}, "BAF", 2),
        make_inspection("i2", "B", {1990, 1, 1}, "BAF", 2),
        make_inspection("i3", "X", {1990, 1, 1}, "BAF", 2),
        make_inspection("i4", "C", {1910, 1, 1}, "BAF", 2),
        make_inspection("i5", "C", {1920, 1, 1}, "NONE", 1),
        make_inspection("i6", "D", {1959, 12, 31}, "BAF", 3),
        make_inspection("i7", "D", {2000, 6, 15}, "BAF", 3),
    };

    const CleanResult result = clean(pipes, inspections);
    CHECK(result.stats.pipes_erroneous_year == 1);
    CHECK(result.stats.pipes_before_1920 == 1);
    CHECK(result.stats.inspections_of_removed_pipes == 2);
    CHECK(result.stats.inspections_orphaned == 1);
    CHECK(result.stats.inspections_erroneous_date == 2);
    CHECK(result.stats.pipes_removed() == 2);
    CHECK(result.stats.inspections_removed() == 5);

    REQUIRE(result.pipes.size() == 2);
    CHECK(result.pipes[0].pipe_id == "C");
    CHECK(result.pipes[1].pipe_id == "D");
    REQUIRE(result.inspections.size() == 2);
    CHECK(result.inspections[0].inspection_id == "i5");
    CHECK(result.inspections[1].inspection_id == "i7");

    const CleanResult again = clean(result.pipes, result.inspections);
    CHECK(again.stats.pipes_removed() == 0);
    CHECK(again.stats.inspections_removed() == 0);
    CHECK(again.pipes == result.pipes);
    CHECK(again.inspections == result.inspections);
}

TEST_CASE("default cohorts partition by material, content and width") {
    const std::vector<PipeRecord> pipes = {
        make_pipe("c-mixed", 1960, "concrete", "mixed", 300),
        make_pipe("c-waste", 1960, "Concrete", "WASTE", 499),
        make_pipe("c-rain", 1960, "concrete", "rainwater", 500),
        make_pipe("p-mixed", 1960, "pvc", "mixed", 160),
        make_pipe("p-rain", 1960, "PVC", "Rainwater", 160),
    };
    auto ids = [](const std::vector<PipeRecord>& v) {
        std::vector<std::string> out;
        for (const PipeRecord& p : v) out.push_back(p.pipe_id);
        return out;
    };
    auto find = [](const std::string& name) -> const CohortDefinition& {
        for (const CohortDefinition& def : default_cohorts())
            if (def.name == name) return def;
        throw std::logic_error("unknown cohort " + name);
    };

    CHECK(ids(assign_cohort(pipes, find("CMW"))) ==
          std::vector<std::string>{"c-mixed", "c-waste"});
    CHECK(ids(assign_cohort(pipes, find("CR"))) == std::vector<std::string>{"c-rain"});
    CHECK(ids(assign_cohort(pipes, find("PMW"))) == std::vector<std::string>{"p-mixed"});
    CHECK(ids(assign_cohort(pipes, find("PR"))) == std::vector<std::string>{"p-rain"});
    CHECK(ids(assign_cohort(pipes, find("CdL"))) ==
          std::vector<std::string>{"c-mixed", "c-waste"});
    CHECK(ids(assign_cohort(pipes, find("CdG"))) == std::vector<std::string>{"c-rain"});

    const std::vector<PipeRecord> cmw = assign_cohort(pipes, find("CMW"));
    CHECK(assign_cohort(cmw, find("CMW")) == cmw);
}

TEST_CASE("cohort configs parse and reject unknown attributes") {
    const nlohmann::json doc = nlohmann::json::parse(R"([
        {"name": "narrow", "material": "concrete", "width_max_mm": 250},
        {"name": "wet", "content": ["mixed", "waste"], "width_min_mm": 100}
    ])");
    const std::vector<CohortDefinition> defs = parse_cohorts_json(doc);
    REQUIRE(defs.size() == 2);
    CHECK(defs[0].name == "narrow");
    CHECK(defs[0].material == "concrete");
    CHECK(defs[0].width_max_mm == 250.0);
    CHECK_FALSE(defs[0].width_min_mm.has_value());
    CHECK(defs[1].content == std::vector<std::string>{"mixed", "waste"});
    CHECK(defs[1].width_min_mm == 100.0);

    CHECK_THROWS_AS(parse_cohorts_json(nlohmann::json::parse(
                        R"([{"name": "x", "colour": "red"}])")),
                    ConfigError);
    CHECK_THROWS_AS(parse_cohorts_json(nlohmann::json::parse(
                        R"([{"name": "x"}, {"name": "x"}])")),
                    ConfigError);
    CHECK_THROWS_AS(parse_cohorts_json(nlohmann::json::parse(R"([{"material": "pvc"}])")),
                    ConfigError);
    CHECK_THROWS_AS(parse_cohorts_json(nlohmann::json::parse(R"({"name": "x"})")), ConfigError);
}

TEST_CASE("cohort config files: unreadable or malformed input is an IO error") {
    support::TempDir dir;
    CHECK_THROWS_AS(load_cohorts_file(dir.file("absent.json")), IoError);
    support::write_file(dir.file("broken.json"), "[{\"name\": ");
    CHECK_THROWS_AS(load_cohorts_file(dir.file("broken.json")), IoError);
}

TEST_CASE("rejects report serializes deterministically") {
    const std::vector<Reject> rejects = {
        {"pipes", 3, "empty row"},
        {"inspections", 12, "inconsistent inspection metadata"},
    };
    const std::string expected =
        "file,line,reason\n"
        "pipes,3,empty row\n"
        "inspections,12,inconsistent inspection metadata\n";
    CHECK(rejects_report_csv(rejects) == expected);
    CHECK(rejects_report_csv(rejects) == rejects_report_csv(rejects));
    CHECK(rejects_report_csv({}) == "file,line,reason\n");
}
