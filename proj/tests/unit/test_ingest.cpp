#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "countycast/errors.hpp"
#include "countycast/ingest.hpp"

using namespace countycast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("countycast_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        const std::string p = (path / name).string();
        std::ofstream out(p, std::ios::trunc);
        out << content;
        return p;
    }
};

} // namespace

TEST_CASE("load_cases derives clamped differences and corrects cumulative") {
    TempDir dir;
    IngestReport report;

    SUBCASE("plain first differences") {
        const auto p = dir.file("cases.csv",
                                "FIPS,County,4/5/20,4/6/20,4/7/20,4/8/20,4/9/20\n"
                                "01001,Alpha,0,0,5,5,9\n");
        const CasesPartial cases = load_cases(p, report);
        REQUIRE(cases.counties.count(1001) == 1);
        const auto& s = cases.counties.at(1001);
        const std::vector<double> expected = {0, 0, 5, 0, 4};
        for (int i = 0; i < 5; ++i) CHECK(s.new_cases[i] == expected[static_cast<std::size_t>(i)]);
        CHECK(report.sources.at("cases").accepted == 1);
        CHECK(report.anomalies.empty());
    }

    SUBCASE("negative dips clamp to zero and cumulative becomes running max") {
        const auto p = dir.file("cases2.csv",
                                "FIPS,County,4/5/20,4/6/20,4/7/20\n"
                                "01001,Alpha,10,8,12\n");
        const CasesPartial cases = load_cases(p, report);
        const auto& s = cases.counties.at(1001);
        CHECK(s.new_cases[0] == 0);
        CHECK(s.new_cases[1] == 0);
        CHECK(s.new_cases[2] == 4);
        CHECK(s.cumulative[0] == 10);
        CHECK(s.cumulative[1] == 10);
        CHECK(s.cumulative[2] == 12);
        REQUIRE(report.anomalies.size() == 1);
        // Corrected cumulative must be non-decreasing.
        for (int i = 1; i < 3; ++i) CHECK(s.cumulative[i] >= s.cumulative[i - 1]);
    }

    SUBCASE("empty file gives empty partial") {
        const auto p = dir.file("cases3.csv", "");
        const CasesPartial cases = load_cases(p, report);
        CHECK(cases.empty());
        CHECK(report.sources.at("cases").read == 0);
    }

    SUBCASE("duplicate FIPS is a hard error") {
        const auto p = dir.file("cases4.csv",
                                "FIPS,County,4/5/20\n"
                                "01001,Alpha,3\n"
                                "01001,AlphaAgain,4\n");
        CHECK_THROWS_AS(load_cases(p, report), InputError);
    }

    SUBCASE("malformed row is rejected with a report entry") {
        const auto p = dir.file("cases5.csv",
                                "FIPS,County,4/5/20,4/6/20\n"
                                "01001,Alpha,1,2\n"
                                "0100X,Beta,1,2\n");
        const CasesPartial cases = load_cases(p, report);
        CHECK(cases.counties.size() == 1);
        CHECK(report.sources.at("cases").rejected == 1);
        CHECK(report.sources.at("cases").read ==
              report.sources.at("cases").accepted + report.sources.at("cases").rejected);
    }
}

TEST_CASE("load_movement validates rows") {
    TempDir dir;
    IngestReport report;
    const auto p = dir.file(
        "mob.tsv",
        "ds\tpolygon_id\tall_day_bing_tiles_visited_relative_change\tall_day_ratio_single_tile_users\n"
        "2020-05-01\t08013\t-0.31\t0.27\n"
        "2020-05-02\t08013\t-0.11\t1.7\n"
        "bogus\t08013\t-0.11\t0.4\n");
    const MovementPartial mp = load_movement(p, report);
    REQUIRE(mp.rows.count(8013) == 1);
    REQUIRE(mp.rows.at(8013).size() == 1);
    const auto& [date, change, stay] = mp.rows.at(8013).front();
    CHECK(date == Date(2020, 5, 1));
    CHECK(change == doctest::Approx(-0.31));
    CHECK(stay == doctest::Approx(0.27));
    CHECK(report.sources.at("mobility").rejected == 2);
}

TEST_CASE("load_sci mirrors single directions and rejects conflicts") {
    TempDir dir;
    IngestReport report;

    SUBCASE("consistent duplicates collapse, single directions mirror") {
        const auto p = dir.file("sci.tsv",
                                "user_loc\tfr_loc\tscaled_sci\n"
                                "01001\t01003\t100\n"
                                "01003\t01001\t100\n"
                                "01001\t01005\t250\n"
                                "01001\t01001\t999\n");
        const ConnectednessGraph g = load_sci(p, report);
        CHECK(g.size() == 3);
        CHECK(g.sci(1001, 1003) == 100);
        CHECK(g.sci(1003, 1001) == 100);
        CHECK(g.sci(1001, 1005) == 250);
        CHECK(g.sci(1005, 1001) == 250);
        CHECK(g.sci(1001, 1001) == 999);
        // Self edges stay out of the exposure row sums.
        CHECK(g.row_sum_excluding_self(g.index_of(1001)) == 350);
    }

    SUBCASE("conflicting weights are a hard error") {
        const auto p = dir.file("sci2.tsv",
                                "user_loc\tfr_loc\tscaled_sci\n"
                                "01001\t01003\t100\n"
                                "01003\t01001\t200\n");
        CHECK_THROWS_AS(load_sci(p, report), InputError);
    }

    SUBCASE("out-of-range weights are rejected rows") {
        const auto p = dir.file("sci3.tsv",
                                "user_loc\tfr_loc\tscaled_sci\n"
                                "01001\t01003\t0\n"
                                "01001\t01005\t1000000001\n"
                                "01001\t01007\t5\n");
        const ConnectednessGraph g = load_sci(p, report);
        CHECK(report.sources.at("sci").rejected == 2);
        CHECK(g.sci(1001, 1007) == 5);
    }
}

TEST_CASE("load_static and load_weather validation") {
    TempDir dir;
    IngestReport report;

    SUBCASE("population passthrough") {
        const auto p = dir.file("static.csv", "fips,population\n08013,330758\n");
        const StaticPartial sp = load_static(p, report);
        CHECK(sp.counties.at(8013).population == 330758);
    }
    SUBCASE("non-positive population is a hard error") {
        const auto p = dir.file("static2.csv", "fips,population\n08013,0\n");
        CHECK_THROWS_AS(load_static(p, report), InputError);
    }
    SUBCASE("weather rows set cells; inverted temps are rejected") {
        const auto p = dir.file("weather.csv",
                                "fips,date,tmin_c,tmax_c\n"
                                "08013,2020-07-01,12.0,31.5\n"
                                "08013,2020-07-02,20,15\n");
        const WeatherPartial wp = load_weather(p, report);
        REQUIRE(wp.rows.at(8013).size() == 1);
        CHECK(std::get<1>(wp.rows.at(8013).front()) == 12.0);
        CHECK(report.sources.at("weather").rejected == 1);
    }
}

namespace {

// Minimal consistent four-source fixture: two counties, 15 days.
struct SmallFixture {
    TempDir dir;
    std::string cases, mobility, sci, statics, weather;

    SmallFixture() {
        std::string header = "FIPS,County";
        for (int d = 0; d < 15; ++d) {
            const Date day = Date(2020, 4, 5) + d;
            header += "," + std::to_string(day.month()) + "/" + std::to_string(day.day()) + "/20";
        }
        std::string row1 = "01001,Alpha", row2 = "01003,Beta";
        for (int d = 0; d < 15; ++d) {
            row1 += "," + std::to_string(10 * (d + 1));
            row2 += "," + std::to_string(20 * (d + 1));
        }
        cases = dir.file("cases.csv", header + "\n" + row1 + "\n" + row2 + "\n");

        std::string mob =
            "ds\tpolygon_id\tall_day_bing_tiles_visited_relative_change\tall_day_ratio_single_tile_"
            "users\n";
        for (int d = 0; d < 15; ++d) {
            const std::string day = (Date(2020, 4, 5) + d).to_iso();
            mob += day + "\t01001\t-0.2\t0.3\n";
        }
        mobility = dir.file("mobility.tsv", mob);

        sci = dir.file("sci.tsv",
                       "user_loc\tfr_loc\tscaled_sci\n"
                       "01001\t01003\t500\n");
        statics = dir.file("static.csv", "fips,population\n01001,1000\n01003,2000\n");

        std::string wx = "fips,date,tmin_c,tmax_c\n";
        for (int d = 0; d < 15; ++d) {
            const std::string day = (Date(2020, 4, 5) + d).to_iso();
            wx += "01001," + day + ",5,15\n01003," + day + ",6,16\n";
        }
        weather = dir.file("weather.csv", wx);
    }
};

} // namespace

TEST_CASE("assemble_panel merges sources and flags mobility gaps") {
    SmallFixture fx;
    IngestReport report;
    const CasesPartial cases = load_cases(fx.cases, report);
    const MovementPartial movement = load_movement(fx.mobility, report);
    const ConnectednessGraph graph = load_sci(fx.sci, report);
    const StaticPartial statics = load_static(fx.statics, report);
    const WeatherPartial weather = load_weather(fx.weather, report);
    const CountyPanel panel = assemble_panel(cases, movement, statics, weather, graph, report);

    REQUIRE(panel.counties.size() == 2);
    CHECK(panel.first == Date(2020, 4, 5));
    CHECK(panel.last == Date(2020, 4, 19));
    CHECK(!panel.counties.at(1001).mobility_imputed);
    CHECK(panel.counties.at(1003).mobility_imputed);  // absent from mobility file
    CHECK(panel.counties.at(1001).stay_put.values[0] == doctest::Approx(0.3));
    CHECK(panel.counties.at(1003).temp_min.values[3] == doctest::Approx(6.0));
    // Cumulative non-decreasing invariant after correction.
    for (const auto& [fips, rec] : panel.counties) {
        for (Eigen::Index i = 1; i < rec.cumulative_cases.size(); ++i) {
            CHECK(rec.cumulative_cases.values[i] >= rec.cumulative_cases.values[i - 1]);
        }
    }
}

TEST_CASE("assemble_panel drops counties without population or graph membership") {
    SmallFixture fx;
    IngestReport report;
    const CasesPartial cases = load_cases(fx.cases, report);
    const MovementPartial movement = load_movement(fx.mobility, report);
    const WeatherPartial weather = load_weather(fx.weather, report);

    SUBCASE("missing population") {
        StaticPartial only_one;
        only_one.counties[1001].population = 1000;
        const ConnectednessGraph graph = load_sci(fx.sci, report);
        const CountyPanel panel =
            assemble_panel(cases, movement, only_one, weather, graph, report);
        CHECK(panel.counties.size() == 1);
        REQUIRE(report.dropped_counties.size() == 1);
        CHECK(report.dropped_counties.front().find("01003") != std::string::npos);
    }
    SUBCASE("missing graph membership") {
        const StaticPartial statics = load_static(fx.statics, report);
        const ConnectednessGraph graph({1001}, {});
        const CountyPanel panel =
            assemble_panel(cases, movement, statics, weather, graph, report);
        CHECK(panel.counties.size() == 1);
        CHECK(panel.counties.count(1001) == 1);
    }
}

TEST_CASE("snapshot round trip is bit-exact and guarded") {
    SmallFixture fx;
    IngestReport report;
    const CasesPartial cases = load_cases(fx.cases, report);
    const MovementPartial movement = load_movement(fx.mobility, report);
    const ConnectednessGraph graph = load_sci(fx.sci, report);
    const StaticPartial statics = load_static(fx.statics, report);
    const WeatherPartial weather = load_weather(fx.weather, report);
    const CountyPanel panel = assemble_panel(cases, movement, statics, weather, graph, report);

    const std::string snap = (fx.dir.path / "panel.snap").string();
    write_snapshot(panel, graph, snap);
    auto [panel2, graph2] = read_snapshot(snap);

    REQUIRE(panel2.counties.size() == panel.counties.size());
    for (const auto& [fips, rec] : panel.counties) {
        const auto& rec2 = panel2.counties.at(fips);
        CHECK(rec2.population == rec.population);
        for (Eigen::Index i = 0; i < rec.new_cases.size(); ++i) {
            CHECK(rec2.new_cases.values[i] == rec.new_cases.values[i]);
            CHECK(rec2.stay_put.missing[i] == rec.stay_put.missing[i]);
            if (!rec.stay_put.missing[i]) {
                CHECK(rec2.stay_put.values[i] == rec.stay_put.values[i]);
            }
        }
    }
    CHECK(graph2.sci(1001, 1003) == 500);

    SUBCASE("rewriting produces identical bytes") {
        const std::string snap2 = (fx.dir.path / "panel2.snap").string();
        write_snapshot(panel2, graph2, snap2);
        std::ifstream a(snap, std::ios::binary), b(snap2, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    SUBCASE("corrupted payload fails the checksum") {
        std::fstream f(snap, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(-3, std::ios::end);
        const char junk = 'x';
        f.write(&junk, 1);
        f.close();
        CHECK_THROWS_AS(read_snapshot(snap), InputError);
    }

    SUBCASE("version mismatch is diagnosed") {
        std::fstream f(snap, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(8, std::ios::beg);  // version field follows the magic
        const std::uint32_t bad = 999;
        f.write(reinterpret_cast<const char*>(&bad), 4);
        f.close();
        try {
            read_snapshot(snap);
            FAIL("expected version error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
}

TEST_CASE("empty panel snapshot restores empty") {
    TempDir dir;
    CountyPanel panel;
    panel.first = Date(2020, 4, 5);
    panel.last = Date(2020, 4, 5);
    const ConnectednessGraph graph({}, {});
    const std::string snap = (dir.path / "empty.snap").string();
    write_snapshot(panel, graph, snap);
    auto [panel2, graph2] = read_snapshot(snap);
    CHECK(panel2.counties.empty());
    CHECK(graph2.size() == 0);
}
