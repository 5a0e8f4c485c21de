#include "ccm/config_json.hpp"
#include "ccm/units.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numbers>

using namespace ccm;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;
using nlohmann::json;

TEST_CASE("quantities with units") {
    CHECK_THAT(parse_quantity("240nH", Dimension::inductance), WithinRel(240e-9, 1e-15));
    CHECK_THAT(parse_quantity(" 100 ns ", Dimension::time), WithinRel(100e-9, 1e-15));
    CHECK_THAT(parse_quantity("10mOhm", Dimension::resistance), WithinRel(10e-3, 1e-15));
    CHECK_THAT(parse_quantity("10A/us", Dimension::slope), WithinRel(1e7, 1e-15));
    CHECK_THAT(parse_quantity("5MHz", Dimension::angular_frequency),
               WithinRel(2 * std::numbers::pi * 5e6, 1e-15));
    CHECK_THAT(parse_quantity("90deg", Dimension::angle), WithinRel(std::numbers::pi / 2, 1e-15));
    CHECK_THAT(parse_quantity("1e-3", Dimension::current), WithinRel(1e-3, 1e-15));
    CHECK(parse_quantity("+2", Dimension::voltage) == 2.0);

    CHECK_THROWS_WITH(parse_quantity("5 kV", Dimension::current),
                      ContainsSubstring("does not fit this field"));
    CHECK_THROWS_WITH(parse_quantity("abc", Dimension::time),
                      ContainsSubstring("does not start with a number"));
    CHECK_THROWS_AS(parse_quantity("5Hz", Dimension::time), ValidationError);
    CHECK(parse_quantity("3", Dimension::dimensionless) == 3.0);
    CHECK_THROWS_AS(parse_quantity("3x", Dimension::dimensionless), ValidationError);
}

TEST_CASE("the prototype preset parses") {
    const auto rc = parse_run_config(table1_preset());
    CHECK_THAT(rc.converter.m1, WithinRel(10.0 / 240e-9, 1e-12));
    CHECK(std::holds_alternative<ConstantOnTime>(rc.scheme.variant));
    CHECK(rc.interference.waveform.size() == 1);
    CHECK_FALSE(rc.interference.b_functional);
    CHECK(rc.simulation.n_cycles == 1200);
    CHECK_THAT(rc.i_command, WithinRel(5.916666666666667, 1e-15));
}

TEST_CASE("shipped configurations parse") {
    for (const char* name : {"table1_ring", "slope_cft", "filter_cft", "overdrive_cft"}) {
        const auto path = std::string(CCM_SOURCE_DIR) + "/configs/" + name + ".json";
        INFO(path);
        CHECK_NOTHROW(parse_run_config(read_json_file(path)));
    }
}

namespace {

json minimal() {
    return json::parse(R"({
      "converter": {"m1": 1, "m2": 1},
      "scheme": {"type": "constant_off_time", "t_off": 1},
      "i_command": 2
    })");
}

std::string error_of(const json& j) {
    try {
        parse_run_config(j);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("errors carry the JSON pointer of the offending field") {
    CHECK_NOTHROW(parse_run_config(minimal()));

    auto j = minimal();
    j.erase("i_command");
    CHECK_THAT(error_of(j), ContainsSubstring("/i_command: missing required field"));

    j = minimal();
    j["scheme"]["t_off"] = "1 V";
    CHECK_THAT(error_of(j), ContainsSubstring("/scheme/t_off"));

    j = minimal();
    j["bogus"] = 1;
    CHECK_THAT(error_of(j), ContainsSubstring("/bogus: unknown field"));

    j = minimal();
    j["converter"]["m1"] = -1;
    CHECK_THAT(error_of(j), ContainsSubstring("/converter"));

    j = minimal();
    j["interference"] = json::parse(
        R"({"waveform": [{"type": "sinusoid", "amplitude": 0.1, "omega": 1},
                         {"type": "trapezoid", "amplitude": 0.1, "omega": 10, "slew": 0.01}]})");
    CHECK_THAT(error_of(j), ContainsSubstring("/interference/waveform/1"));

    j = minimal();
    j["method"] = json::parse(R"({"type": "filter", "tau": "-3ns"})");
    CHECK_THAT(error_of(j), ContainsSubstring("/method"));

    j = minimal();
    j["design"] = json::parse(R"({"m_s_hat_grid": [0, "x"]})");
    CHECK_THAT(error_of(j), ContainsSubstring("/design/m_s_hat_grid/1"));

    j = minimal();
    j["seed"] = -4;
    CHECK_THAT(error_of(j), ContainsSubstring("/seed"));

    CHECK_THROWS_AS(read_json_file("/nonexistent/config.json"), ValidationError);
}
