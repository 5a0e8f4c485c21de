#pragma once

#include "ccm/core.hpp"
#include "ccm/errors.hpp"
#include "ccm/interference.hpp"
#include "ccm/units.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ccm {

// JSON run configuration. Physical values are numbers in SI units or strings
// with a unit suffix ("240nH", "100ns", "5MHz", "10A/us"). Every error names
// the offending field as a JSON pointer.

struct StepSettings {
    std::size_t at_cycle = 100;
    double relative = 0.05;
    std::size_t cycles_after = 200;
};

struct SimulationSettings {
    std::size_t n_cycles = 2000;
    std::size_t skip = 500;  ///< cycles dropped before the spectrum and orbit checks
    std::optional<StepSettings> step;
};

struct DesignSettings {
    std::vector<double> m_s_hat_grid;
    std::vector<double> tau_hat_grid;
    std::optional<double> i_max;  ///< A; defaults to the command
    double v_trig = 1.0;          ///< only the product v_trig * tau_c enters the loop
    double margin = 0.05;
    double t_d = 0.0;
    double m_s = 0.0;  ///< slope to certify, A/s
};

struct CompareSettings {
    double a_hat = 0.01;
    double omega_hat = 3.0;
};

struct ProbeSettings {
    std::size_t n_draws = 1000;
    std::size_t n_cycles = 600;
    double omega_span = 4.0;
};

struct RunConfig {
    ConverterConfig converter;
    ModulationScheme scheme;
    InterferenceSpec interference;
    ConditioningMethod method = SlopeComp{0.0};
    double i_command = 0.0;
    std::uint64_t seed = 0;
    SimulationSettings simulation;
    DesignSettings design;
    CompareSettings compare;
    ProbeSettings probe;
};

namespace detail {

using nlohmann::json;

// A JSON node plus its pointer, so errors can say where they happened.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return j_; }
    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError((path_.empty() ? std::string("/") : path_) + ": " + what);
    }

    Node at(const std::string& key) const {
        if (!j_.is_object()) fail("expected an object");
        if (!j_.contains(key)) Node(j_, path_ + "/" + key).fail("missing required field");
        return Node(j_.at(key), path_ + "/" + key);
    }

    Node at(std::size_t i) const { return Node(j_.at(i), path_ + "/" + std::to_string(i)); }

    void expect_object() const {
        if (!j_.is_object()) fail("expected an object");
    }

    void only(std::initializer_list<std::string_view> keys) const {
        expect_object();
        for (const auto& [k, v] : j_.items()) {
            bool known = false;
            for (auto key : keys) known = known || key == k;
            if (!known) Node(v, path_ + "/" + k).fail("unknown field");
        }
    }

    double quantity(Dimension dim) const {
        if (j_.is_number()) return j_.get<double>();
        if (j_.is_string()) {
            try {
                return parse_quantity(j_.get<std::string>(), dim);
            } catch (const ValidationError& e) {
                fail(e.what());
            }
        }
        fail("expected a number or a string with a unit");
    }

    std::string text() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }

    bool flag() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }

    std::uint64_t count() const {
        if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0))
            fail("expected a non-negative integer");
        return j_.get<std::uint64_t>();
    }

    std::vector<double> list(Dimension dim) const {
        if (!j_.is_array()) fail("expected an array");
        std::vector<double> out;
        for (std::size_t i = 0; i < j_.size(); ++i) out.push_back(at(i).quantity(dim));
        return out;
    }

private:
    const json& j_;
    std::string path_;
};

// Runs a library validator and re-throws its message under the node's path.
template <class F>
auto checked(const Node& node, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        node.fail(e.what());
    }
}

inline ConverterConfig parse_converter(const Node& n) {
    n.expect_object();
    if (!n.has("v_in") && n.has("m1")) {
        n.only({"m1", "m2"});
        const double m1 = n.at("m1").quantity(Dimension::slope);
        const double m2 = n.at("m2").quantity(Dimension::slope);
        return checked(n, [&] { return make_slope_config(m1, m2); });
    }
    n.only({"v_in", "v_out", "inductance", "capacitance", "r_load", "r_sense", "m1", "m2"});
    const double v_in = n.at("v_in").quantity(Dimension::voltage);
    const double v_out = n.at("v_out").quantity(Dimension::voltage);
    const double l = n.at("inductance").quantity(Dimension::inductance);
    const double c = n.at("capacitance").quantity(Dimension::capacitance);
    const double r = n.at("r_load").quantity(Dimension::resistance);
    const double rs = n.at("r_sense").quantity(Dimension::resistance);
    ConverterConfig cfg = checked(n, [&] { return make_buck_config(v_in, v_out, l, c, r, rs); });
    // explicit slopes are accepted only when they agree with the physics
    if (n.has("m1")) cfg.m1 = n.at("m1").quantity(Dimension::slope);
    if (n.has("m2")) cfg.m2 = n.at("m2").quantity(Dimension::slope);
    checked(n, [&] {
        validate(cfg);
        return 0;
    });
    return cfg;
}

inline ModulationScheme parse_scheme(const Node& n) {
    const std::string type = n.at("type").text();
    ModulationScheme s;
    if (n.has("t_on_min")) s.t_on_min = n.at("t_on_min").quantity(Dimension::time);
    if (type == "constant_on_time") {
        n.only({"type", "t_on", "t_on_min"});
        s.variant = ConstantOnTime{n.at("t_on").quantity(Dimension::time)};
    } else if (type == "constant_off_time") {
        n.only({"type", "t_off", "t_on_min"});
        s.variant = ConstantOffTime{n.at("t_off").quantity(Dimension::time)};
    } else if (type == "fixed_frequency") {
        n.only({"type", "t_s", "extremum", "max_fraction", "t_on_min"});
        FixedFrequency ff;
        ff.t_s = n.at("t_s").quantity(Dimension::time);
        if (n.has("extremum")) {
            const std::string e = n.at("extremum").text();
            if (e == "peak") ff.extremum = Extremum::peak;
            else if (e == "valley") ff.extremum = Extremum::valley;
            else n.at("extremum").fail("expected \"peak\" or \"valley\"");
        }
        if (n.has("max_fraction"))
            ff.max_fraction = n.at("max_fraction").quantity(Dimension::dimensionless);
        s.variant = ff;
    } else {
        n.at("type").fail("expected constant_on_time, constant_off_time or fixed_frequency");
    }
    return s;
}

inline WaveformComponent parse_component(const Node& n) {
    const std::string type = n.at("type").text();
    WaveformComponent c;
    auto phase = [&] { return n.has("phase") ? n.at("phase").quantity(Dimension::angle) : 0.0; };
    if (type == "sinusoid") {
        n.only({"type", "amplitude", "omega", "phase"});
        c = Sinusoid{n.at("amplitude").quantity(Dimension::current),
                     n.at("omega").quantity(Dimension::angular_frequency), phase()};
    } else if (type == "trapezoid") {
        n.only({"type", "amplitude", "omega", "slew", "phase"});
        c = Trapezoid{n.at("amplitude").quantity(Dimension::current),
                      n.at("omega").quantity(Dimension::angular_frequency),
                      n.at("slew").quantity(Dimension::slope), phase()};
    } else if (type == "damped_ring") {
        n.only({"type", "amplitude", "omega", "decay", "start_time"});
        c = DampedRing{n.at("amplitude").quantity(Dimension::current),
                       n.at("omega").quantity(Dimension::angular_frequency),
                       n.has("decay") ? n.at("decay").quantity(Dimension::dimensionless) : 0.0,
                       n.has("start_time") ? n.at("start_time").quantity(Dimension::time) : 0.0};
    } else {
        n.at("type").fail("expected sinusoid, trapezoid or damped_ring");
    }
    checked(n, [&] {
        validate(c);
        return 0;
    });
    return c;
}

// a_ub and omega_l are always explicit. The slope and B bounds default to
// those of the waveform; without a waveform lambda_ub must be given.
inline InterferenceSpec parse_interference(const Node& n) {
    n.only({"a_ub", "omega_l", "lambda_ub", "b_functional", "waveform", "random_phase", "seed"});
    std::vector<WaveformComponent> parts;
    if (n.has("waveform")) {
        const Node w = n.at("waveform");
        if (!w.raw().is_array()) w.fail("expected an array of components");
        for (std::size_t i = 0; i < w.raw().size(); ++i) parts.push_back(parse_component(w.at(i)));
    }
    const bool random_phase = n.has("random_phase") && n.at("random_phase").flag();
    const std::uint64_t seed = n.has("seed") ? n.at("seed").count() : 0;
    InterferenceSpec spec = make_interference(parts, random_phase, seed);
    const InterferenceSpec derived = spec;

    spec.a_ub = n.at("a_ub").quantity(Dimension::current);
    spec.omega_l = n.at("omega_l").quantity(Dimension::angular_frequency);
    if (n.has("lambda_ub")) {
        spec.lambda_ub = n.at("lambda_ub").quantity(Dimension::slope);
    } else if (parts.empty()) {
        n.at("lambda_ub");  // reports the missing field
    }
    if (n.has("b_functional")) {
        spec.b_functional = n.at("b_functional").quantity(Dimension::charge);
    } else if (parts.empty()) {
        spec.b_functional = std::nullopt;
    }
    checked(n, [&] {
        validate(spec);
        return 0;
    });
    if (!parts.empty() && derived.omega_l < spec.omega_l * (1.0 - 1e-12))
        n.at("omega_l").fail("a waveform component lies below omega_l");
    if (!parts.empty() && spec.b_functional && derived.b_functional &&
        *derived.b_functional > *spec.b_functional * (1.0 + 1e-12))
        n.at("b_functional").fail("the waveform's B exceeds b_functional");
    return spec;
}

inline ConditioningMethod parse_method(const Node& n) {
    const std::string type = n.at("type").text();
    ConditioningMethod m;
    if (type == "slope") {
        n.only({"type", "m_s"});
        m = SlopeComp{n.has("m_s") ? n.at("m_s").quantity(Dimension::slope) : 0.0};
    } else if (type == "filter") {
        n.only({"type", "tau"});
        m = LowPassFilter{n.at("tau").quantity(Dimension::time)};
    } else if (type == "overdrive") {
        n.only({"type", "tau_c", "v_trig", "t_d", "blanking"});
        OverdriveDelay od;
        od.tau_c = n.at("tau_c").quantity(Dimension::time);
        od.v_trig = n.at("v_trig").quantity(Dimension::voltage);
        if (n.has("t_d")) od.t_d = n.at("t_d").quantity(Dimension::time);
        if (n.has("blanking")) od.blanking = n.at("blanking").quantity(Dimension::time);
        m = od;
    } else {
        n.at("type").fail("expected slope, filter or overdrive");
    }
    checked(n, [&] {
        validate(m);
        return 0;
    });
    return m;
}

inline SimulationSettings parse_simulation(const Node& n) {
    n.only({"n_cycles", "skip", "step"});
    SimulationSettings s;
    if (n.has("n_cycles")) s.n_cycles = n.at("n_cycles").count();
    if (n.has("skip")) s.skip = n.at("skip").count();
    if (s.n_cycles == 0) n.at("n_cycles").fail("must be at least 1");
    if (s.skip >= s.n_cycles) n.at("skip").fail("must be smaller than n_cycles");
    if (n.has("step")) {
        const Node st = n.at("step");
        st.only({"at_cycle", "relative", "cycles_after"});
        StepSettings step;
        if (st.has("at_cycle")) step.at_cycle = st.at("at_cycle").count();
        if (st.has("relative")) step.relative = st.at("relative").quantity(Dimension::dimensionless);
        if (st.has("cycles_after")) step.cycles_after = st.at("cycles_after").count();
        if (step.at_cycle == 0) st.at("at_cycle").fail("must be at least 1");
        if (step.relative == 0.0) st.at("relative").fail("must be nonzero");
        if (step.cycles_after < 2) st.at("cycles_after").fail("must be at least 2");
        s.step = step;
    }
    return s;
}

inline DesignSettings parse_design(const Node& n) {
    n.only({"m_s_hat_grid", "tau_hat_grid", "i_max", "v_trig", "margin", "t_d", "m_s"});
    DesignSettings d;
    if (n.has("m_s_hat_grid")) d.m_s_hat_grid = n.at("m_s_hat_grid").list(Dimension::dimensionless);
    if (n.has("tau_hat_grid")) d.tau_hat_grid = n.at("tau_hat_grid").list(Dimension::dimensionless);
    if (n.has("i_max")) d.i_max = n.at("i_max").quantity(Dimension::current);
    if (n.has("v_trig")) d.v_trig = n.at("v_trig").quantity(Dimension::voltage);
    if (n.has("margin")) d.margin = n.at("margin").quantity(Dimension::dimensionless);
    if (n.has("t_d")) d.t_d = n.at("t_d").quantity(Dimension::time);
    if (n.has("m_s")) d.m_s = n.at("m_s").quantity(Dimension::slope);
    if (!(d.v_trig > 0.0)) n.at("v_trig").fail("must be positive");
    if (!(d.margin >= 0.0)) n.at("margin").fail("must be non-negative");
    if (!(d.m_s >= 0.0)) n.at("m_s").fail("must be non-negative");
    for (std::size_t i = 0; i < d.tau_hat_grid.size(); ++i)
        if (!(d.tau_hat_grid[i] > 0.0)) n.at("tau_hat_grid").at(i).fail("must be positive");
    for (std::size_t i = 0; i < d.m_s_hat_grid.size(); ++i)
        if (!(d.m_s_hat_grid[i] >= 0.0)) n.at("m_s_hat_grid").at(i).fail("must be non-negative");
    return d;
}

inline CompareSettings parse_compare(const Node& n) {
    n.only({"a_hat", "omega_hat"});
    CompareSettings c;
    if (n.has("a_hat")) c.a_hat = n.at("a_hat").quantity(Dimension::dimensionless);
    if (n.has("omega_hat")) c.omega_hat = n.at("omega_hat").quantity(Dimension::dimensionless);
    if (!(c.a_hat >= 0.0)) n.at("a_hat").fail("must be non-negative");
    if (!(c.omega_hat > 0.0)) n.at("omega_hat").fail("must be positive");
    return c;
}

inline ProbeSettings parse_probe(const Node& n) {
    n.only({"n_draws", "n_cycles", "omega_span"});
    ProbeSettings p;
    if (n.has("n_draws")) p.n_draws = n.at("n_draws").count();
    if (n.has("n_cycles")) p.n_cycles = n.at("n_cycles").count();
    if (n.has("omega_span")) p.omega_span = n.at("omega_span").quantity(Dimension::dimensionless);
    if (p.n_draws == 0) n.at("n_draws").fail("must be at least 1");
    if (p.n_cycles < 100) n.at("n_cycles").fail("must be at least 100");
    if (!(p.omega_span >= 1.0)) n.at("omega_span").fail("must be at least 1");
    return p;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    const detail::Node root(j, "");
    root.only({"converter", "scheme", "interference", "method", "i_command", "seed", "simulation",
               "design", "compare", "probe"});
    RunConfig rc;
    rc.converter = detail::parse_converter(root.at("converter"));
    rc.scheme = detail::parse_scheme(root.at("scheme"));
    detail::checked(root.at("scheme"), [&] { return make_frame(rc.converter, rc.scheme); });
    rc.interference = root.has("interference") ? detail::parse_interference(root.at("interference"))
                                               : no_interference();
    if (root.has("method")) rc.method = detail::parse_method(root.at("method"));
    rc.i_command = root.at("i_command").quantity(Dimension::current);
    if (root.has("seed")) rc.seed = root.at("seed").count();
    if (root.has("simulation")) rc.simulation = detail::parse_simulation(root.at("simulation"));
    if (root.has("design")) rc.design = detail::parse_design(root.at("design"));
    if (root.has("compare")) rc.compare = detail::parse_compare(root.at("compare"));
    if (root.has("probe")) rc.probe = detail::parse_probe(root.at("probe"));
    return rc;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// The constant on-time buck prototype: 12 V to 2 V, 240 nH, 100 uF, 0.2 Ohm,
/// 10 mOhm sense, T_on = 100 ns. The interference is a ring excited at the
/// high-side turn-on edge (one on-time before the valley interval starts),
/// 8 mV sense-referred at 8 MHz, which drives the bare comparator loop into a
/// period-5 orbit. The command sits half a ripple below 8 A.
inline nlohmann::json table1_preset() {
    return nlohmann::json::parse(R"({
  "converter": {"v_in": "12V", "v_out": "2V", "inductance": "240nH", "capacitance": "100uF",
                "r_load": "0.2Ohm", "r_sense": "10mOhm"},
  "scheme": {"type": "constant_on_time", "t_on": "100ns"},
  "interference": {
    "a_ub": "0.8A", "omega_l": "8MHz",
    "waveform": [{"type": "damped_ring", "amplitude": "0.8A", "omega": "8MHz",
                  "decay": 1e6, "start_time": "-100ns"}]
  },
  "method": {"type": "slope", "m_s": 0},
  "i_command": 5.916666666666667,
  "simulation": {"n_cycles": 1200, "skip": 400},
  "design": {"v_trig": "1V", "margin": 0.05}
})");
}

}  // namespace ccm
