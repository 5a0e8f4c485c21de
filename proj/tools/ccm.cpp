#include "ccm/ccm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kInfeasible = 3;
constexpr int kDiverged = 4;

struct Globals {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string order_text(const ccm::Order& o) {
    return std::to_string(o.k) + "/" + std::to_string(o.q);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

class Output {
public:
    explicit Output(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name) const {
        std::ofstream f(dir_ / name);
        if (!f) throw ccm::ValidationError((dir_ / name).string() + ": cannot write");
        return f;
    }

    void write_json(const std::string& name, const json& j) const { open(name) << j.dump(2) << '\n'; }

private:
    fs::path dir_;
};

// The resolved configuration: preset first, then the config file merged over it.
std::optional<json> resolve_config(const Globals& g) {
    std::optional<json> j;
    if (g.preset == "table1") j = ccm::table1_preset();
    if (!g.config_path.empty()) {
        json patch = ccm::read_json_file(g.config_path);
        if (j) j->merge_patch(patch);
        else j = std::move(patch);
    }
    return j;
}

ccm::RunConfig require_config(const std::optional<json>& j, const Globals& g) {
    if (!j) throw ccm::ValidationError("no configuration: pass --config PATH or --preset table1");
    ccm::RunConfig rc = ccm::parse_run_config(*j);
    if (g.seed) {
        rc.seed = *g.seed;
        rc.interference.seed = *g.seed;
    }
    return rc;
}

void write_manifest(const Output& out, const Globals& g, const std::string& subcommand,
                    const std::optional<json>& config, const std::string& extra_input = {}) {
    const std::string canonical = (config ? config->dump() : std::string("null")) + extra_input;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
    json m{{"tool_version", kVersion},
           {"subcommand", subcommand},
           {"config_path", g.config_path},
           {"preset", g.preset},
           {"seed", g.seed ? json(*g.seed) : json(nullptr)},
           {"out_dir", g.out_dir},
           {"input_hash", hash}};
    out.write_json("manifest.json", m);
}

json pole_range_json(const std::optional<ccm::PoleRange>& r) {
    if (!r) return nullptr;
    return json{{"a_min", r->a_min}, {"a_max", r->a_max}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals& g) {
    const auto cfg_json = resolve_config(g);
    const auto rc = require_config(cfg_json, g);
    const Output out(g.out_dir);
    write_manifest(out, g, "simulate", cfg_json);

    const auto& sim = rc.simulation;
    const auto rep = ccm::steady_state_report(rc.converter, rc.scheme, rc.interference, rc.method,
                                              rc.i_command, sim.n_cycles, sim.skip);
    {
        auto f = out.open("trace.csv");
        f << "n,t_on_s,i_extremum_A,i_command_A\n";
        for (const auto& s : rep.trace.samples)
            f << s.n << ',' << num(s.t_on) << ',' << num(s.i_extremum) << ',' << num(s.i_command)
              << '\n';
    }
    if (rep.trace.dense_waveform) {
        auto f = out.open("dense.csv");
        f << "t_s,i_A\n";
        for (const auto& [t, i] : *rep.trace.dense_waveform) f << num(t) << ',' << num(i) << '\n';
    }
    {
        auto f = out.open("spectrum.csv");
        f << "freq_hz,magnitude\n";
        for (std::size_t k = 0; k < rep.spectrum.frequency_hz.size(); ++k)
            f << num(rep.spectrum.frequency_hz[k]) << ',' << num(rep.spectrum.magnitude[k]) << '\n';
    }

    json summary{{"terminated_by", ccm::to_string(rep.terminated_by)},
                 {"cycles", rep.trace.samples.size()},
                 {"method", ccm::method_name(rc.method)},
                 {"scheme", ccm::scheme_name(rc.scheme)},
                 {"diverged", rep.orbit.diverged},
                 {"orbit_period", rep.orbit.period == 0 ? json(nullptr) : json(rep.orbit.period)},
                 {"switching_hz", finite_or_null(rep.switching_hz)}};
    json orders = json::array();
    for (const auto& o : rep.spectrum.orders) orders.push_back(order_text(o));
    summary["subharmonic_orders"] = orders;

    if (sim.step && rep.terminated_by != ccm::Termination::diverged) {
        const auto m = ccm::measure_step(rc.converter, rc.scheme, rc.interference, rc.method,
                                         rc.i_command, sim.step->relative, sim.step->at_cycle,
                                         sim.step->cycles_after);
        summary["step"] = {{"relative", sim.step->relative},
                           {"n_settle", m.transient.n_settle},
                           {"n_settle_fractional", m.transient.n_settle_fractional},
                           {"overshoot", m.transient.overshoot},
                           {"saturated", m.transient.saturated},
                           {"terminated_by", ccm::to_string(m.terminated_by)}};
    }
    out.write_json("summary.json", summary);
    if (rep.terminated_by == ccm::Termination::diverged) {
        std::cerr << "simulation diverged\n";
        return kDiverged;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_design_slope(const Globals& g) {
    const auto cfg_json = resolve_config(g);
    const auto rc = require_config(cfg_json, g);
    const Output out(g.out_dir);
    write_manifest(out, g, "design slope", cfg_json);

    double m_s = rc.design.m_s;
    if (m_s == 0.0)
        if (const auto* s = std::get_if<ccm::SlopeComp>(&rc.method)) m_s = s->m_s;
    const auto rep = ccm::design_slope(rc.converter, rc.scheme, rc.interference, m_s);
    const double m = ccm::make_frame(rc.converter, rc.scheme).rise;
    const double lambda_hat = rc.interference.lambda_ub / m;

    json j{{"step1_first_event_latching", true},
           {"step2_continuous", rep.continuous},
           {"step3_gas_stable", rep.gas_stable},
           {"m_s", rep.m_s},
           {"m_s_hat", rep.m_s / m},
           {"lambda_hat", lambda_hat},
           {"pole_range", pole_range_json(rep.pole_range)},
           {"n_w", finite_or_null(rep.n_w)},
           {"o_w", finite_or_null(rep.o_w)},
           {"recommended_m_s", rep.m_s_star},
           {"recommended_m_s_hat", rep.m_s_star / m},
           {"n_w_star", finite_or_null(rep.n_w_star)},
           {"n_w_star_closed_form", finite_or_null(rep.n_w_star_closed_form)}};
    out.write_json("design_slope.json", j);

    std::vector<double> grid = rc.design.m_s_hat_grid;
    if (grid.empty()) grid = ccm::linear_grid(0.0, std::max(1.0, 2.0 * rep.m_s_star / m), 101);
    auto f = out.open("slope_sweep.csv");
    f << "m_s_hat,N_w,O_w\n";
    for (const auto& row : ccm::slope_sweep(lambda_hat, grid))
        f << num(row.m_s_hat) << ',' << num(row.n_w) << ',' << num(row.o_w) << '\n';
    return kOk;
}

int cmd_design_filter(const Globals& g) {
    const auto cfg_json = resolve_config(g);
    const auto rc = require_config(cfg_json, g);
    const Output out(g.out_dir);
    write_manifest(out, g, "design filter", cfg_json);

    std::vector<double> grid = rc.design.tau_hat_grid;
    if (grid.empty()) grid = ccm::log_grid(0.05, 5.0, 15);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const double t = ccm::make_frame(rc.converter, rc.scheme).base_interval;

    const double cmd[] = {rc.i_command};
    const auto rows = ccm::design_sweep(rc.converter, rc.scheme, rc.interference, grid, cmd);
    std::vector<ccm::SimulatedStep> sims(rows.size());
    ccm::parallel_for(rows.size(), [&](std::size_t i) {
        if (rows[i].stable)
            sims[i] = ccm::simulated_worst_step(rc.converter, rc.scheme, rc.interference,
                                                rows[i].tau_hat * t, rc.i_command);
    });

    {
        auto f = out.open("filter_sweep.csv");
        f << "tau_hat,n_w_theory,o_w_theory,n_w_sim,o_w_sim,stable\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const bool sim_ok = rows[i].stable && !sims[i].saturated;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            f << num(rows[i].tau_hat) << ',' << num(rows[i].n_w) << ',' << num(rows[i].o_w) << ','
              << num(sim_ok ? sims[i].n_w : nan) << ',' << num(sim_ok ? sims[i].o_w : nan) << ','
              << (rows[i].stable ? 1 : 0) << '\n';
        }
    }

    // recommend the fastest small-signal-stable setting; overshoot breaks ties
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].stable) continue;
        if (!best || rows[i].n_w < rows[*best].n_w ||
            (rows[i].n_w == rows[*best].n_w && rows[i].o_w < rows[*best].o_w))
            best = i;
    }
    const double i_max = rc.design.i_max.value_or(std::abs(rc.i_command));
    json j{{"step1_first_event_latching", true}, {"i_max", i_max}};
    json table = json::array();
    for (const auto& r : rows)
        table.push_back({{"tau_hat", r.tau_hat},
                         {"stable", r.stable},
                         {"n_w", finite_or_null(r.n_w)},
                         {"o_w", finite_or_null(r.o_w)},
                         {"n_w_pole", finite_or_null(r.n_w_pole)},
                         {"o_w_pole", finite_or_null(r.o_w_pole)},
                         {"pole_range", pole_range_json(r.pole_range)}});
    j["sweep"] = table;
    if (!best) {
        j["feasible"] = false;
        j["reason"] = "no time constant on the grid gives a stable loop";
        out.write_json("design_filter.json", j);
        std::cerr << "infeasible: no stable filter time constant on the grid\n";
        return kInfeasible;
    }
    const double tau = rows[*best].tau_hat * t;
    j["feasible"] = true;
    j["recommended_tau_hat"] = rows[*best].tau_hat;
    j["recommended_tau"] = tau;
    j["n_w"] = finite_or_null(rows[*best].n_w);
    j["o_w"] = finite_or_null(rows[*best].o_w);
    try {
        const bool continuous =
            ccm::continuity_condition(rc.converter, rc.scheme, rc.interference, tau, i_max);
        j["step2_continuous"] = continuous;
        // the stability verdict is only issued on top of continuity
        j["step3_gas_stable"] =
            continuous &&
            ccm::stability_condition(rc.converter, rc.scheme, rc.interference, tau, i_max);
    } catch (const ccm::ScopeError&) {
        j["step2_continuous"] = "no large-signal certificate";
        j["step3_gas_stable"] = "no large-signal certificate";
    }
    out.write_json("design_filter.json", j);
    return kOk;
}

int cmd_design_overdrive(const Globals& g) {
    const auto cfg_json = resolve_config(g);
    const auto rc = require_config(cfg_json, g);
    const Output out(g.out_dir);
    write_manifest(out, g, "design overdrive", cfg_json);

    json j{{"step1_first_event_latching", true}};
    ccm::OverdriveDesignReport rep;
    try {
        rep = ccm::size_for_speed(rc.converter, rc.scheme, rc.interference, rc.design.v_trig,
                                  rc.design.margin, rc.design.t_d);
    } catch (const ccm::InfeasibleError& e) {
        j["feasible"] = false;
        j["reason"] = e.what();
        out.write_json("design_overdrive.json", j);
        throw;
    }
    const double r_sense = rc.converter.r_sense;
    j["feasible"] = true;
    j["step2_continuous"] = ccm::to_string(rep.continuous_certified);
    j["step3_gas_stable"] = rep.gas_stable;
    j["charge_threshold_A_s"] = rep.charge_threshold;
    j["stability_bound_A_s"] = rep.stability_bound;
    j["v_trig_tau_V_s"] = rep.charge_threshold * r_sense;
    j["stability_bound_V_s"] = rep.stability_bound * r_sense;
    j["v_trig"] = rep.method.v_trig;
    j["tau_c"] = rep.tau_c;
    j["t_d"] = rep.method.t_d;
    j["t_od_max"] = rep.t_od_max;
    j["t_on_min"] = rep.t_on_min;
    j["tau_hat"] = rep.tau_hat;
    j["a_hat"] = rep.a_hat;
    j["omega_hat"] = rep.omega_hat;
    if (rep.psi_range)
        j["psi_range"] = {{"psi_min", rep.psi_range->psi_min},
                          {"psi_max", rep.psi_range->psi_max},
                          {"a_min", rep.psi_range->poles.a_min},
                          {"a_max", rep.psi_range->poles.a_max},
                          {"small_signal_stable", rep.psi_range->small_signal_stable}};
    else
        j["psi_range"] = nullptr;
    j["n_w"] = finite_or_null(rep.n_w);
    j["o_w"] = finite_or_null(rep.o_w);

    // continuity has no closed-form certificate here; report a scan of the
    // static mapping around the command instead
    const ccm::ControlFrame frame = ccm::make_frame(rc.converter, rc.scheme);
    const double ripple = frame.ripple();
    const auto grid = ccm::linear_grid(rc.i_command - 0.25 * ripple, rc.i_command + 0.25 * ripple, 201);
    const ccm::ConditioningMethod method = rep.method;
    const double i_start =
        frame.sign * ccm::detail::steady_start(frame, rc.converter, method, frame.sign * rc.i_command);
    const auto map = ccm::static_mapping(rc.converter, rc.scheme, rc.interference, method, grid, i_start);
    double max_jump = 0.0;
    bool monotone = true;
    for (std::size_t i = 1; i < map.size(); ++i) {
        const double dt = (map[i].second - map[i - 1].second) * frame.sign;
        monotone = monotone && dt >= 0.0;
        max_jump = std::max(max_jump, std::abs(dt));
    }
    j["static_mapping_scan"] = {{"points", map.size()},
                                {"grid_step_A", grid[1] - grid[0]},
                                {"max_trigger_step_s", max_jump},
                                {"monotone", monotone}};
    out.write_json("design_overdrive.json", j);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_compare(const Globals& g, std::optional<double> a_hat, std::optional<double> omega_hat) {
    const auto cfg_json = resolve_config(g);
    ccm::CompareSettings cs;
    if (cfg_json && cfg_json->contains("compare"))
        cs = ccm::detail::parse_compare(ccm::detail::Node(cfg_json->at("compare"), "/compare"));
    if (a_hat) cs.a_hat = *a_hat;
    if (omega_hat) cs.omega_hat = *omega_hat;
    const Output out(g.out_dir);
    write_manifest(out, g, "compare", cfg_json,
                   "a_hat=" + num(cs.a_hat) + ";omega_hat=" + num(cs.omega_hat));

    auto pts = ccm::compare_methods(cs.a_hat, cs.omega_hat, ccm::default_compare_grids());
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.method != b.method ? a.method < b.method : a.parameter < b.parameter;
    });
    {
        auto f = out.open("compare.csv");
        f << "method,parameter,N_w,O_w\n";
        for (const auto& p : pts)
            f << p.method << ',' << num(p.parameter) << ',' << num(p.n_w) << ',' << num(p.o_w)
              << '\n';
    }
    const std::vector<std::string> methods{"filter", "overdrive", "slope"};
    json counts = ccm::pareto_counts(pts, methods);
    json shares = json::object();
    json dominance = json::object();
    for (const auto& x : methods)
        for (const auto& y : methods) {
            if (x == y) continue;
            shares[x + "_vs_" + y] = ccm::front_share(pts, x, y);
            dominance[x + "_over_" + y] = ccm::pairwise_dominates(pts, x, y);
        }
    out.write_json("compare_summary.json", {{"a_hat", cs.a_hat},
                                            {"omega_hat", cs.omega_hat},
                                            {"points", pts.size()},
                                            {"front_counts", counts},
                                            {"front_share", shares},
                                            {"dominates", dominance}});
    return kOk;
}

json component_json(const ccm::WaveformComponent& c) {
    if (const auto* s = std::get_if<ccm::Sinusoid>(&c))
        return {{"type", "sinusoid"}, {"amplitude", s->amplitude}, {"omega", s->omega}, {"phase", s->phase}};
    if (const auto* z = std::get_if<ccm::Trapezoid>(&c))
        return {{"type", "trapezoid"}, {"amplitude", z->amplitude}, {"omega", z->omega},
                {"slew", z->slew}, {"phase", z->phase}};
    const auto& d = std::get<ccm::DampedRing>(c);
    return {{"type", "damped_ring"}, {"amplitude", d.amplitude}, {"omega", d.omega},
            {"decay", d.decay}, {"start_time", d.start_time}};
}

int cmd_probe(const Globals& g, std::optional<std::size_t> n_draws) {
    const auto cfg_json = resolve_config(g);
    const auto rc = require_config(cfg_json, g);
    const Output out(g.out_dir);
    write_manifest(out, g, "probe", cfg_json, n_draws ? "n_draws=" + std::to_string(*n_draws) : "");

    ccm::ProbeOptions opt;
    opt.n_draws = n_draws.value_or(rc.probe.n_draws);
    opt.n_cycles = rc.probe.n_cycles;
    opt.omega_span = rc.probe.omega_span;
    opt.seed = rc.seed;
    const auto rep = ccm::probe(rc.converter, rc.scheme, rc.interference, rc.method, rc.i_command, opt);

    json failures = json::array();
    constexpr std::size_t kSavedTraces = 5;
    for (std::size_t k = 0; k < rep.failures.size(); ++k) {
        const auto& f = rep.failures[k];
        json waveform = json::array();
        for (const auto& c : f.draw.interference.waveform) waveform.push_back(component_json(c));
        json item{{"index", f.draw.index},
                  {"diverged", f.orbit.diverged},
                  {"period", f.orbit.period == 0 ? json(nullptr) : json(f.orbit.period)},
                  {"waveform", waveform}};
        if (k < kSavedTraces) {
            const std::string name = "probe_failure_" + std::to_string(f.draw.index) + ".csv";
            const double cmd[] = {rc.i_command};
            ccm::SimOptions so;
            so.record_deviation = false;
            ccm::SimTrace trace;
            try {
                trace = ccm::run_cycles(rc.converter, rc.scheme, f.draw.interference, rc.method, cmd,
                                        opt.n_cycles, {}, so);
            } catch (const ccm::StarvationError&) {
            }
            auto csv = out.open(name);
            csv << "n,t_on_s,i_extremum_A,i_command_A\n";
            for (const auto& s : trace.samples)
                csv << s.n << ',' << num(s.t_on) << ',' << num(s.i_extremum) << ','
                    << num(s.i_command) << '\n';
            item["trace"] = name;
        }
        failures.push_back(item);
    }
    out.write_json("probe.json", {{"method", ccm::method_name(rc.method)},
                                  {"n_draws", rep.n_draws},
                                  {"seed", rc.seed},
                                  {"diverged", rep.diverged},
                                  {"subharmonic", rep.subharmonic},
                                  {"failure_fraction", rep.failure_fraction()},
                                  {"failures", failures}});
    return kOk;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          const std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw ccm::ValidationError(path + ": cannot open");
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected;
    for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
    if (line != expected)
        throw ccm::ValidationError(path + ": expected header '" + expected + "'");
    std::vector<std::vector<double>> rows;
    for (std::size_t ln = 2; std::getline(in, line); ++ln) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(ccm::parse_quantity(cell, ccm::Dimension::dimensionless));
            } catch (const ccm::ValidationError&) {
                throw ccm::ValidationError(path + ":" + std::to_string(ln) + ": '" + cell +
                                           "' is not a number");
            }
        }
        if (row.size() != header.size())
            throw ccm::ValidationError(path + ":" + std::to_string(ln) + ": expected " +
                                       std::to_string(header.size()) + " columns");
        rows.push_back(row);
    }
    return rows;
}

int cmd_fit_comparator(const Globals& g, const std::string& input) {
    const auto rows = read_csv(input, {"v_od_mV", "t_od_ns"});
    const Output out(g.out_dir);
    std::ifstream raw(input);
    std::stringstream content;
    content << raw.rdbuf();
    write_manifest(out, g, "fit-comparator", std::nullopt, content.str());

    std::vector<std::pair<double, double>> samples;
    for (const auto& r : rows) samples.emplace_back(r[0] * 1e-3, r[1] * 1e-9);
    const auto [p1, p2] = ccm::fit_datasheet_delay(samples);
    double ss = 0.0;
    for (const auto& [v, t] : samples) ss += std::pow(p1 / v + p2 - t, 2);
    out.write_json("fit.json", {{"v_trig_tau_ns_mV", p1 * 1e12},
                                {"t_d_ns", p2 * 1e9},
                                {"points", samples.size()},
                                {"rms_residual_ns", std::sqrt(ss / samples.size()) * 1e9}});
    return kOk;
}

int cmd_spectrum(const Globals& g, const std::string& input, double fundamental_hz,
                 const ccm::SpectrumOptions& opt) {
    const auto rows = read_csv(input, {"t_s", "i_A"});
    const Output out(g.out_dir);
    std::ifstream raw(input);
    std::stringstream content;
    content << raw.rdbuf();
    write_manifest(out, g, "spectrum", std::nullopt, content.str() + "f=" + num(fundamental_hz));

    std::vector<std::pair<double, double>> wave;
    for (const auto& r : rows) wave.emplace_back(r[0], r[1]);
    const auto rep = ccm::spectrum(wave, fundamental_hz, opt);
    {
        auto f = out.open("spectrum.csv");
        f << "freq_hz,magnitude\n";
        for (std::size_t k = 0; k < rep.frequency_hz.size(); ++k)
            f << num(rep.frequency_hz[k]) << ',' << num(rep.magnitude[k]) << '\n';
    }
    json orders = json::array();
    for (const auto& o : rep.orders) orders.push_back(order_text(o));
    out.write_json("spectrum.json", {{"fundamental_hz", rep.fundamental_hz},
                                     {"subharmonic_orders", orders}});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Current-mode control conditioning: simulation and design"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--preset", g.preset, "built-in configuration")
        ->check(CLI::IsMember({"table1"}));
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomized interference and probes");
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "run the cycle simulator");
    auto* design = app.add_subcommand("design", "conditioning design pipeline");
    design->require_subcommand(1);
    auto* d_slope = design->add_subcommand("slope", "slope compensation");
    auto* d_filter = design->add_subcommand("filter", "low-pass filter");
    auto* d_over = design->add_subcommand("overdrive", "comparator overdrive delay");

    auto* compare = app.add_subcommand("compare", "settling/overshoot tradeoff of the three methods");
    std::optional<double> a_hat, omega_hat;
    compare->add_option("--a-hat", a_hat, "normalized interference amplitude");
    compare->add_option("--omega-hat", omega_hat, "normalized interference frequency");

    auto* probe = app.add_subcommand("probe", "Monte-Carlo stability probe");
    std::optional<std::size_t> n_draws;
    probe->add_option("--n-draws", n_draws, "number of interference draws");

    auto* fit = app.add_subcommand("fit-comparator", "fit a datasheet overdrive-delay curve");
    std::string fit_input;
    fit->add_option("--input", fit_input, "CSV with columns v_od_mV,t_od_ns")
        ->required()
        ->check(CLI::ExistingFile);

    auto* spec = app.add_subcommand("spectrum", "subharmonic spectrum of a dense waveform");
    std::string spec_input;
    double fundamental = 0.0;
    ccm::SpectrumOptions spec_opt;
    spec->add_option("--input", spec_input, "CSV with columns t_s,i_A")
        ->required()
        ->check(CLI::ExistingFile);
    spec->add_option("--fundamental", fundamental, "switching frequency, Hz")->required();
    spec->add_option("--max-denominator", spec_opt.max_denominator)->capture_default_str();
    spec->add_option("--floor-factor", spec_opt.floor_factor)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (*simulate) return cmd_simulate(g);
        if (*d_slope) return cmd_design_slope(g);
        if (*d_filter) return cmd_design_filter(g);
        if (*d_over) return cmd_design_overdrive(g);
        if (*compare) return cmd_compare(g, a_hat, omega_hat);
        if (*probe) return cmd_probe(g, n_draws);
        if (*fit) return cmd_fit_comparator(g, fit_input);
        if (*spec) return cmd_spectrum(g, spec_input, fundamental, spec_opt);
    } catch (const ccm::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ccm::UnstableError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ccm::StarvationError& e) {
        std::cerr << "starvation: " << e.what() << '\n';
        return kDiverged;
    } catch (const ccm::ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    }
    return kInvalid;
}
