#include "nrloop/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace nrloop::cli {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

void expect_object(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
    return v;
}

double number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return number(j.at(key), where + "." + key);
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
    return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<int>();
}

std::string string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + ": expected a string");
    return j.get<std::string>();
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != N) throw ConfigError(where + ": expected " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], where + "[" + std::to_string(i) + "]");
    return out;
}

template <std::size_t N>
void numbers_into(const json& j, const char* key, std::array<double, N>& out, const std::string& where) {
    if (j.contains(key)) out = numbers<N>(j.at(key), where + "." + key);
}

template <std::size_t N>
std::array<double, N> required_numbers(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
    return numbers<N>(j.at(key), where + "." + key);
}

std::vector<std::string> strings(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

// Either an explicit list or {"start", "stop", "count"}.
std::vector<double> grid(const json& j, const std::string& where, double unit) {
    std::vector<double> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]") * unit);
    } else {
        expect_object(j, where, {"start", "stop", "count"});
        const double a = number(j, "start", where), b = number(j, "stop", where);
        if (!j.contains("count")) throw ConfigError(where + ": missing 'count'");
        const int n = integer(j.at("count"), where + ".count");
        if (n < 1) throw ConfigError(where + ".count: must be at least 1");
        for (int i = 0; i < n; ++i) out.push_back((n == 1 ? a : a + (b - a) * i / (n - 1)) * unit);
    }
    if (out.empty()) throw ConfigError(where + ": grid is empty");
    return out;
}

DeviceModel parse_device(const json& j) {
    const std::string w = "device";
    expect_object(j, w, {"cavity_freq_hz", "kappa_hz", "eta", "mech_freq_hz", "gamma_hz", "mech_occupation",
                         "cavity_occupation", "g0_hz", "cross_coupling_scale"});
    DeviceModel d;
    d.cavity_freq = required_numbers<2>(j, "cavity_freq_hz", w);
    d.kappa = required_numbers<2>(j, "kappa_hz", w);
    d.mech_freq = required_numbers<2>(j, "mech_freq_hz", w);
    d.gamma = required_numbers<2>(j, "gamma_hz", w);
    numbers_into(j, "eta", d.eta, w);
    numbers_into(j, "mech_occupation", d.mech_occupation, w);
    numbers_into(j, "cavity_occupation", d.cavity_occupation, w);
    if (!j.contains("g0_hz") || !j.at("g0_hz").is_array() || j.at("g0_hz").size() != 2) {
        throw ConfigError(w + ".g0_hz: expected [[g11, g12], [g21, g22]]");
    }
    for (std::size_t c = 0; c < 2; ++c) d.g0[c] = numbers<2>(j.at("g0_hz")[c], w + ".g0_hz[" + std::to_string(c) + "]");
    d.cross_coupling_scale = number_or(j, "cross_coupling_scale", 1.0, w);
    return d;
}

DriveSet parse_drives(const json& j, const DeviceModel& device) {
    if (!j.is_array() || j.size() != 4) throw ConfigError("drives: expected an array of four tones");
    DriveSet out;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string w = "drives[" + std::to_string(i) + "]";
        const json& t = j[i];
        expect_object(t, w, {"cavity", "mech", "coupling_hz", "detuning_hz", "frequency_hz", "phase_deg"});
        DriveTone& d = out[i];
        if (!t.contains("cavity") || !t.contains("mech")) throw ConfigError(w + ": missing 'cavity' or 'mech'");
        d.cavity = integer(t.at("cavity"), w + ".cavity");
        d.mech = integer(t.at("mech"), w + ".mech");
        if (d.cavity < 1 || d.cavity > 2 || d.mech < 1 || d.mech > 2) throw ConfigError(w + ": indices must be 1 or 2");
        d.coupling = number(t, "coupling_hz", w);
        if (t.contains("frequency_hz") == t.contains("detuning_hz")) {
            throw ConfigError(w + ": give exactly one of 'frequency_hz' and 'detuning_hz'");
        }
        d.frequency = t.contains("frequency_hz")
                          ? number(t, "frequency_hz", w)
                          : red_sideband(device, d.cavity, d.mech) + number(t, "detuning_hz", w);
        d.phase = number_or(t, "phase_deg", 0.0, w) * kDeg;
    }
    return out;
}

FourModeModel parse_effective(const json& j, std::optional<double>& optimize_at) {
    const std::string w = "effective";
    expect_object(j, w, {"cooperativity", "eta", "kappa_hz", "gamma_hz", "delta", "loop_phase_deg",
                         "optimize_at_phase_deg", "mech_occupation", "cavity_occupation", "cavity_freq_hz",
                         "mech_freq_hz"});
    FourModeModel m;
    m.cooperativity = required_numbers<4>(j, "cooperativity", w);
    m.gamma = required_numbers<2>(j, "gamma_hz", w);
    numbers_into(j, "eta", m.eta, w);
    numbers_into(j, "kappa_hz", m.kappa, w);
    numbers_into(j, "delta", m.delta, w);
    numbers_into(j, "mech_occupation", m.mech_occupation, w);
    numbers_into(j, "cavity_occupation", m.cavity_occupation, w);
    numbers_into(j, "cavity_freq_hz", m.cavity_freq, w);
    numbers_into(j, "mech_freq_hz", m.mech_freq, w);
    if (j.contains("optimize_at_phase_deg")) {
        if (j.contains("delta")) throw ConfigError(w + ": 'delta' and 'optimize_at_phase_deg' are exclusive");
        optimize_at = number(j, "optimize_at_phase_deg", w) * kDeg;
    }
    m.loop_phase = number_or(j, "loop_phase_deg", optimize_at ? *optimize_at / kDeg : 0.0, w) * kDeg;
    return m;
}

IsolatorSpec parse_design(const json& j) {
    const std::string w = "design";
    expect_object(j, w, {"c3", "c4", "eta1", "eta2", "gamma3_hz", "gamma4_hz", "kappa1_hz", "kappa2_hz"});
    IsolatorSpec s;
    s.c3 = number(j, "c3", w);
    s.c4 = number(j, "c4", w);
    if (!(s.c3 > 0.0) || !(s.c4 > 0.0)) throw ConfigError(w + ": cooperativities must be positive");
    s.eta1 = number_or(j, "eta1", 1.0, w);
    s.eta2 = number_or(j, "eta2", 1.0, w);
    s.gamma3 = number_or(j, "gamma3_hz", 1.0, w);
    s.gamma4 = number_or(j, "gamma4_hz", 1.0, w);
    s.kappa1 = number_or(j, "kappa1_hz", s.kappa1, w);
    s.kappa2 = number_or(j, "kappa2_hz", s.kappa2, w);
    return s;
}

SweepConfig parse_sweep(const json& j) {
    const std::string w = "sweep";
    expect_object(j, w, {"offsets_hz", "phases_deg", "ports"});
    SweepConfig s;
    if (j.contains("offsets_hz")) s.offsets = grid(j.at("offsets_hz"), w + ".offsets_hz", 1.0);
    if (j.contains("phases_deg")) s.phases = grid(j.at("phases_deg"), w + ".phases_deg", kDeg);
    if (j.contains("ports")) {
        const json& p = j.at("ports");
        if (!p.is_array() || p.empty()) throw ConfigError(w + ".ports: expected a non-empty array of [out, in]");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto pair = strings(p[i], w + ".ports[" + std::to_string(i) + "]");
            if (pair.size() != 2) throw ConfigError(w + ".ports[" + std::to_string(i) + "]: expected [out, in]");
            s.pairs.push_back({pair[0], pair[1]});
        }
    }
    return s;
}

NoiseConfig parse_noise(const json& j) {
    const std::string w = "noise";
    expect_object(j, w, {"ports", "amplifier", "bath_occupations", "occupancy_modes"});
    NoiseConfig n;
    if (j.contains("ports")) n.ports = strings(j.at("ports"), w + ".ports");
    if (n.ports.empty()) throw ConfigError(w + ".ports: must not be empty");
    if (j.contains("amplifier")) {
        const json& a = j.at("amplifier");
        if (!a.is_object()) throw ConfigError(w + ".amplifier: expected an object keyed by port");
        for (const auto& [port, stage] : a.items()) {
            const std::string sw = w + ".amplifier." + port;
            expect_object(stage, sw, {"gain", "added_noise"});
            AmplifierStage s;
            s.gain = number_or(stage, "gain", 1.0, sw);
            s.added_noise = number_or(stage, "added_noise", 0.0, sw);
            n.chain.ports[port] = s;
        }
        try {
            n.chain.validate();
        } catch (const Error& e) {
            throw ConfigError(w + ".amplifier: " + e.what());
        }
    }
    if (j.contains("bath_occupations")) {
        const json& b = j.at("bath_occupations");
        if (!b.is_object()) throw ConfigError(w + ".bath_occupations: expected an object keyed by oscillator");
        for (const auto& [osc, v] : b.items()) {
            const double occ = number(v, w + ".bath_occupations." + osc);
            if (occ < 0.0) throw ConfigError(w + ".bath_occupations." + osc + ": must be non-negative");
            n.bath_occupations[osc] = occ;
        }
    }
    if (j.contains("occupancy_modes")) n.occupancy_modes = strings(j.at("occupancy_modes"), w + ".occupancy_modes");
    return n;
}

FitConfig parse_fit(const json& j) {
    const std::string w = "fit";
    expect_object(j, w, {"data", "free", "bounds", "initial", "restarts", "max_iterations", "noise_data",
                         "noise_oscillators", "fit_added_noise"});
    FitConfig f;
    if (j.contains("data")) f.data = string(j.at("data"), w + ".data");
    if (j.contains("free")) f.free = strings(j.at("free"), w + ".free");
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        if (!b.is_object()) throw ConfigError(w + ".bounds: expected an object of [lower, upper]");
        for (const auto& [name, v] : b.items()) {
            std::array<double, 2> lu{};
            const std::string bw = w + ".bounds." + name;
            if (!v.is_array() || v.size() != 2) throw ConfigError(bw + ": expected [lower, upper]");
            for (std::size_t i = 0; i < 2; ++i) {
                if (v[i].is_null()) {
                    lu[i] = (i == 0 ? -1.0 : 1.0) * std::numeric_limits<double>::infinity();
                } else {
                    lu[i] = number(v[i], bw);
                }
            }
            if (!(lu[0] <= lu[1])) throw ConfigError(bw + ": lower exceeds upper");
            f.bounds[name] = lu;
        }
    }
    if (j.contains("initial")) {
        const json& b = j.at("initial");
        if (!b.is_object()) throw ConfigError(w + ".initial: expected an object");
        for (const auto& [name, v] : b.items()) f.initial[name] = number(v, w + ".initial." + name);
    }
    if (j.contains("restarts")) f.restarts = integer(j.at("restarts"), w + ".restarts");
    if (f.restarts < 0) throw ConfigError(w + ".restarts: must be non-negative");
    if (j.contains("max_iterations")) f.max_iterations = integer(j.at("max_iterations"), w + ".max_iterations");
    if (f.max_iterations < 1) throw ConfigError(w + ".max_iterations: must be positive");
    if (j.contains("noise_data")) f.noise_data = string(j.at("noise_data"), w + ".noise_data");
    if (j.contains("noise_oscillators")) f.noise_oscillators = strings(j.at("noise_oscillators"), w + ".noise_oscillators");
    if (j.contains("fit_added_noise")) {
        if (!j.at("fit_added_noise").is_boolean()) throw ConfigError(w + ".fit_added_noise: expected a boolean");
        f.fit_added_noise = j.at("fit_added_noise").get<bool>();
    }
    return f;
}

OutputConfig parse_output(const json& j) {
    const std::string w = "output";
    expect_object(j, w, {"format", "path", "precision"});
    OutputConfig o;
    if (j.contains("format")) o.format = string(j.at("format"), w + ".format");
    if (o.format != "csv" && o.format != "json") throw ConfigError(w + ".format: expected 'csv' or 'json'");
    if (j.contains("path")) o.path = string(j.at("path"), w + ".path");
    if (j.contains("precision")) o.precision = integer(j.at("precision"), w + ".precision");
    if (o.precision < 1 || o.precision > 17) throw ConfigError(w + ".precision: must lie in [1, 17]");
    return o;
}

SolverLimits parse_solver(const json& j) {
    const std::string w = "solver";
    expect_object(j, w, {"warn_condition", "max_condition"});
    SolverLimits l;
    l.warn_condition = number_or(j, "warn_condition", l.warn_condition, w);
    l.max_condition = number_or(j, "max_condition", l.max_condition, w);
    if (!(l.warn_condition > 1.0) || !(l.max_condition >= l.warn_condition)) {
        throw ConfigError(w + ": need 1 < warn_condition <= max_condition");
    }
    return l;
}

}  // namespace

RunConfig parse_config(const json& j) {
    expect_object(j, "config", {"model", "device", "drives", "expansion", "effective", "design", "sweep", "noise",
                                "fit", "output", "solver"});
    RunConfig c;
    c.raw = j;
    if (j.contains("model")) {
        const std::string m = string(j.at("model"), "model");
        if (m == "expanded") {
            c.model = ModelKind::expanded;
        } else if (m == "four_mode") {
            c.model = ModelKind::four_mode;
        } else {
            throw ConfigError("model: expected 'expanded' or 'four_mode'");
        }
    }
    if (j.contains("device")) c.device = parse_device(j.at("device"));
    if (j.contains("drives")) {
        if (!c.device) throw ConfigError("drives: a device section is required");
        c.drives = parse_drives(j.at("drives"), *c.device);
    }
    if (j.contains("expansion")) {
        const json& e = j.at("expansion");
        expect_object(e, "expansion", {"depth", "merge_tolerance_hz"});
        if (e.contains("depth")) c.expansion.depth = integer(e.at("depth"), "expansion.depth");
        if (c.expansion.depth < 1) throw ConfigError("expansion.depth: must be at least 1");
        c.expansion.merge_tolerance = number_or(e, "merge_tolerance_hz", c.expansion.merge_tolerance, "expansion");
        if (!(c.expansion.merge_tolerance > 0.0)) throw ConfigError("expansion.merge_tolerance_hz: must be positive");
    }
    if (j.contains("effective")) c.effective = parse_effective(j.at("effective"), c.optimize_at_phase);
    if (j.contains("design")) c.design = parse_design(j.at("design"));
    if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));
    if (j.contains("noise")) c.noise = parse_noise(j.at("noise"));
    if (j.contains("fit")) c.fit = parse_fit(j.at("fit"));
    if (j.contains("output")) c.output = parse_output(j.at("output"));
    if (j.contains("solver")) c.limits = parse_solver(j.at("solver"));
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

FourModeModel resolved_effective(const RunConfig& config) {
    if (!config.effective) throw ConfigError("model 'four_mode' needs an effective section");
    FourModeModel m = *config.effective;
    if (config.optimize_at_phase) {
        const DetuningOptimum opt = optimize_detunings(m, *config.optimize_at_phase);
        m.delta = {opt.delta1, opt.delta2};
    }
    return m;
}

ModeNetwork build_network(const RunConfig& config) {
    std::optional<ModeNetwork> net;
    if (config.model == ModelKind::expanded) {
        if (!config.device) throw ConfigError("model 'expanded' needs a device section");
        if (!config.drives) throw ConfigError("model 'expanded' needs a drives section");
        net.emplace(build_expanded_network(*config.device, *config.drives, config.expansion));
    } else {
        net.emplace(build_four_mode_network(resolved_effective(config)));
    }
    if (config.noise.bath_occupations.empty()) return *net;

    std::vector<Mode> modes = net->modes();
    for (const auto& [osc, occ] : config.noise.bath_occupations) {
        bool found = false;
        for (Mode& m : modes) {
            if (m.oscillator == osc) {
                m.bath_occupation = occ;
                found = true;
            }
        }
        if (!found) throw ConfigError("noise.bath_occupations: unknown oscillator '" + osc + "'");
    }
    return ModeNetwork(std::move(modes), net->couplings(), net->loop_phase());
}

std::array<double, 4> drive_couplings(const RunConfig& config) {
    if (!config.drives) throw ConfigError("a drives section is required");
    std::array<double, 4> out{};
    for (const DriveTone& t : *config.drives) out[static_cast<std::size_t>(2 * (t.cavity - 1) + t.mech - 1)] = t.coupling;
    return out;
}

std::array<double, 4> drive_detunings(const RunConfig& config) {
    if (!config.drives || !config.device) throw ConfigError("device and drives sections are required");
    std::array<double, 4> out{};
    for (const DriveTone& t : *config.drives) {
        out[static_cast<std::size_t>(2 * (t.cavity - 1) + t.mech - 1)] =
            t.frequency - red_sideband(*config.device, t.cavity, t.mech);
    }
    return out;
}

}  // namespace nrloop::cli
