#include "nrloop/cli/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "nrloop/cli/config.hpp"
#include "nrloop/cli/table.hpp"
#include "nrloop/diagnostics.hpp"
#include "nrloop/error.hpp"
#include "nrloop/expansion.hpp"
#include "nrloop/fit.hpp"
#include "nrloop/isolator.hpp"
#include "nrloop/noise.hpp"

namespace nrloop::cli {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Context {
    unsigned threads = 1;
    std::uint64_t seed = 1;
    std::ostream* summary = nullptr;
    int precision = 12;
};

std::string fmt(double v, int precision = 6) { return format_number(v, precision); }

double db(double power) { return 10.0 * std::log10(power); }

std::vector<PortPair> default_pairs() { return {{"a2", "a1"}, {"a1", "a2"}, {"a1", "a1"}, {"a2", "a2"}}; }

std::vector<double> phases_or_model(const RunConfig& config, const ModeNetwork& net) {
    return config.sweep.phases ? *config.sweep.phases : std::vector<double>{net.loop_phase()};
}

std::vector<Table> scattering_table(const RunConfig& config, const Context& ctx, const std::vector<double>& phases) {
    const ModeNetwork net = build_network(config);
    const std::vector<PortPair> pairs = config.sweep.pairs.empty() ? default_pairs() : config.sweep.pairs;
    SweepOptions opts;
    opts.threads = ctx.threads;
    opts.limits = config.limits;
    const SweepResult r = sweep_scattering(net, config.sweep.offsets, phases, pairs, opts);

    Table t{"scattering", {"offset_hz", "phase_deg", "port_out", "port_in", "value", "value_db", "failed"}, {}};
    for (std::size_t ip = 0; ip < r.phases.size(); ++ip) {
        for (std::size_t io = 0; io < r.offsets.size(); ++io) {
            const long long failed = r.point_failed(ip, io) ? 1 : 0;
            for (std::size_t k = 0; k < r.pairs.size(); ++k) {
                const double v = r.at(ip, io, k);
                t.add({r.offsets[io], r.phases[ip] / kDeg, r.pairs[k].out, r.pairs[k].in, v, db(v), failed});
            }
        }
    }
    if (r.failure_count() > 0) {
        *ctx.summary << "warning: " << r.failure_count() << " grid point(s) could not be solved and hold NaN\n";
    }
    return {t};
}

std::vector<Table> cmd_spectrum(const RunConfig& config, const Context& ctx) {
    const ModeNetwork net = build_network(config);
    return scattering_table(config, ctx, phases_or_model(config, net));
}

std::vector<Table> cmd_sweep(const RunConfig& config, const Context& ctx) {
    if (!config.sweep.phases) throw ConfigError("sweep: 'phases_deg' is required for the sweep command");
    return scattering_table(config, ctx, *config.sweep.phases);
}

std::vector<Table> cmd_design(const RunConfig& config, const Context& ctx) {
    if (!config.design) throw ConfigError("the design command needs a design section");
    const IsolatorSpec& spec = *config.design;
    const DesignResult r = optimize_design(spec);

    double cf_phase = std::nan(""), cf_dt = std::nan(""), cf_d3 = std::nan(""), cf_d4 = std::nan("");
    try {
        cf_phase = optimal_loop_phase(spec.c3, spec.c4)[0];
        const DetuningPair d = optimal_detuning(spec.c3, spec.c4, cf_phase)[0];
        cf_d3 = d.delta3;
        cf_d4 = d.delta4;
        cf_dt = transmission_difference_closed_form(spec.c3, spec.c4, spec.eta1, spec.eta2, cf_phase);
    } catch (const DomainError&) {
        *ctx.summary << "note: closed-form optimum does not exist for C3*C4 < 1/4\n";
    }
    const double bw = nonreciprocal_bandwidth(spec.gamma3, spec.gamma4);

    Table t{"design",
            {"direction", "method", "phase_deg", "delta3", "delta4", "delta_t", "bandwidth_hz"},
            {}};
    t.add({std::string("forward"), std::string("numeric"), r.forward.phase_opt / kDeg, r.forward.delta3,
           r.forward.delta4, r.forward.delta_t, r.forward.bandwidth});
    t.add({std::string("reverse"), std::string("numeric"), r.reverse.phase_opt / kDeg, r.reverse.delta3,
           r.reverse.delta4, r.reverse.delta_t, r.reverse.bandwidth});
    t.add({std::string("forward"), std::string("closed_form"), cf_phase / kDeg, cf_d3, cf_d4, cf_dt, bw});
    t.add({std::string("reverse"), std::string("closed_form"), -cf_phase / kDeg, cf_d3, cf_d4, -cf_dt, bw});

    *ctx.summary << "phi_opt = " << fmt(r.forward.phase_opt / kDeg) << " deg (closed form " << fmt(cf_phase / kDeg)
                 << "), delta = (" << fmt(r.forward.delta3) << ", " << fmt(r.forward.delta4)
                 << "), dT = " << fmt(r.forward.delta_t) << ", Gamma_NR = " << fmt(bw) << " Hz\n";
    return {t};
}

std::vector<Table> cmd_noise(const RunConfig& config, const Context& ctx) {
    const ModeNetwork net = build_network(config);
    const std::vector<double> phases = phases_or_model(config, net);
    const NoiseMap map = noise_map(net, config.noise.chain, config.noise.ports, config.sweep.offsets, phases,
                                   ctx.threads, config.limits);

    Table t{"noise", {"offset_hz", "phase_deg", "port", "quanta", "chain_quanta", "power_w_per_hz", "failed"}, {}};
    for (std::size_t ip = 0; ip < map.phases.size(); ++ip) {
        for (std::size_t io = 0; io < map.offsets.size(); ++io) {
            const long long failed = map.point_failed(ip, io) ? 1 : 0;
            for (std::size_t p = 0; p < map.ports.size(); ++p) {
                const std::size_t at = map.index(ip, io, p);
                const double q = map.quanta[at];
                const double chain = 1.0 + config.noise.chain.at(map.ports[p]).added_noise + q;
                t.add({map.offsets[io], map.phases[ip] / kDeg, map.ports[p], q, chain, map.power[at], failed});
            }
        }
    }
    std::vector<Table> tables{t};
    if (!config.noise.occupancy_modes.empty()) {
        Table occ{"occupancy", {"phase_deg", "mode", "occupancy"}, {}};
        for (double phi : phases) {
            const ModeNetwork at_phase = net.with_loop_phase(phi);
            for (const std::string& mode : config.noise.occupancy_modes) {
                const double n = mechanical_occupancy(at_phase, mode);
                occ.add({phi / kDeg, mode, n});
                *ctx.summary << "occupancy of " << mode << " at " << fmt(phi / kDeg) << " deg: " << fmt(n) << "\n";
            }
        }
        tables.push_back(std::move(occ));
    }
    return tables;
}

void add_effective_rows(Table& t, const std::string& prefix, const EffectiveParameters& p) {
    const char* pairs[] = {"C11", "C12", "C21", "C22"};
    for (std::size_t k = 0; k < 2; ++k) t.add({prefix + "gamma_eff_hz", static_cast<long long>(k + 1), p.gamma_eff[k]});
    for (std::size_t j = 0; j < 2; ++j) t.add({prefix + "kappa_eff_hz", static_cast<long long>(j + 1), p.kappa_eff[j]});
    for (std::size_t i = 0; i < 4; ++i) t.add({prefix + "cooperativity_" + pairs[i], static_cast<long long>(i + 1), p.cooperativity[i]});
    for (std::size_t k = 0; k < 2; ++k) t.add({prefix + "n_eff", static_cast<long long>(k + 1), p.n_eff[k]});
    for (std::size_t k = 0; k < 2; ++k) t.add({prefix + "delta_eff", static_cast<long long>(k + 1), p.delta_eff[k]});
    t.add({prefix + "loop_phase_deg", 0LL, p.loop_phase / kDeg});
}

std::vector<Table> cmd_reduce(const RunConfig& config, const Context& ctx) {
    if (config.model != ModelKind::expanded) throw ConfigError("the reduce command needs model 'expanded'");
    const ModeNetwork net = build_network(config);
    const EffectiveParameters eff = effective_parameters(net);

    *ctx.summary << net.size() << " modes, " << net.couplings().size() << " couplings (depth "
                 << config.expansion.depth << ")\n";
    *ctx.summary << "Gamma_eff = (" << fmt(eff.gamma_eff[0]) << ", " << fmt(eff.gamma_eff[1]) << ") Hz, C_eff = ("
                 << fmt(eff.cooperativity[0]) << ", " << fmt(eff.cooperativity[1]) << ", "
                 << fmt(eff.cooperativity[2]) << ", " << fmt(eff.cooperativity[3]) << "), n_eff = ("
                 << fmt(eff.n_eff[0]) << ", " << fmt(eff.n_eff[1]) << ")\n";

    Table t{"effective", {"quantity", "index", "value"}, {}};
    add_effective_rows(t, "", eff);
    const std::array<double, 4> intrinsic = drive_cooperativities(*config.device, *config.drives);
    for (std::size_t i = 0; i < 4; ++i) t.add({std::string("drive_cooperativity"), static_cast<long long>(i + 1), intrinsic[i]});
    for (std::size_t i = 0; i < eff.reduction.eliminated.size(); ++i) {
        t.add({"max_correction:" + eff.reduction.eliminated[i], static_cast<long long>(i + 1),
               eff.reduction.max_correction[i]});
    }
    if (config.expansion.depth > 1) {
        RunConfig shallow = config;
        shallow.expansion.depth = 1;
        const EffectiveParameters base = effective_parameters(build_network(shallow));
        for (std::size_t k = 0; k < 2; ++k) {
            const double change = eff.gamma_eff[k] - base.gamma_eff[k];
            t.add({std::string("gamma_eff_change_vs_depth1_hz"), static_cast<long long>(k + 1), change});
            *ctx.summary << "Gamma_eff," << k + 1 << " changes by " << fmt(change) << " Hz relative to depth 1\n";
        }
    }

    Table modes{"modes", {"id", "oscillator", "signal_freq_hz", "resonance_freq_hz", "linewidth_hz", "eta"}, {}};
    for (const Mode& m : net.modes()) {
        modes.add({m.id, m.oscillator, m.signal_freq, m.resonance_freq, m.linewidth, m.coupling_efficiency});
    }
    Table edges{"couplings", {"mode_a", "mode_b", "drive", "magnitude", "carries_loop_phase"}, {}};
    for (const Coupling& c : net.couplings()) {
        edges.add({c.mode_a, c.mode_b, c.drive, c.magnitude, static_cast<long long>(c.carries_loop_phase)});
    }
    return {t, modes, edges};
}

ModelParametrization fit_model(const RunConfig& config) {
    if (config.model == ModelKind::expanded) {
        if (!config.device || !config.drives) throw ConfigError("model 'expanded' needs device and drives sections");
        return ModelParametrization::expanded(*config.device, drive_couplings(config), drive_detunings(config),
                                              0.0, config.expansion);
    }
    return ModelParametrization::four_mode(resolved_effective(config));
}

// phase_offset is exchanged in degrees at the file boundary.
double to_internal(const std::string& name, double v) { return name == "phase_offset" ? v * kDeg : v; }
double to_external(const std::string& name, double v) { return name == "phase_offset" ? v / kDeg : v; }

std::vector<Table> cmd_fit(const RunConfig& config, const Context& ctx) {
    if (!config.fit) throw ConfigError("the fit command needs a fit section");
    const FitConfig& fc = *config.fit;
    if (fc.data.empty() && fc.noise_data.empty()) throw ConfigError("fit: give 'data' and/or 'noise_data'");

    ModelParametrization model = fit_model(config);
    try {
        for (const auto& [name, v] : fc.initial) model.set_value(name, to_internal(name, v));
        for (const auto& [name, b] : fc.bounds) model.set_bounds(name, to_internal(name, b[0]), to_internal(name, b[1]));
        for (const std::string& name : fc.free) model.set_free(name);
        for (const auto& [osc, n] : config.noise.bath_occupations) model.set_value("n_" + osc, n);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("fit: ") + e.what());
    }

    FitOptions opts;
    opts.restarts = fc.restarts;
    opts.seed = ctx.seed;
    opts.threads = ctx.threads;
    opts.max_iterations = fc.max_iterations;
    opts.limits = config.limits;

    std::vector<Table> tables;
    Table summary{"summary", {"quantity", "value"}, {}};
    auto add_parameters = [&](const std::string& name, const FitReport& r) {
        Table t{name, {"name", "value", "initial", "standard_error", "free"}, {}};
        for (const FittedParameter& p : r.parameters) {
            t.add({p.name, to_external(p.name, p.value), to_external(p.name, p.initial),
                   to_external(p.name, p.standard_error), static_cast<long long>(p.free)});
        }
        tables.push_back(std::move(t));
    };

    if (!fc.data.empty()) {
        if (fc.free.empty()) throw ConfigError("fit: 'free' must list at least one parameter");
        std::ifstream in(fc.data);
        if (!in) throw ConfigError("cannot open data file '" + fc.data + "'");
        const FitProblem problem{read_scattering_data(in, fc.data), model};
        const FitReport r = fit_scattering(problem, opts);
        add_parameters("parameters", r);
        summary.add({std::string("observations"), static_cast<double>(r.observations)});
        summary.add({std::string("residual_norm"), r.residual_norm});
        summary.add({std::string("initial_residual_norm"), r.initial_residual_norm});
        summary.add({std::string("iterations"), static_cast<double>(r.iterations)});
        summary.add({std::string("starts"), static_cast<double>(r.starts)});
        summary.add({std::string("converged"), r.converged ? 1.0 : 0.0});
        summary.add({std::string("rank_deficient"), r.rank_deficient ? 1.0 : 0.0});
        const char* pairs[] = {"C11", "C12", "C21", "C22"};
        for (std::size_t i = 0; i < 4; ++i) summary.add({std::string("cooperativity_") + pairs[i], r.cooperativity[i]});
        if (r.effective) {
            for (std::size_t k = 0; k < 2; ++k) {
                summary.add({"gamma_eff_hz_" + std::to_string(k + 1), r.effective->gamma_eff[k]});
                summary.add({"n_eff_" + std::to_string(k + 1), r.effective->n_eff[k]});
            }
        }
        for (std::size_t v = 0; v < r.null_space.size(); ++v) {
            const std::vector<std::size_t> free = model.free_indices();
            for (std::size_t k = 0; k < free.size(); ++k) {
                summary.add({"null_space_" + std::to_string(v + 1) + ":" + model.parameters()[free[k]].name,
                             r.null_space[v][k]});
            }
        }
        *ctx.summary << "fit converged: residual norm " << fmt(r.residual_norm) << " (initial "
                     << fmt(r.initial_residual_norm) << ") over " << r.observations << " points\n";
        if (r.rank_deficient) *ctx.summary << "warning: Jacobian is rank deficient; see null_space rows\n";
        model = r.model;
    }

    if (!fc.noise_data.empty()) {
        std::ifstream in(fc.noise_data);
        if (!in) throw ConfigError("cannot open noise data file '" + fc.noise_data + "'");
        NoiseFitProblem np;
        np.observations = read_noise_data(in, fc.noise_data);
        np.oscillators = fc.noise_oscillators;
        np.chain = config.noise.chain;
        np.fit_added_noise = fc.fit_added_noise;
        const FitReport r = fit_noise(np, model, opts);
        add_parameters("noise_parameters", r);
        summary.add({std::string("noise_observations"), static_cast<double>(r.observations)});
        summary.add({std::string("noise_residual_norm"), r.residual_norm});
        for (const FittedParameter& p : r.parameters) {
            *ctx.summary << p.name << " = " << fmt(p.value) << " +/- " << fmt(p.standard_error) << "\n";
        }
    }
    tables.push_back(std::move(summary));
    return tables;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"nrloop: coupled-mode isolator modeling"};
    app.require_subcommand(1);
    std::string config_path, out_path, format;
    unsigned threads = 1;
    std::uint64_t seed = 1;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out_path, "output file (default: output.path or stdout)");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads, "worker threads for grid evaluation")->check(CLI::Range(1u, 1024u));
    app.add_option("--seed", seed, "seed for fit restarts");
    app.fallthrough();

    using Command = std::vector<Table> (*)(const RunConfig&, const Context&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"spectrum", "|S|^2 versus probe offset at the model loop phase", cmd_spectrum},
        {"sweep", "|S|^2 over an offset x phase grid", cmd_sweep},
        {"design", "optimal loop phase and detunings", cmd_design},
        {"noise", "output noise maps and mechanical occupancies", cmd_noise},
        {"reduce", "effective four-mode parameters of the expanded network", cmd_reduce},
        {"fit", "least-squares fit of scattering and noise data", cmd_fit},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    std::string command;
    Command fn = nullptr;
    for (const auto& [name, help, f] : commands) {
        if (app.got_subcommand(name)) {
            command = name;
            fn = f;
        }
    }

    const WarningHandler previous =
        set_warning_handler([&err](std::string_view msg) { err << "nrloop: warning: " << msg << "\n"; });
    struct Restore {
        WarningHandler h;
        ~Restore() { set_warning_handler(std::move(h)); }
    } restore{previous};

    try {
        RunConfig config = load_config(config_path);
        if (!format.empty()) config.output.format = format;
        if (!out_path.empty()) config.output.path = out_path;

        std::ostringstream summary;
        Context ctx{threads, seed, &summary, config.output.precision};
        const std::vector<Table> tables = fn(config, ctx);

        std::ostringstream body;
        if (config.output.format == "json") {
            write_json(body, command, config.raw, tables, config.output.precision);
        } else {
            write_csv(body, command, config.raw, tables, config.output.precision);
        }
        if (config.output.path.empty()) {
            err << summary.str();
            out << body.str();
        } else {
            std::ofstream file(config.output.path, std::ios::binary);
            if (!file) throw ConfigError("cannot write output file '" + config.output.path + "'");
            file << body.str();
            if (!file) throw ConfigError("failed writing output file '" + config.output.path + "'");
            out << summary.str();
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "nrloop: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        err << "nrloop: invalid model: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "nrloop: numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace nrloop::cli
