#include "nrloop/isolator.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "nelder_mead.hpp"
#include "nrloop/error.hpp"

namespace nrloop {
namespace {

constexpr double kPi = std::numbers::pi;

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
}

void require_efficiency(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
}

void validate(const IsolatorSpec& s) {
    require_positive(s.c3, "C3");
    require_positive(s.c4, "C4");
    require_efficiency(s.eta1, "eta1");
    require_efficiency(s.eta2, "eta2");
    require_positive(s.gamma3, "gamma3");
    require_positive(s.gamma4, "gamma4");
}

double detuning_radicand(double c3, double c4, double phase) {
    return 2.0 * c3 * c4 * (1.0 - std::cos(phase)) - 1.0;
}

double safe_delta_t(const FourModeModel& model) {
    try {
        return transmission_difference(model);
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

ModeNetwork build_four_mode_network(const FourModeModel& m) {
    for (double c : m.cooperativity) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("cooperativities must be non-negative");
    }
    std::vector<Mode> modes;
    modes.reserve(4);
    for (int j = 0; j < 2; ++j) {
        Mode a;
        a.id = std::string(kFourModeIds[static_cast<std::size_t>(j)]);
        a.oscillator = "cavity" + std::to_string(j + 1);
        a.resonance_freq = m.cavity_freq[j];
        a.linewidth = m.kappa[j];
        a.coupling_efficiency = m.eta[j];
        a.signal_freq = m.cavity_freq[j];
        a.bath_occupation = m.cavity_occupation[j];
        modes.push_back(a);
    }
    for (int k = 0; k < 2; ++k) {
        Mode b;
        b.id = std::string(kFourModeIds[static_cast<std::size_t>(k + 2)]);
        b.oscillator = "mech" + std::to_string(k + 1);
        b.resonance_freq = m.mech_freq[k];
        b.linewidth = m.gamma[k];
        b.coupling_efficiency = 1.0;
        b.signal_freq = m.mech_freq[k] + m.delta[k] * m.gamma[k];
        b.bath_occupation = m.mech_occupation[k];
        modes.push_back(b);
    }
    auto beta = [&](int j, int k) { return 0.5 * std::sqrt(m.cooperativity[static_cast<std::size_t>(2 * j + k)]); };
    std::vector<Coupling> couplings{
        {"a1", "b1", beta(0, 0), 0.0, "d11", false},
        {"a1", "b2", beta(0, 1), 0.0, "d12", true},
        {"a2", "b1", beta(1, 0), 0.0, "d21", false},
        {"a2", "b2", beta(1, 1), 0.0, "d22", false},
    };
    return ModeNetwork(std::move(modes), std::move(couplings), m.loop_phase);
}

FourModeModel to_model(const IsolatorSpec& s) {
    validate(s);
    FourModeModel m;
    m.cooperativity = {s.c3, s.c4, s.c3, s.c4};
    m.eta = {s.eta1, s.eta2};
    m.kappa = {s.kappa1, s.kappa2};
    m.gamma = {s.gamma3, s.gamma4};
    m.delta = {s.delta3, s.delta4};
    m.loop_phase = s.loop_phase;
    return m;
}

std::array<DetuningPair, 2> optimal_detuning(double c3, double c4, double phase) {
    const double r = detuning_radicand(c3, c4, phase);
    if (!(r >= 0.0)) throw DomainError("no impedance-matched detuning at this phase/cooperativity");
    const double half = 0.5 * std::sqrt(r);
    return {DetuningPair{-half, half}, DetuningPair{half, -half}};
}

std::array<double, 2> optimal_loop_phase(double c3, double c4) {
    if (!(c3 > 0.0 && c4 > 0.0)) throw DomainError("optimal loop phase needs positive cooperativities");
    const double arg = 1.0 - 1.0 / std::sqrt(c3 * c4);
    if (arg < -1.0 || arg > 1.0) throw DomainError("optimal loop phase undefined: 1 - 1/sqrt(C3*C4) outside [-1, 1]");
    const double phi = std::acos(arg);
    return {phi, -phi};
}

double transmission_difference_closed_form(double c3, double c4, double eta1, double eta2, double phase) {
    const double r = detuning_radicand(c3, c4, phase);
    if (!(r >= 0.0)) throw DomainError("closed-form transmission difference undefined: negative detuning radicand");
    const double oc = 1.0 - std::cos(phase);
    const double den = 2.0 + oc * (c3 * c3 + c4 * c4 + 2.0 * c3 + 2.0 * c4 - 2.0 * c3 * c4 * std::cos(phase));
    return 4.0 * eta1 * eta2 * std::sin(phase) * std::sqrt(r) / den;
}

double optimal_transmission_difference(double c3, double c4, double eta1, double eta2, double phase) {
    if (detuning_radicand(c3, c4, phase) >= 0.0) {
        return transmission_difference_closed_form(c3, c4, eta1, eta2, phase);
    }
    IsolatorSpec spec;
    spec.c3 = c3;
    spec.c4 = c4;
    spec.eta1 = eta1;
    spec.eta2 = eta2;
    spec.gamma3 = 1.0;
    spec.gamma4 = 1.0;
    return optimize_detunings(to_model(spec), phase).delta_t;
}

double transmission_difference(const FourModeModel& model, double probe_offset) {
    const ComplexMatrix s = scattering(build_four_mode_network(model), probe_offset);
    return std::norm(s(1, 0)) - std::norm(s(0, 1));
}

double transmission_difference(const IsolatorSpec& spec, double probe_offset) {
    return transmission_difference(to_model(spec), probe_offset);
}

double nonreciprocal_bandwidth(double gamma3, double gamma4) {
    require_positive(gamma3, "gamma3");
    require_positive(gamma4, "gamma4");
    return 4.0 * gamma3 * gamma4 / (gamma3 + gamma4);
}

double reciprocal_bandwidth(double gamma, double cooperativity) {
    require_positive(gamma, "linewidth");
    if (!(cooperativity >= 0.0)) throw InvalidArgument("cooperativity must be non-negative");
    return gamma * (1.0 + 2.0 * cooperativity);
}

double cooperativity_from_reciprocal_bandwidth(double damped_width, double gamma) {
    require_positive(gamma, "linewidth");
    require_positive(damped_width, "damped linewidth");
    return 0.5 * (damped_width / gamma - 1.0);
}

std::vector<double> delta_T_profile(const IsolatorSpec& spec, std::span<const double> offsets) {
    validate(spec);
    const double g = nonreciprocal_bandwidth(spec.gamma3, spec.gamma4);
    std::vector<double> out;
    out.reserve(offsets.size());
    for (double w : offsets) out.push_back(spec.eta1 * spec.eta2 * g * g / (g * g + 4.0 * w * w));
    return out;
}

std::vector<double> delta_T_numeric_profile(const FourModeModel& model, std::span<const double> offsets) {
    const ModeNetwork net = build_four_mode_network(model);
    std::vector<double> out;
    out.reserve(offsets.size());
    for (double w : offsets) {
        const ComplexMatrix s = scattering(net, w);
        out.push_back(std::norm(s(1, 0)) - std::norm(s(0, 1)));
    }
    return out;
}

double numerical_bandwidth(const FourModeModel& model) {
    const ModeNetwork net = build_four_mode_network(model);
    auto dt = [&](double w) {
        const ComplexMatrix s = scattering(net, w);
        return std::norm(s(1, 0)) - std::norm(s(0, 1));
    };
    const double scale = nonreciprocal_bandwidth(model.gamma[0], model.gamma[1]);

    // Orient so the peak is positive regardless of isolation direction.
    const double sign = dt(0.0) >= 0.0 ? 1.0 : -1.0;
    auto f = [&](double w) { return sign * dt(w); };

    auto peak = boost::math::tools::brent_find_minima([&](double w) { return -f(w); }, -scale, scale, 40);
    const double w0 = peak.first;
    const double half = -peak.second / 2.0;
    if (!(half > 0.0)) throw DomainError("transmission difference has no nonreciprocal peak");

    auto crossing = [&](double direction) {
        double inner = w0;
        double step = scale / 8.0;
        double outer = w0 + direction * step;
        int guard = 0;
        while (f(outer) >= half) {
            inner = outer;
            step *= 2.0;
            outer = w0 + direction * step;
            if (++guard > 80) throw NumericalError("half-maximum crossing not bracketed");
        }
        boost::uintmax_t iters = 200;
        auto root = boost::math::tools::toms748_solve([&](double w) { return f(w) - half; },
                                                      std::min(inner, outer), std::max(inner, outer),
                                                      boost::math::tools::eps_tolerance<double>(50), iters);
        return 0.5 * (root.first + root.second);
    };
    return crossing(1.0) - crossing(-1.0);
}

namespace {

struct SearchOutcome {
    DesignPoint point;
    int evaluations = 0;
};

SearchOutcome search_design(const IsolatorSpec& spec, double sign, const OptimizerOptions& options) {
    FourModeModel base = to_model(spec);
    auto objective_at = [&](double phase, double d3, double d4) {
        FourModeModel m = base;
        m.loop_phase = phase;
        m.delta = {d3, d4};
        const double v = safe_delta_t(m);
        return std::isfinite(v) ? -sign * v : std::numeric_limits<double>::infinity();
    };

    // Coarse phase scan; seeds carry the closed-form detuning when it exists.
    double best_phase = sign * kPi / 2.0, best_d3 = 0.0, best_d4 = 0.0;
    double best_value = std::numeric_limits<double>::infinity();
    int evals = 0;
    auto consider = [&](double phase, double d3, double d4) {
        ++evals;
        const double v = objective_at(phase, d3, d4);
        if (v < best_value) {
            best_value = v;
            best_phase = phase;
            best_d3 = d3;
            best_d4 = d4;
        }
    };
    const int grid = std::max(options.phase_grid, 4);
    for (int i = 1; i < grid; ++i) {
        const double phase = sign * kPi * i / grid;
        consider(phase, 0.0, 0.0);
        if (detuning_radicand(spec.c3, spec.c4, phase) >= 0.0) {
            const auto d = optimal_detuning(spec.c3, spec.c4, phase)[0];
            consider(phase, d.delta3, d.delta4);
        }
    }
    if (spec.c3 * spec.c4 >= 0.25) {
        const double phase = sign * optimal_loop_phase(spec.c3, spec.c4)[0];
        if (detuning_radicand(spec.c3, spec.c4, phase) >= 0.0) {
            const auto d = optimal_detuning(spec.c3, spec.c4, phase)[0];
            consider(phase, d.delta3, d.delta4);
        }
    }

    // Scaled coordinates keep the simplex well shaped when φ_opt ≪ 1 ≪ δ_opt.
    const double s_phase = std::max(std::abs(best_phase), 1e-8);
    const double s_delta = std::max({std::abs(best_d3), std::abs(best_d4), 1.0});
    auto f = [&](const std::vector<double>& u) { return objective_at(u[0] * s_phase, u[1] * s_delta, u[2] * s_delta); };

    detail::SimplexOptions so;
    so.max_evaluations = options.max_evaluations;
    so.f_tolerance = options.tolerance;
    so.x_tolerance = 1e-10;
    const auto r = detail::nelder_mead(f, {best_phase / s_phase, best_d3 / s_delta, best_d4 / s_delta},
                                       {0.05, 0.05, 0.05}, so);
    evals += r.evaluations;

    const double phase = r.x[0] * s_phase, d3 = r.x[1] * s_delta, d4 = r.x[2] * s_delta;
    if (!r.converged) {
        throw ConvergenceError("isolator design optimizer did not converge within " +
                                   std::to_string(options.max_evaluations) + " evaluations",
                               {phase, d3, d4}, -sign * r.value);
    }
    SearchOutcome out;
    out.point.phase_opt = std::remainder(phase, 2.0 * kPi);
    out.point.delta3 = d3;
    out.point.delta4 = d4;
    out.point.delta_t = -sign * r.value;
    out.point.bandwidth = nonreciprocal_bandwidth(spec.gamma3, spec.gamma4);
    out.evaluations = evals;
    return out;
}

}  // namespace

DesignResult optimize_design(const IsolatorSpec& spec, const OptimizerOptions& options) {
    validate(spec);
    DesignResult result;
    if (spec.eta1 * spec.eta2 == 0.0) {
        // No input coupling: ΔT vanishes identically.
        DesignPoint p;
        p.phase_opt = spec.c3 * spec.c4 >= 0.25 ? optimal_loop_phase(spec.c3, spec.c4)[0] : kPi / 2.0;
        if (detuning_radicand(spec.c3, spec.c4, p.phase_opt) >= 0.0) {
            const auto d = optimal_detuning(spec.c3, spec.c4, p.phase_opt)[0];
            p.delta3 = d.delta3;
            p.delta4 = d.delta4;
        }
        p.delta_t = 0.0;
        p.bandwidth = nonreciprocal_bandwidth(spec.gamma3, spec.gamma4);
        result.forward = p;
        result.reverse = p;
        result.reverse.phase_opt = -p.phase_opt;
        return result;
    }
    const auto fwd = search_design(spec, +1.0, options);
    const auto rev = search_design(spec, -1.0, options);
    result.forward = fwd.point;
    result.reverse = rev.point;
    result.evaluations = fwd.evaluations + rev.evaluations;
    return result;
}

DetuningOptimum optimize_detunings(const FourModeModel& model, double phase, const OptimizerOptions& options) {
    const double sign = std::sin(phase) >= 0.0 ? 1.0 : -1.0;
    FourModeModel base = model;
    base.loop_phase = phase;
    auto objective = [&](double d1, double d2) {
        FourModeModel m = base;
        m.delta = {d1, d2};
        const double v = safe_delta_t(m);
        return std::isfinite(v) ? -sign * v : std::numeric_limits<double>::infinity();
    };

    const double c3 = std::sqrt(model.cooperativity[0] * model.cooperativity[2]);
    const double c4 = std::sqrt(model.cooperativity[1] * model.cooperativity[3]);
    const double reach = std::max(2.0, std::sqrt(std::max(0.0, detuning_radicand(c3, c4, phase)) + 1.0));

    double best = std::numeric_limits<double>::infinity(), b1 = 0.0, b2 = 0.0;
    int evals = 0;
    auto consider = [&](double d1, double d2) {
        ++evals;
        const double v = objective(d1, d2);
        if (v < best) {
            best = v;
            b1 = d1;
            b2 = d2;
        }
    };
    constexpr int n = 25;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            consider(reach * (2.0 * i / (n - 1) - 1.0), reach * (2.0 * k / (n - 1) - 1.0));
        }
    }
    if (detuning_radicand(c3, c4, phase) >= 0.0) {
        for (const auto& d : optimal_detuning(c3, c4, phase)) consider(d.delta3, d.delta4);
    }

    const double scale = std::max({std::abs(b1), std::abs(b2), 1.0});
    detail::SimplexOptions so;
    so.max_evaluations = options.max_evaluations;
    so.f_tolerance = options.tolerance;
    so.x_tolerance = 1e-10;
    const auto r = detail::nelder_mead([&](const std::vector<double>& u) { return objective(u[0] * scale, u[1] * scale); },
                                       {b1 / scale, b2 / scale}, {0.05, 0.05}, so);
    if (!r.converged) {
        throw ConvergenceError("detuning optimizer did not converge", {r.x[0] * scale, r.x[1] * scale},
                               -sign * r.value);
    }
    return {r.x[0] * scale, r.x[1] * scale, -sign * r.value};
}

IsolationFigures isolation_figures(const ModeNetwork& network, double probe_offset, std::string_view from,
                                   std::string_view to) {
    const auto i = static_cast<Eigen::Index>(network.index_of(from));
    const auto o = static_cast<Eigen::Index>(network.index_of(to));
    const ComplexMatrix s = scattering(network, probe_offset);
    IsolationFigures fig;
    fig.forward = std::norm(s(o, i));
    fig.backward = std::norm(s(i, o));
    fig.insertion_loss_db = -10.0 * std::log10(fig.forward);
    fig.isolation_db = -10.0 * std::log10(fig.backward);
    return fig;
}

}  // namespace nrloop
