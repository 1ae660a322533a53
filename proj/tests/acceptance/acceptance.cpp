// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// figure, its tolerance and the wall time against the limit. Exit status is
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nrloop/expansion.hpp"
#include "nrloop/fit.hpp"
#include "nrloop/isolator.hpp"
#include "nrloop/noise.hpp"
#include "random_networks.hpp"

using namespace nrloop;
namespace t = nrloop::testing;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double rel(double value, double expected) { return std::abs(value - expected) / std::abs(expected); }

IsolatorSpec symmetric(double c, double eta1, double eta2) {
    IsolatorSpec s;
    s.c3 = s.c4 = c;
    s.eta1 = eta1;
    s.eta2 = eta2;
    s.gamma3 = 1.6e3;
    s.gamma4 = 7.5e3;
    return s;
}

IsolatorSpec with_design(IsolatorSpec s, const DesignPoint& p) {
    s.loop_phase = p.phase_opt;
    s.delta3 = p.delta3;
    s.delta4 = p.delta4;
    return s;
}

// 1. Ideal-isolator limit.
Outcome ideal_limit() {
    const IsolatorSpec spec = symmetric(1e4, 1.0, 1.0);
    const DesignResult d = optimize_design(spec);
    const ComplexMatrix s = scattering(build_four_mode_network(to_model(with_design(spec, d.forward))), 0.0);
    // Rows are outputs a1, a2, b1, b2; columns are inputs.
    const double ideal[4][4] = {{0.0, 0.0, 0.5, 0.5}, {1.0, 0.0, 0.0, 0.0}, {0.0, 0.5, 0.25, 0.25}, {0.0, 0.5, 0.25, 0.25}};
    double worst = 0.0;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(std::norm(s(r, c)) - ideal[r][c]));
    }
    return {worst <= 0.01, fmt("max ||S|^2 - ideal| = %.2e (tol 1e-2) at phi = %.3f deg", worst, d.forward.phase_opt / kDeg)};
}

// 2. Numerical maximization against the closed forms.
Outcome closed_form_agreement() {
    const double c = 100.0;
    const IsolatorSpec spec = symmetric(c, 0.99, 0.98);
    const DesignResult d = optimize_design(spec);
    const double phi = std::acos(1.0 - 1.0 / std::sqrt(c * c));
    const double dt = 0.99 * 0.98 * (1.0 - 1.0 / (2.0 * c));
    const double e_phi = rel(d.forward.phase_opt, phi);
    const double e_dt = rel(d.forward.delta_t, dt);
    return {e_phi <= 0.02 && e_dt <= 0.02,
            fmt("phi rel err %.2e, dT rel err %.2e (tol 2e-2); dT = %.5f", e_phi, e_dt, d.forward.delta_t)};
}

// 3. Bandwidth law.
Outcome bandwidth_law() {
    const IsolatorSpec spec = symmetric(100.0, 0.99, 0.98);
    const DesignResult d = optimize_design(spec);
    const double fwhm = numerical_bandwidth(to_model(with_design(spec, d.forward)));
    const double expected = 4.0 * 1.6e3 * 7.5e3 / (1.6e3 + 7.5e3);
    const double e = rel(fwhm, expected);
    return {e <= 0.05, fmt("FWHM %.1f Hz vs %.1f Hz, rel err %.2e (tol 5e-2)", fwhm, expected, e)};
}

// 4. Operating point from the effective parameters.
Outcome operating_point() {
    FourModeModel m;
    m.cooperativity = {5.4, 5.7, 2.9, 2.0};
    m.eta = {0.99, 0.98};
    m.gamma = {1.6e3, 7.5e3};
    const DetuningOptimum opt = optimize_detunings(m, 38.0 * kDeg);
    m.delta = {opt.delta1, opt.delta2};
    m.loop_phase = 38.0 * kDeg;
    const ModeNetwork plus = build_four_mode_network(m);
    const IsolationFigures fwd = isolation_figures(plus, 0.0, "a1", "a2");
    const IsolationFigures rev = isolation_figures(plus.with_loop_phase(-38.0 * kDeg), 0.0, "a2", "a1");
    const bool ok = std::abs(fwd.insertion_loss_db - 1.5) <= 0.4 && std::abs(rev.insertion_loss_db - 1.5) <= 0.4 &&
                    fwd.isolation_db >= 18.0 && rev.isolation_db >= 18.0;
    return {ok, fmt("+38 deg: IL %.2f dB, isolation %.1f dB; ", fwd.insertion_loss_db, fwd.isolation_db) +
                    fmt("-38 deg: IL %.2f dB, isolation %.1f dB (IL 1.5 +/- 0.4, isolation >= 18)",
                        rev.insertion_loss_db, rev.isolation_db)};
}

// 5. Schur reduction of random 10-mode expanded networks.
Outcome reduction_exactness() {
    t::Rng rng(5005);
    const std::vector<std::string> principal{"a1", "a2", "b1", "b2"};
    double worst = 0.0;
    int instances = 0;
    while (instances < 100) {
        const DeviceModel d = t::random_device(rng);
        const ModeNetwork net = build_expanded_network(d, t::random_drives(rng, d));
        if (net.size() != 10) continue;
        ++instances;
        std::vector<Eigen::Index> idx;
        for (const auto& id : principal) idx.push_back(static_cast<Eigen::Index>(net.index_of(id)));
        double widest = std::max(d.kappa[0], d.kappa[1]);
        for (int k = 0; k < 50; ++k) {
            const double x = widest * t::uniform(rng, -0.05, 0.05);
            const ComplexMatrix full = scattering(net, x);
            const ComplexMatrix red = reduced_scattering(net, reduce_network(net, principal, x), x);
            double scale = 0.0, diff = 0.0;
            for (Eigen::Index r = 0; r < 4; ++r) {
                for (Eigen::Index c = 0; c < 4; ++c) {
                    scale = std::max(scale, std::abs(full(idx[r], idx[c])));
                    diff = std::max(diff, std::abs(full(idx[r], idx[c]) - red(r, c)));
                }
            }
            worst = std::max(worst, diff / scale);
        }
    }
    return {worst <= 1e-10, fmt("100 networks x 50 offsets, max relative deviation %.2e (tol 1e-10)", worst)};
}

// 6. Unitarity and passivity.
Outcome unitarity_passivity() {
    t::Rng rng(6006);
    double worst_unitary = 0.0, worst_column = 0.0;
    for (int i = 0; i < 1000; ++i) {
        t::RandomNetworkOptions opt;
        opt.modes = 2 + static_cast<std::size_t>(i % 9);
        opt.unit_efficiency = true;
        const ModeNetwork lossless = t::random_network(rng, opt);
        for (double x : t::random_offsets(rng, lossless, 3)) {
            const ComplexMatrix s = scattering(lossless, x);
            const ComplexMatrix eye = ComplexMatrix::Identity(s.rows(), s.cols());
            worst_unitary = std::max(worst_unitary, t::max_abs(s.adjoint() * s - eye));
        }
        opt.unit_efficiency = false;
        const ModeNetwork lossy = t::random_network(rng, opt);
        for (double x : t::random_offsets(rng, lossy, 3)) {
            const ComplexMatrix s = scattering(lossy, x);
            for (Eigen::Index c = 0; c < s.cols(); ++c) worst_column = std::max(worst_column, s.col(c).squaredNorm());
        }
    }
    return {worst_unitary <= 1e-10 && worst_column <= 1.0 + 1e-10,
            fmt("max |S'S - 1| = %.2e (tol 1e-10); max column sum %.12f (<= 1 + 1e-10)", worst_unitary, worst_column)};
}

// 7. Transposition under φ → −φ.
Outcome transposition() {
    t::Rng rng(7007);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        t::RandomNetworkOptions opt;
        opt.modes = 3 + static_cast<std::size_t>(i % 8);
        opt.static_phases = false;
        const ModeNetwork net = t::random_network(rng, opt);
        const ModeNetwork flipped = net.with_loop_phase(-net.loop_phase());
        for (double x : t::random_offsets(rng, net, 5)) {
            worst = std::max(worst, t::max_abs(scattering(flipped, x) - scattering(net, x).transpose()));
        }
    }
    return {worst <= 1e-12, fmt("100 networks x 5 offsets, max |S(-phi) - S(phi)^T| = %.2e (tol 1e-12)", worst)};
}

// 8. Noise routing at the ideal point.
Outcome noise_routing() {
    IsolatorSpec spec = symmetric(1e4, 1.0, 1.0);
    spec.loop_phase = std::acos(1.0 - 1e-4);
    spec.delta3 = -0.5 * std::sqrt(2e8 * (1.0 - std::cos(spec.loop_phase)) - 1.0);
    spec.delta4 = -spec.delta3;
    FourModeModel m = to_model(spec);
    m.mech_occupation = {0.89, 12.0};
    const ModeNetwork net = build_four_mode_network(m);
    const std::vector<double> zero{0.0};
    const double isolated = output_noise(net, {}, "a1", zero).quanta[0];
    const double through = output_noise(net, {}, "a2", zero).quanta[0];
    return {std::abs(isolated - 6.4) <= 0.2 && through < 0.2,
            fmt("isolated port a1 %.3f quanta (6.4 +/- 0.2), transmitting port a2 %.2e quanta (< 0.2)", isolated, through)};
}

// 9. Effective occupation.
Outcome effective_occupation_check() {
    const double n = effective_occupation(15.0, 95.0, 1600.0);
    const double oracle = 15.0 * 95.0 / 1600.0;
    return {std::abs(n - 0.89) < 0.005 && rel(n, oracle) <= 1e-15,
            fmt("n_eff = %.6f (0.89 to two digits; arithmetic oracle %.6f)", n, oracle)};
}

// 10. Fit recovery on a 41 x 37 synthetic map.
Outcome fit_recovery() {
    FourModeModel truth;
    truth.cooperativity = {5.4, 5.7, 2.9, 2.0};
    truth.eta = {0.99, 0.98};
    truth.gamma = {1.6e3, 7.5e3};
    truth.mech_occupation = {0.89, 12.0};
    const DetuningOptimum opt = optimize_detunings(truth, 38.0 * kDeg);
    truth.delta = {opt.delta1, opt.delta2};
    const ModeNetwork net = build_four_mode_network(truth);

    AmplifierChain chain;
    chain.ports["a1"] = {1e7, 30.0};
    chain.ports["a2"] = {1e7, 22.0};

    std::mt19937_64 rng(1010);
    std::normal_distribution<double> normal;
    const std::vector<std::pair<std::string, std::string>> pairs{{"a2", "a1"}, {"a1", "a2"}, {"a1", "a1"}, {"a2", "a2"}};
    std::vector<Observation> obs;
    std::vector<NoiseObservation> noise_obs;
    for (int ip = 0; ip < 37; ++ip) {
        const double phi = (-180.0 + 10.0 * ip) * kDeg;
        const ModeNetwork at = net.with_loop_phase(phi);
        for (int io = 0; io < 41; ++io) {
            const double x = -15e3 + 750.0 * io;
            const ComplexMatrix s = scattering(at, x);
            for (const auto& [o, i] : pairs) {
                const double v = std::norm(s(static_cast<Eigen::Index>(at.index_of(o)), static_cast<Eigen::Index>(at.index_of(i))));
                obs.push_back({x, phi, o, i, v * (1.0 + 0.01 * normal(rng)), 1.0});
            }
            for (const std::string port : {"a1", "a2"}) {
                const auto j = static_cast<Eigen::Index>(at.index_of(port));
                double q = 0.0;
                for (std::size_t k = 0; k < at.size(); ++k) q += std::norm(s(j, static_cast<Eigen::Index>(k))) * at.modes()[k].bath_occupation;
                const double v = 1.0 + chain.at(port).added_noise + q;
                noise_obs.push_back({x, phi, port, v * (1.0 + 0.01 * normal(rng)), 1.0});
            }
        }
    }

    FourModeModel start = truth;
    start.mech_occupation = {0.0, 0.0};
    ModelParametrization p = ModelParametrization::four_mode(start);
    const char* names[] = {"C11", "C12", "C21", "C22"};
    const double factor[] = {1.2, 0.8, 1.2, 0.8};
    for (int i = 0; i < 4; ++i) {
        p.set_value(names[i], truth.cooperativity[i] * factor[i]);
        p.set_free(names[i]);
    }
    for (const char* name : {"delta1", "delta2"}) p.set_free(name);
    const FitReport r = fit_scattering({obs, p});

    double worst_c = 0.0;
    for (int i = 0; i < 4; ++i) worst_c = std::max(worst_c, rel(r.parameter(names[i]).value, truth.cooperativity[i]));

    NoiseFitProblem np{noise_obs, {"mech1", "mech2"}, chain, false};
    const FitReport rn = fit_noise(np, r.model);
    const double e1 = rel(rn.parameter("n_mech1").value, 0.89);
    const double e2 = rel(rn.parameter("n_mech2").value, 12.0);
    return {worst_c <= 0.05 && e1 <= 0.10 && e2 <= 0.10,
            fmt("C max rel err %.2e (tol 5e-2); ", worst_c) +
                fmt("n1 = %.3f, n2 = %.3f, max rel err %.2e (tol 1e-1)", rn.parameter("n_mech1").value,
                    rn.parameter("n_mech2").value, std::max(e1, e2))};
}

// 11. Reciprocal bandwidth inverted for C.
Outcome side_formulas() {
    const double c1 = cooperativity_from_reciprocal_bandwidth(70e3, 15.0);
    const double c2 = cooperativity_from_reciprocal_bandwidth(7e3, 19.0);
    const bool finite = std::isfinite(c1) && std::isfinite(c2) && c1 > 0.0 && c2 > 0.0;
    const double back = std::max(rel(reciprocal_bandwidth(15.0, c1), 70e3), rel(reciprocal_bandwidth(19.0, c2), 7e3));
    return {finite && back <= 1e-12, fmt("C1 = %.2f, C2 = %.2f, round-trip rel err %.1e", c1, c2, back)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "ideal-isolator limit", 1.0, ideal_limit},
        {2, "closed-form/numeric agreement", 10.0, closed_form_agreement},
        {3, "bandwidth law", 10.0, bandwidth_law},
        {4, "operating point", 1.0, operating_point},
        {5, "reduction exactness", 30.0, reduction_exactness},
        {6, "unitarity/passivity", 30.0, unitarity_passivity},
        {7, "transposition", 10.0, transposition},
        {8, "noise routing", 1.0, noise_routing},
        {9, "effective occupation", 0.1, effective_occupation_check},
        {10, "fit recovery", 300.0, fit_recovery},
        {11, "side formulas", 0.1, side_formulas},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("%s [%2d] %s: %s; %.3f s (limit %g s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    secs, c.limit_s, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
