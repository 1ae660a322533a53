#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "nrloop/diagnostics.hpp"
#include "nrloop/error.hpp"
#include "nrloop/network.hpp"
#include "random_networks.hpp"

using namespace nrloop;
using nrloop::testing::Rng;

namespace {

Mode make_mode(std::string id, double linewidth = 1e3, double eta = 1.0, double detune = 0.0) {
    Mode m;
    m.id = id;
    m.oscillator = id;
    m.resonance_freq = 1e6;
    m.linewidth = linewidth;
    m.coupling_efficiency = eta;
    m.signal_freq = 1e6 + detune;
    return m;
}

Coupling make_coupling(std::string a, std::string b, double beta, bool loop = false) {
    Coupling c;
    c.mode_a = a;
    c.mode_b = b;
    c.magnitude = beta;
    c.drive = a + b;
    c.carries_loop_phase = loop;
    return c;
}

// Collects warnings for the lifetime of the guard.
struct WarningCapture {
    std::vector<std::string> messages;
    WarningHandler previous;
    WarningCapture() {
        previous = set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
    }
    ~WarningCapture() { set_warning_handler(previous); }
};

}  // namespace

TEST_SUITE("network") {

TEST_CASE("single mode reflection is 2η − 1 on resonance") {
    for (double eta : {0.0, 0.25, 0.5, 1.0}) {
        const ModeNetwork net({make_mode("a", 1e3, eta)}, {});
        const ComplexMatrix s = scattering(net, 0.0);
        CHECK(s(0, 0).real() == doctest::Approx(2.0 * eta - 1.0).epsilon(1e-14));
        CHECK(std::abs(s(0, 0).imag()) < 1e-14);
    }
}

TEST_CASE("single mode Lorentzian off resonance") {
    const double gamma = 2e3;
    const ModeNetwork net({make_mode("a", gamma, 1.0)}, {});
    for (double x : {-5e3, -1e3, 250.0, 4e3}) {
        const Complex delta(x / gamma, 0.5);
        const Complex expected = Complex(0.0, 1.0) / delta - 1.0;
        CHECK(std::abs(scattering(net, x)(0, 0) - expected) < 1e-13);
    }
}

TEST_CASE("two-mode conversion follows 4C/(1+C)²") {
    for (double c : {0.1, 1.0, 3.0, 50.0}) {
        const double beta = std::sqrt(c) / 2.0;
        const ModeNetwork net({make_mode("a"), make_mode("b", 7e2)}, {make_coupling("a", "b", beta)});
        const ComplexMatrix s = scattering(net, 0.0);
        CHECK(std::norm(s(1, 0)) == doctest::Approx(4.0 * c / ((1.0 + c) * (1.0 + c))).epsilon(1e-12));
        CHECK(std::norm(s(0, 1)) == doctest::Approx(std::norm(s(1, 0))).epsilon(1e-12));
    }
}

TEST_CASE("assemble_M places Δ on the diagonal and conjugate couplings off it") {
    Coupling c = make_coupling("a", "b", 0.7, true);
    c.phase = 0.3;
    const ModeNetwork net({make_mode("a", 1e3, 1.0, 200.0), make_mode("b", 4e3)}, {c}, 0.5);
    const ComplexMatrix m = assemble_M(net, 100.0);
    CHECK(std::abs(m(0, 0) - Complex(0.3, 0.5)) < 1e-15);
    CHECK(std::abs(m(1, 1) - Complex(0.025, 0.5)) < 1e-15);
    CHECK(std::abs(m(0, 1) - std::polar(0.7, 0.8)) < 1e-15);
    CHECK(std::abs(m(1, 0) - std::polar(0.7, -0.8)) < 1e-15);
}

TEST_CASE("invalid networks are rejected") {
    using V = std::vector<Mode>;
    using C = std::vector<Coupling>;
    CHECK_THROWS_AS(ModeNetwork(V{}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a", 0.0)}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a", -1.0)}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a", 1e3, 1.2)}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a", 1e3, -0.1)}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a"), make_mode("a")}, C{}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a")}, C{make_coupling("a", "z", 1.0)}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a")}, C{make_coupling("a", "a", 1.0)}), InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a"), make_mode("b")},
                                C{make_coupling("a", "b", 1.0), make_coupling("b", "a", 1.0)}),
                    InvalidArgument);
    CHECK_THROWS_AS(ModeNetwork(V{make_mode("a"), make_mode("b")}, C{make_coupling("a", "b", -1.0)}),
                    InvalidArgument);

    Mode bad = make_mode("a");
    bad.bath_occupation = -1.0;
    CHECK_THROWS_AS(ModeNetwork(V{bad}, C{}), InvalidArgument);

    const ModeNetwork ok(V{make_mode("a")}, C{});
    CHECK_THROWS_AS(ok.index_of("nope"), InvalidArgument);
    CHECK_THROWS_AS(ok.with_loop_phase(std::nan("")), InvalidArgument);
}

TEST_CASE("disconnected networks warn but still evaluate") {
    WarningCapture capture;
    const ModeNetwork net({make_mode("a"), make_mode("b")}, {});
    CHECK_FALSE(net.connected());
    CHECK(capture.messages.size() == 1);
    CHECK(std::abs(scattering(net, 0.0)(1, 0)) < 1e-15);
}

TEST_CASE("condition limits warn and then throw") {
    // Strongly coupled modes probed at a normal-mode frequency: cond(M) ≈ 200.
    const ModeNetwork net({make_mode("a", 1e3, 1.0), make_mode("b", 1e3, 1.0)}, {make_coupling("a", "b", 50.0)});
    {
        WarningCapture capture;
        SolverLimits limits;
        limits.warn_condition = 2.0;
        scattering(net, 5e4, limits);
        CHECK(capture.messages.size() == 1);
    }
    SolverLimits strict;
    strict.warn_condition = 1.0;
    strict.max_condition = 1.5;
    WarningCapture quiet;
    try {
        scattering(net, 5e4, strict);
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
        CHECK(e.probe_offset() == 5e4);
        CHECK(e.condition() > 1.5);
    }
}

TEST_CASE("property: η = 1 gives unitary S") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        nrloop::testing::RandomNetworkOptions opt;
        opt.modes = 2 + static_cast<std::size_t>(trial % 9);
        opt.unit_efficiency = true;
        const ModeNetwork net = nrloop::testing::random_network(rng, opt);
        for (double x : nrloop::testing::random_offsets(rng, net, 3)) {
            const ComplexMatrix s = scattering(net, x);
            const ComplexMatrix eye = ComplexMatrix::Identity(s.rows(), s.cols());
            CHECK(nrloop::testing::max_abs(s.adjoint() * s - eye) < 1e-10);
        }
    }
}

TEST_CASE("property: column power sums never exceed one") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        nrloop::testing::RandomNetworkOptions opt;
        opt.modes = 2 + static_cast<std::size_t>(trial % 9);
        const ModeNetwork net = nrloop::testing::random_network(rng, opt);
        for (double x : nrloop::testing::random_offsets(rng, net, 3)) {
            const ComplexMatrix s = scattering(net, x);
            for (Eigen::Index col = 0; col < s.cols(); ++col) CHECK(s.col(col).squaredNorm() <= 1.0 + 1e-10);
        }
    }
}

TEST_CASE("property: reversing the loop phase transposes S") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        nrloop::testing::RandomNetworkOptions opt;
        opt.modes = 3 + static_cast<std::size_t>(trial % 8);
        opt.static_phases = false;
        const ModeNetwork net = nrloop::testing::random_network(rng, opt);
        const ModeNetwork flipped = net.with_loop_phase(-net.loop_phase());
        for (double x : nrloop::testing::random_offsets(rng, net, 2)) {
            const ComplexMatrix diff = scattering(flipped, x) - scattering(net, x).transpose();
            CHECK(nrloop::testing::max_abs(diff) < 1e-12);
        }
    }
}

TEST_CASE("sweep layout and defaults") {
    const ModeNetwork net({make_mode("a"), make_mode("b", 7e2)}, {make_coupling("a", "b", 0.5, true)});
    const std::vector<double> offsets{-1e3, 0.0, 1e3};
    const std::vector<double> phases{0.0, 1.0};
    const SweepResult r = sweep_scattering(net, offsets, phases, {});
    CHECK(r.pairs.size() == 4);
    CHECK(r.power.size() == 3 * 2 * 4);
    CHECK(r.failure_count() == 0);
    // Pair order follows the matrix: (a,a), (a,b), (b,a), (b,b).
    const ComplexMatrix s = scattering(net.with_loop_phase(1.0), 1e3);
    CHECK(r.at(1, 2, 2) == doctest::Approx(std::norm(s(1, 0))).epsilon(1e-14));

    const std::vector<double> none;
    CHECK_THROWS_AS(sweep_scattering(net, none, phases, {}), InvalidArgument);
    const std::vector<PortPair> bad{{"a", "zz"}};
    CHECK_THROWS_AS(sweep_scattering(net, offsets, phases, bad), InvalidArgument);
}

TEST_CASE("sweep flags failed points with NaN") {
    const ModeNetwork net({make_mode("a", 1e3), make_mode("b", 1e3)}, {make_coupling("a", "b", 50.0)});
    const std::vector<double> offsets{5e4, 1e9};
    const std::vector<double> phases{0.0};
    SweepOptions opt;
    opt.limits.warn_condition = 1e30;
    opt.limits.max_condition = 10.0;
    const SweepResult r = sweep_scattering(net, offsets, phases, {}, opt);
    CHECK(r.point_failed(0, 0));
    CHECK(std::isnan(r.at(0, 0, 0)));
    CHECK_FALSE(r.point_failed(0, 1));
    CHECK(r.failure_count() == 1);
}

TEST_CASE("threaded sweeps match the serial result") {
    Rng rng(21);
    const ModeNetwork net = nrloop::testing::random_network(rng);
    std::vector<double> offsets;
    for (int i = 0; i < 25; ++i) offsets.push_back(-2e5 + 1.6e4 * i);
    const std::vector<double> phases{-2.0, -0.5, 0.0, 0.7, 3.0};
    SweepOptions serial;
    SweepOptions threaded;
    threaded.threads = 4;
    threaded.keep_complex = true;
    const SweepResult a = sweep_scattering(net, offsets, phases, {}, serial);
    const SweepResult b = sweep_scattering(net, offsets, phases, {}, threaded);
    CHECK(a.power == b.power);
    CHECK(b.amplitude.size() == b.power.size());
}

}  // TEST_SUITE
