#include "nrloop/network.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "nrloop/diagnostics.hpp"
#include "nrloop/error.hpp"

namespace nrloop {
namespace {

bool same_value(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

void validate_mode(const Mode& m) {
    if (m.id.empty()) throw InvalidArgument("mode with empty id");
    if (!(m.linewidth > 0.0) || !std::isfinite(m.linewidth)) {
        throw InvalidArgument("mode '" + m.id + "': linewidth must be positive and finite");
    }
    if (!(m.coupling_efficiency >= 0.0 && m.coupling_efficiency <= 1.0)) {
        throw InvalidArgument("mode '" + m.id + "': coupling efficiency must lie in [0, 1]");
    }
    if (!(m.bath_occupation >= 0.0) || !std::isfinite(m.bath_occupation)) {
        throw InvalidArgument("mode '" + m.id + "': bath occupation must be non-negative");
    }
    if (!std::isfinite(m.resonance_freq) || !std::isfinite(m.signal_freq)) {
        throw InvalidArgument("mode '" + m.id + "': frequencies must be finite");
    }
}

}  // namespace

ModeNetwork::ModeNetwork(std::vector<Mode> modes, std::vector<Coupling> couplings, double loop_phase)
    : modes_(std::move(modes)), couplings_(std::move(couplings)), loop_phase_(loop_phase) {
    if (modes_.empty()) throw InvalidArgument("network has no modes");
    if (!std::isfinite(loop_phase_)) throw InvalidArgument("loop phase must be finite");

    std::map<std::string, const Mode*> by_oscillator;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        const Mode& m = modes_[i];
        validate_mode(m);
        if (!index_.emplace(m.id, i).second) {
            throw InvalidArgument("duplicate mode id '" + m.id + "'");
        }
        const std::string osc = m.oscillator.empty() ? m.id : m.oscillator;
        auto [it, inserted] = by_oscillator.emplace(osc, &m);
        if (!inserted && (!same_value(it->second->resonance_freq, m.resonance_freq) ||
                          !same_value(it->second->linewidth, m.linewidth))) {
            throw InvalidArgument("modes '" + it->second->id + "' and '" + m.id +
                                  "' share oscillator '" + osc +
                                  "' but differ in resonance or linewidth");
        }
    }

    std::set<std::pair<std::size_t, std::size_t>> seen;
    edges_.reserve(couplings_.size());
    for (const Coupling& c : couplings_) {
        auto ia = index_.find(c.mode_a);
        auto ib = index_.find(c.mode_b);
        if (ia == index_.end()) throw InvalidArgument("coupling references unknown mode '" + c.mode_a + "'");
        if (ib == index_.end()) throw InvalidArgument("coupling references unknown mode '" + c.mode_b + "'");
        if (ia->second == ib->second) throw InvalidArgument("self-coupling on mode '" + c.mode_a + "'");
        if (!(c.magnitude >= 0.0) || !std::isfinite(c.magnitude) || !std::isfinite(c.phase)) {
            throw InvalidArgument("coupling " + c.mode_a + "-" + c.mode_b +
                                  ": magnitude must be finite and non-negative");
        }
        auto key = std::minmax(ia->second, ib->second);
        if (!seen.insert(key).second) {
            throw InvalidArgument("more than one coupling between '" + c.mode_a + "' and '" + c.mode_b + "'");
        }
        edges_.push_back({ia->second, ib->second});
    }

    // Union-find over edges for connectivity.
    std::vector<std::size_t> parent(modes_.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = modes_.size();
    for (const Edge& e : edges_) {
        auto ra = find(e.a), rb = find(e.b);
        if (ra != rb) {
            parent[ra] = rb;
            --components;
        }
    }
    connected_ = components == 1;
    if (!connected_) {
        std::ostringstream msg;
        msg << "mode network has " << components << " disconnected components";
        emit_warning(msg.str());
    }
}

std::size_t ModeNetwork::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw InvalidArgument("unknown mode '" + std::string(id) + "'");
    return it->second;
}

bool ModeNetwork::contains(std::string_view id) const {
    return index_.find(std::string(id)) != index_.end();
}

ModeNetwork ModeNetwork::with_loop_phase(double phase) const {
    ModeNetwork copy = *this;
    if (!std::isfinite(phase)) throw InvalidArgument("loop phase must be finite");
    copy.loop_phase_ = phase;
    return copy;
}

Complex ModeNetwork::coupling_entry(std::size_t coupling_index) const {
    const Coupling& c = couplings_.at(coupling_index);
    const double phase = c.phase + (c.carries_loop_phase ? loop_phase_ : 0.0);
    return std::polar(c.magnitude, phase);
}

ComplexMatrix assemble_M(const ModeNetwork& network, double probe_offset) {
    const auto n = static_cast<Eigen::Index>(network.size());
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    const auto& modes = network.modes();
    for (Eigen::Index j = 0; j < n; ++j) {
        const Mode& mode = modes[static_cast<std::size_t>(j)];
        const double detuning = (mode.signal_freq + probe_offset - mode.resonance_freq) / mode.linewidth;
        m(j, j) = Complex(detuning, 0.5);
    }
    const auto& edges = network.edges();
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const Complex beta = network.coupling_entry(k);
        const auto a = static_cast<Eigen::Index>(edges[k].a);
        const auto b = static_cast<Eigen::Index>(edges[k].b);
        m(a, b) = beta;
        m(b, a) = std::conj(beta);
    }
    return m;
}

Eigen::VectorXd coupling_efficiencies(const ModeNetwork& network) {
    Eigen::VectorXd eta(static_cast<Eigen::Index>(network.size()));
    for (std::size_t j = 0; j < network.size(); ++j) {
        eta(static_cast<Eigen::Index>(j)) = network.modes()[j].coupling_efficiency;
    }
    return eta;
}

Solve solve_coupling_matrix(const ComplexMatrix& m, const ComplexMatrix& rhs, double probe_offset,
                            const SolverLimits& limits) {
    Eigen::PartialPivLU<ComplexMatrix> lu(m);
    const double rcond = lu.rcond();
    const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition <= limits.max_condition)) {
        std::ostringstream msg;
        msg << "mode-coupling matrix is numerically singular at probe offset " << probe_offset
            << " Hz (condition estimate " << condition << ")";
        throw SingularMatrixError(msg.str(), probe_offset, condition);
    }
    if (condition > limits.warn_condition) {
        std::ostringstream msg;
        msg << "ill-conditioned mode-coupling matrix at probe offset " << probe_offset
            << " Hz (condition estimate " << condition << ")";
        emit_warning(msg.str());
    }
    Solve out{lu.solve(rhs), condition};
    if (!out.x.allFinite()) {
        throw SingularMatrixError("non-finite solution at probe offset " + std::to_string(probe_offset) + " Hz",
                                  probe_offset, condition);
    }
    return out;
}

ComplexMatrix scattering_from_matrix(const ComplexMatrix& m, const Eigen::VectorXd& eta,
                                     double probe_offset, const SolverLimits& limits) {
    if (m.rows() != m.cols() || m.rows() != eta.size()) {
        throw InvalidArgument("coupling matrix and efficiency vector sizes disagree");
    }
    const Eigen::VectorXd h = eta.cwiseSqrt();
    // Right-hand side H; solving M·X = H gives X = M⁻¹H column by column.
    const ComplexMatrix rhs = h.cast<Complex>().asDiagonal().toDenseMatrix();
    const Solve solve = solve_coupling_matrix(m, rhs, probe_offset, limits);
    ComplexMatrix s = Complex(0.0, 1.0) * (h.cast<Complex>().asDiagonal() * solve.x);
    s.diagonal().array() -= 1.0;
    return s;
}

ComplexMatrix scattering(const ModeNetwork& network, double probe_offset, const SolverLimits& limits) {
    return scattering_from_matrix(assemble_M(network, probe_offset), coupling_efficiencies(network),
                                  probe_offset, limits);
}

}  // namespace nrloop
