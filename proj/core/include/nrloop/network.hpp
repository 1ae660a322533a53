#pragma once

// Coupled-mode networks: modes, parametric couplings, the mode-coupling
// matrix M(ω) and the scattering matrix S = i·H·M⁻¹·H − 1.
//
// All external frequencies are ordinary frequencies in Hz. The normalized
// complex detuning of mode j at probe offset x is
//     Δ_j = (signal_freq_j + x − resonance_freq_j) / linewidth_j + i/2
// and an off-diagonal entry is the normalized coupling β_jk = g_jk/√(γ_jγ_k).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace nrloop {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// One resonance evaluated at one Fourier (signal) frequency. Several modes
/// may live in the same physical oscillator at different signal frequencies.
struct Mode {
    std::string id;
    std::string oscillator;
    double resonance_freq = 0.0;       ///< Hz
    double linewidth = 0.0;            ///< Hz, total loss rate γ/2π
    double coupling_efficiency = 1.0;  ///< η ∈ [0, 1]
    double signal_freq = 0.0;          ///< Hz, evaluation frequency at zero probe offset
    double bath_occupation = 0.0;      ///< quanta
};

/// Beam-splitter coupling between two modes. The matrix entry M[a][b] is
/// magnitude·e^{i(phase + φ)} when the coupling carries the loop phase φ,
/// and M[b][a] is its complex conjugate.
struct Coupling {
    std::string mode_a;
    std::string mode_b;
    double magnitude = 0.0;  ///< |β|, dimensionless
    double phase = 0.0;      ///< static phase, radians (zero under the default gauge)
    std::string drive;       ///< label of the tone producing the coupling
    bool carries_loop_phase = false;
};

/// Immutable coupled-mode graph plus the loop phase. Safe to share across
/// threads; every evaluation is a pure function of (network, offset).
class ModeNetwork {
public:
    ModeNetwork(std::vector<Mode> modes, std::vector<Coupling> couplings, double loop_phase = 0.0);

    const std::vector<Mode>& modes() const noexcept { return modes_; }
    const std::vector<Coupling>& couplings() const noexcept { return couplings_; }
    double loop_phase() const noexcept { return loop_phase_; }
    std::size_t size() const noexcept { return modes_.size(); }
    bool connected() const noexcept { return connected_; }

    /// Index of a mode in the matrix ordering. Throws InvalidArgument.
    std::size_t index_of(std::string_view id) const;
    const Mode& mode(std::string_view id) const { return modes_[index_of(id)]; }
    bool contains(std::string_view id) const;

    ModeNetwork with_loop_phase(double phase) const;

    /// Value placed at M[index(mode_a)][index(mode_b)] for coupling `c`.
    Complex coupling_entry(std::size_t coupling_index) const;

    struct Edge {
        std::size_t a;
        std::size_t b;
    };
    const std::vector<Edge>& edges() const noexcept { return edges_; }

private:
    std::vector<Mode> modes_;
    std::vector<Coupling> couplings_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, std::size_t> index_;
    double loop_phase_ = 0.0;
    bool connected_ = true;
};

/// Thresholds on the 1-norm condition number estimate of M.
struct SolverLimits {
    double warn_condition = 1e8;
    double max_condition = 1e13;
};

ComplexMatrix assemble_M(const ModeNetwork& network, double probe_offset);

Eigen::VectorXd coupling_efficiencies(const ModeNetwork& network);

/// S = i·H·M⁻¹·H − 1 with H = diag(√η). Uses an LU factorization with
/// partial pivoting and per-column solves. Throws SingularMatrixError when
/// the condition estimate exceeds `limits.max_condition`.
ComplexMatrix scattering(const ModeNetwork& network, double probe_offset,
                         const SolverLimits& limits = {});

/// Same as `scattering` for an already-assembled (possibly reduced) M.
ComplexMatrix scattering_from_matrix(const ComplexMatrix& m, const Eigen::VectorXd& eta,
                                     double probe_offset, const SolverLimits& limits = {});

/// Solves M·X = rhs and returns X together with the condition estimate.
struct Solve {
    ComplexMatrix x;
    double condition = 0.0;
};
Solve solve_coupling_matrix(const ComplexMatrix& m, const ComplexMatrix& rhs, double probe_offset,
                            const SolverLimits& limits = {});

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Ordered port pair: S[out][in] is the response at `out` to a probe at `in`.
struct PortPair {
    std::string out;
    std::string in;
};

struct SweepOptions {
    bool keep_complex = false;
    unsigned threads = 1;
    SolverLimits limits{};
};

/// |S|² tabulated over (phase, offset, port pair). Points where the solve
/// failed hold NaN and have `failed` set.
struct SweepResult {
    std::vector<double> offsets;
    std::vector<double> phases;
    std::vector<PortPair> pairs;
    std::vector<double> power;          ///< |S|², size phases·offsets·pairs
    std::vector<Complex> amplitude;     ///< S, only when keep_complex
    std::vector<std::uint8_t> failed;   ///< per (phase, offset)

    std::size_t index(std::size_t phase, std::size_t offset, std::size_t pair) const noexcept {
        return (phase * offsets.size() + offset) * pairs.size() + pair;
    }
    double at(std::size_t phase, std::size_t offset, std::size_t pair) const {
        return power[index(phase, offset, pair)];
    }
    bool point_failed(std::size_t phase, std::size_t offset) const {
        return failed[phase * offsets.size() + offset] != 0;
    }
    std::size_t failure_count() const noexcept;
};

/// All ordered pairs over the network's modes, in matrix order.
std::vector<PortPair> all_port_pairs(const ModeNetwork& network);

SweepResult sweep_scattering(const ModeNetwork& network, std::span<const double> offsets,
                             std::span<const double> phases, std::span<const PortPair> pairs,
                             const SweepOptions& options = {});

}  // namespace nrloop
