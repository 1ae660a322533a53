#pragma once

// Expanded coupled-mode model of a two-cavity, two-mechanical-mode device
// driven by four red-sideband tones, and Schur-complement reduction of any
// network to a smaller effective one.
//
// Every drive pumped for the pair (cavity j, mechanical k) also couples
// cavity j to the other mechanical mode off resonance. In the Fourier domain
// each such process creates a duplicate of an oscillator evaluated at a
// shifted signal frequency. The network is grown breadth-first from the four
// principal modes; with the default depth of one hop it has 10 modes and 16
// couplings.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nrloop/isolator.hpp"
#include "nrloop/network.hpp"

namespace nrloop {

/// Physical device parameters. Frequencies and rates in Hz.
struct DeviceModel {
    std::array<double, 2> cavity_freq{};
    std::array<double, 2> kappa{};
    std::array<double, 2> eta{1.0, 1.0};
    std::array<double, 2> mech_freq{};
    std::array<double, 2> gamma{};  ///< intrinsic mechanical linewidths
    std::array<double, 2> mech_occupation{};
    std::array<double, 2> cavity_occupation{};
    /// Vacuum coupling rates g⁰[cavity][mechanical].
    std::array<std::array<double, 2>, 2> g0{};
    /// Multiplies every off-resonant coupling ratio; 0 removes them.
    double cross_coupling_scale = 1.0;
};

/// Red-sideband drive pumped for (cavity, mech), both 1-based.
struct DriveTone {
    int cavity = 1;
    int mech = 1;
    double frequency = 0.0;  ///< Hz
    double coupling = 0.0;   ///< driven coupling |g|, Hz
    double phase = 0.0;      ///< radians
};

using DriveSet = std::array<DriveTone, 4>;

struct ExpansionOptions {
    int depth = 1;
    double merge_tolerance = 1e-3;  ///< Hz
};

/// Drive frequency ω_j − Ω_k + detuning for a tone offset from the red sideband.
double red_sideband(const DeviceModel& device, int cavity, int mech);

/// Four drives in (1,1), (1,2), (2,1), (2,2) order from couplings [Hz],
/// detunings from the red sideband [Hz] and a loop phase placed on the
/// (1,2) drive.
DriveSet make_drives(const DeviceModel& device, const std::array<double, 4>& coupling,
                     const std::array<double, 4>& detuning, double loop_phase);

/// Loop phase θ12 − θ11 + θ21 − θ22 implied by the drive phases.
double loop_phase_of(const DriveSet& drives);

/// Intrinsic cooperativity 4g²/(κ_j Γ_k) of each drive.
std::array<double, 4> drive_cooperativities(const DeviceModel& device, const DriveSet& drives);

ModeNetwork build_expanded_network(const DeviceModel& device, const DriveSet& drives,
                                   const ExpansionOptions& options = {});

/// Ids of the modes that are not one of a1, a2, b1, b2.
std::vector<std::string> auxiliary_mode_ids(const ModeNetwork& network);

// --- reduction ------------------------------------------------------------------

/// M′_ij = M_ij − M_ik·M_kj / M_kk, dropping row and column k.
/// Throws NumericalError when |M_kk| < pivot_tolerance.
ComplexMatrix reduce_mode(const ComplexMatrix& m, std::size_t k, double pivot_tolerance = 1e-12);

struct Reduction {
    ComplexMatrix matrix;                ///< in the order of `retained`
    std::vector<std::string> retained;
    std::vector<std::string> eliminated;  ///< in elimination order
    /// Largest |M_ik·M_kj / M_kk| introduced by each elimination.
    std::vector<double> max_correction;
};

/// Eliminates every mode not listed in `retained` from M(probe_offset).
Reduction reduce_network(const ModeNetwork& network, std::span<const std::string> retained,
                         double probe_offset, double pivot_tolerance = 1e-12);

/// S among the retained ports, from a reduction of `network`.
ComplexMatrix reduced_scattering(const ModeNetwork& network, const Reduction& reduction,
                                 double probe_offset, const SolverLimits& limits = {});

// --- effective four-mode parameters -------------------------------------------------

struct EffectiveParameters {
    std::array<double, 2> gamma_eff{};  ///< Hz
    std::array<double, 2> kappa_eff{};  ///< Hz
    std::array<double, 4> cooperativity{};  ///< C11, C12, C21, C22
    std::array<double, 2> n_eff{};
    std::array<double, 2> delta_eff{};  ///< mechanical detunings in units of Γ_eff
    double loop_phase = 0.0;
    Reduction reduction;
};

/// n_eff = Γ·n / Γ_eff.
double effective_occupation(double gamma, double occupation, double gamma_eff);

EffectiveParameters effective_parameters(const DeviceModel& device, const DriveSet& drives,
                                         const ExpansionOptions& options = {}, double probe_offset = 0.0);

/// Effective parameters of an already-built network whose principal modes
/// are a1, a2, b1, b2.
EffectiveParameters effective_parameters(const ModeNetwork& network, double probe_offset = 0.0);

/// Four-mode model carrying the effective parameters of `device` + `drives`.
FourModeModel effective_model(const DeviceModel& device, const DriveSet& drives,
                              const ExpansionOptions& options = {});

}  // namespace nrloop
