#pragma once

// Four-mode optomechanical isolator: two cavities (a1, a2) coupled to two
// mechanical modes (b1, b2) around a closed loop. Closed-form design rules
// valid at high cooperativity, and numerical maximization of the exact
// transmission difference ΔT = |S21|² − |S12|² that supersedes them at low
// cooperativity.
//
// Sign convention: mechanical detunings enter as Δ = δ + i/2 and the loop
// phase sits on the a1–b2 coupling as e^{+iφ}. With these conventions the
// branch δ_b1 = −δ_b2 < 0 realizes the closed-form ΔT (positive for φ > 0).

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "nrloop/network.hpp"

namespace nrloop {

/// Mode ids used by build_four_mode_network, in matrix order.
inline constexpr std::array<std::string_view, 4> kFourModeIds{"a1", "a2", "b1", "b2"};

/// General four-mode loop. Cooperativities are indexed [cavity][mechanical]
/// flattened as (C11, C12, C21, C22); C = 4|β|².
struct FourModeModel {
    std::array<double, 4> cooperativity{};
    std::array<double, 2> eta{1.0, 1.0};
    std::array<double, 2> kappa{1.3e6, 2.0e6};  ///< cavity linewidths, Hz
    std::array<double, 2> gamma{};              ///< mechanical linewidths, Hz
    std::array<double, 2> delta{};              ///< mechanical normalized detunings
    double loop_phase = 0.0;                    ///< radians
    std::array<double, 2> cavity_freq{6.528e9, 6.733e9};
    std::array<double, 2> mech_freq{6.7e6, 9.4e6};
    std::array<double, 2> mech_occupation{};
    std::array<double, 2> cavity_occupation{};
};

ModeNetwork build_four_mode_network(const FourModeModel& model);

/// Symmetric isolator: each mechanical mode couples equally to both cavities.
struct IsolatorSpec {
    double c3 = 0.0;  ///< cooperativity of mechanical mode b1 (to either cavity)
    double c4 = 0.0;  ///< cooperativity of mechanical mode b2
    double eta1 = 1.0;
    double eta2 = 1.0;
    double gamma3 = 0.0;  ///< Hz
    double gamma4 = 0.0;  ///< Hz
    double loop_phase = 0.0;
    double delta3 = 0.0;
    double delta4 = 0.0;
    double kappa1 = 1.3e6;
    double kappa2 = 2.0e6;
};

FourModeModel to_model(const IsolatorSpec& spec);

// --- closed forms -----------------------------------------------------------

struct DetuningPair {
    double delta3 = 0.0;
    double delta4 = 0.0;
};

/// Impedance-matched detunings δ3 = −δ4 = ±½√(2C3C4(1 − cos φ) − 1).
/// Element 0 is the δ3 ≤ 0 branch, which realizes the closed-form ΔT;
/// element 1 is its mirror. Throws DomainError when the radicand is negative.
std::array<DetuningPair, 2> optimal_detuning(double c3, double c4, double phase);

/// ±arccos(1 − 1/√(C3C4)). Throws DomainError when C3C4 < 1/4.
std::array<double, 2> optimal_loop_phase(double c3, double c4);

/// Closed-form ΔT at the impedance-matched detuning. Throws DomainError when
/// the detuning radicand is negative.
double transmission_difference_closed_form(double c3, double c4, double eta1, double eta2, double phase);

/// Best ΔT at a fixed phase: the closed form when it exists, otherwise a
/// numerical maximization over the detunings through the exact S.
double optimal_transmission_difference(double c3, double c4, double eta1, double eta2, double phase);

/// Exact ΔT = |S21|² − |S12|² of the model at a probe offset.
double transmission_difference(const FourModeModel& model, double probe_offset = 0.0);
double transmission_difference(const IsolatorSpec& spec, double probe_offset = 0.0);

/// Γ_NR = 4γ3γ4/(γ3 + γ4).
double nonreciprocal_bandwidth(double gamma3, double gamma4);

/// Γ_R = γ(1 + 2C).
double reciprocal_bandwidth(double gamma, double cooperativity);

/// Inverse of reciprocal_bandwidth: C = (Γ_R/γ − 1)/2.
double cooperativity_from_reciprocal_bandwidth(double damped_width, double gamma);

/// High-cooperativity Lorentzian η1η2·γ*²/(γ*² + 4δω²), γ* = Γ_NR.
std::vector<double> delta_T_profile(const IsolatorSpec& spec, std::span<const double> offsets);

/// Exact ΔT(δω) through the scattering matrix.
std::vector<double> delta_T_numeric_profile(const FourModeModel& model, std::span<const double> offsets);

/// Full width at half maximum of the exact ΔT(δω) around its peak, Hz.
double numerical_bandwidth(const FourModeModel& model);

// --- numerical design ---------------------------------------------------------

struct DesignPoint {
    double phase_opt = 0.0;
    double delta3 = 0.0;
    double delta4 = 0.0;
    double delta_t = 0.0;
    double bandwidth = 0.0;  ///< Γ_NR from the mechanical linewidths, Hz
};

struct DesignResult {
    DesignPoint forward;  ///< φ > 0, maximizes ΔT (a1 → a2)
    DesignPoint reverse;  ///< φ < 0, minimizes ΔT (a2 → a1)
    int evaluations = 0;
};

struct OptimizerOptions {
    int max_evaluations = 40000;
    double tolerance = 1e-14;
    int phase_grid = 72;
};

/// Maximizes ΔT over (φ, δ3, δ4) using the exact scattering matrix. Seeds
/// from a coarse phase scan plus the closed-form optimum when it exists.
/// Throws ConvergenceError when the evaluation budget is exhausted.
DesignResult optimize_design(const IsolatorSpec& spec, const OptimizerOptions& options = {});

struct DetuningOptimum {
    double delta1 = 0.0;
    double delta2 = 0.0;
    double delta_t = 0.0;
};

/// Maximizes |ΔT| over the two mechanical detunings at a fixed loop phase,
/// in the direction selected by the sign of sin φ (φ = 0 maximizes ΔT).
DetuningOptimum optimize_detunings(const FourModeModel& model, double phase,
                                   const OptimizerOptions& options = {});

/// Forward/backward transmission between two ports at a probe offset.
struct IsolationFigures {
    double forward = 0.0;   ///< |S[to][from]|²
    double backward = 0.0;  ///< |S[from][to]|²
    double insertion_loss_db = 0.0;
    double isolation_db = 0.0;
};

IsolationFigures isolation_figures(const ModeNetwork& network, double probe_offset,
                                   std::string_view from, std::string_view to);

}  // namespace nrloop
