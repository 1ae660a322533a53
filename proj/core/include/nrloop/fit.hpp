#pragma once

// Least-squares estimation of model parameters from measured |S|² maps over
// (probe offset, loop phase), and of bath occupations from noise maps.
//
// Scattering fits minimize Σ ((|S|²_model − value)/σ)² on the linear scale
// with a damped (Levenberg-Marquardt) iteration and forward-difference
// Jacobians. Noise fits are linear in the occupations and are solved as a
// non-negative least-squares problem.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrloop/expansion.hpp"
#include "nrloop/isolator.hpp"
#include "nrloop/network.hpp"
#include "nrloop/noise.hpp"

namespace nrloop {

struct FitParameter {
    std::string name;
    double value = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double scale = 1.0;  ///< typical magnitude; the solver works in value/scale
    bool free = false;
};

/// Named parameter vector plus the map from it to a mode network.
///
/// four_mode: C11 C12 C21 C22 delta1 delta2 gamma1 gamma2 kappa1 kappa2
///            eta1 eta2 phase_offset n_mech1 n_mech2 n_cavity1 n_cavity2
/// expanded:  g11 g12 g21 g22 detuning11 detuning12 detuning21 detuning22
///            gamma1 gamma2 kappa1 kappa2 eta1 eta2 cross_scale phase_offset
///            n_mech1 n_mech2 n_cavity1 n_cavity2
///
/// Expanded drives are given as couplings g [Hz] and detunings from the red
/// sideband [Hz]. The network loop phase is the measured phase plus
/// phase_offset [rad].
class ModelParametrization {
public:
    enum class Kind { four_mode, expanded };

    static ModelParametrization four_mode(const FourModeModel& model);
    static ModelParametrization expanded(const DeviceModel& device, const std::array<double, 4>& coupling,
                                         const std::array<double, 4>& detuning, double phase_offset = 0.0,
                                         const ExpansionOptions& options = {});

    Kind kind() const noexcept { return kind_; }
    const std::vector<FitParameter>& parameters() const noexcept { return params_; }
    /// Throws InvalidArgument for unknown names.
    const FitParameter& parameter(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    void set_value(std::string_view name, double value);
    void set_free(std::string_view name, bool free = true);
    void set_bounds(std::string_view name, double lower, double upper);

    std::vector<double> values() const;
    void set_values(std::span<const double> values);
    std::vector<std::size_t> free_indices() const;

    /// Network at loop phase = phase_offset, from a full parameter vector.
    ModeNetwork network(std::span<const double> values) const;
    ModeNetwork network() const { return network(values()); }

    /// C11, C12, C21, C22: the model's own cooperativities for four_mode,
    /// the reduced effective ones for expanded.
    std::array<double, 4> cooperativities(std::span<const double> values) const;
    std::optional<EffectiveParameters> effective(std::span<const double> values) const;

    FourModeModel four_mode_model(std::span<const double> values) const;
    DeviceModel device(std::span<const double> values) const;
    DriveSet drives(std::span<const double> values) const;
    const ExpansionOptions& expansion_options() const noexcept { return expansion_; }

private:
    Kind kind_ = Kind::four_mode;
    std::vector<FitParameter> params_;
    FourModeModel four_mode_base_;
    DeviceModel device_base_;
    ExpansionOptions expansion_;
};

/// One |S|² sample. `phase` is the loop phase in radians.
struct Observation {
    double offset = 0.0;
    double phase = 0.0;
    std::string port_out;
    std::string port_in;
    double value = 0.0;
    double sigma = 1.0;
};

struct FitProblem {
    std::vector<Observation> observations;
    ModelParametrization model;
};

struct FitOptions {
    int max_iterations = 500;
    double function_tolerance = 1e-9;
    double parameter_tolerance = 1e-9;
    double relative_step = 1e-6;
    int restarts = 0;             ///< extra starts from randomly perturbed guesses
    double restart_spread = 0.2;  ///< relative perturbation of restart guesses
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double rank_tolerance = 1e-8;  ///< relative singular-value cutoff
    SolverLimits limits{};
};

struct FittedParameter {
    std::string name;
    double value = 0.0;
    double initial = 0.0;
    double standard_error = 0.0;  ///< 0 for fixed, +inf when unidentifiable
    bool free = false;
};

struct FitReport {
    std::vector<FittedParameter> parameters;
    double residual_norm = 0.0;  ///< sqrt(Σ r²) at the reported point
    double initial_residual_norm = 0.0;
    std::size_t observations = 0;
    int iterations = 0;
    int starts = 1;
    bool converged = false;
    std::string termination;
    bool rank_deficient = false;
    /// Unit vectors over the free parameters spanning the Jacobian null space.
    std::vector<std::vector<double>> null_space;
    std::array<double, 4> cooperativity{};
    std::optional<EffectiveParameters> effective;
    /// Input parametrization with the fitted values written back.
    ModelParametrization model = ModelParametrization::four_mode({});

    const FittedParameter& parameter(std::string_view name) const;
};

/// Throws IllPosedFitError when observations < free parameters, InvalidArgument
/// when a guess lies outside its bounds or a port is unknown, and
/// ConvergenceError when no start converges within the iteration budget.
FitReport fit_scattering(const FitProblem& problem, const FitOptions& options = {});

/// Model |S|² at every observation; NaN where the solve fails.
std::vector<double> model_values(const ModelParametrization& model, std::span<const double> values,
                                 std::span<const Observation> observations, unsigned threads = 1,
                                 const SolverLimits& limits = {});

// --- noise fit ------------------------------------------------------------------

/// Output noise in quanta referred to the device input of the chain,
/// i.e. N/(h·f·G) = 1 + n_amp + Σ_k |S_jk|² n_k.
struct NoiseObservation {
    double offset = 0.0;
    double phase = 0.0;  ///< rad
    std::string port;
    double value = 0.0;
    double sigma = 1.0;
};

struct NoiseFitProblem {
    std::vector<NoiseObservation> observations;
    /// Oscillators whose bath occupation is fitted; the others keep the
    /// values in the scattering model.
    std::vector<std::string> oscillators{"mech1", "mech2"};
    AmplifierChain chain;
    bool fit_added_noise = false;  ///< also fit n_amp per observed port
};

/// Solves for non-negative occupations with the scattering parameters of
/// `scattering` held fixed. Throws IllPosedFitError naming the baths that
/// cannot be told apart when the design matrix is rank deficient.
FitReport fit_noise(const NoiseFitProblem& problem, const ModelParametrization& scattering,
                    const FitOptions& options = {});

/// Lawson-Hanson active-set solve of min ‖Ax − b‖ subject to x ≥ 0.
Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                          int max_iterations = 0);

}  // namespace nrloop
