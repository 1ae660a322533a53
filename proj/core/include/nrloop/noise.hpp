#pragma once

// Output noise of a mode network seen through a high-gain amplifier chain,
// and mechanical occupancies from the internal mode spectra.
//
// Device-referred noise at port j is Σ_k |S_jk|² n_k in quanta. The
// chain-referred spectral density is h·f·G_j·(1 + n_amp,j + quanta) in W/Hz
// with f the port's absolute signal frequency; the G − 1 ≈ G limit is built in.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nrloop/error.hpp"
#include "nrloop/network.hpp"

namespace nrloop {

inline constexpr double kPlanck = 6.62607015e-34;  // J·s

struct AmplifierStage {
    double gain = 1.0;         ///< power gain, ≥ 1
    double added_noise = 0.0;  ///< quanta, ≥ 0
};

/// Per-port amplifier parameters. Ports not listed use a unit-gain,
/// noiseless stage.
struct AmplifierChain {
    std::map<std::string, AmplifierStage> ports;

    AmplifierStage at(const std::string& port) const;
    /// Throws InvalidArgument if any stage violates G ≥ 1 or n_amp ≥ 0.
    void validate() const;
};

struct NoiseSpectrum {
    std::string port;
    std::vector<double> offsets;
    std::vector<double> quanta;  ///< device-referred
    std::vector<double> power;   ///< chain-referred, W/Hz
    std::vector<std::uint8_t> failed;
};

NoiseSpectrum output_noise(const ModeNetwork& network, const AmplifierChain& chain, const std::string& port,
                           std::span<const double> offsets, const SolverLimits& limits = {});

struct NoiseMap {
    std::vector<double> offsets;
    std::vector<double> phases;
    std::vector<std::string> ports;
    std::vector<double> quanta;  ///< size phases·offsets·ports
    std::vector<double> power;
    std::vector<std::uint8_t> failed;  ///< per (phase, offset)

    std::size_t index(std::size_t phase, std::size_t offset, std::size_t port) const noexcept {
        return (phase * offsets.size() + offset) * ports.size() + port;
    }
    bool point_failed(std::size_t phase, std::size_t offset) const {
        return failed[phase * offsets.size() + offset] != 0;
    }
};

NoiseMap noise_map(const ModeNetwork& network, const AmplifierChain& chain, std::span<const std::string> ports,
                   std::span<const double> offsets, std::span<const double> phases, unsigned threads = 1,
                   const SolverLimits& limits = {});

/// |S_jk|² summed over the modes of each oscillator, per port. These are the
/// weights that multiply the oscillator bath occupations in the noise model.
/// Row order follows `ports`, column order `oscillators`.
Eigen::MatrixXd bath_weights(const ModeNetwork& network, std::span<const std::string> ports,
                             std::span<const std::string> oscillators, double probe_offset,
                             const SolverLimits& limits = {});

// --- occupancy ------------------------------------------------------------------

/// Adaptive quadrature did not reach the requested tolerance.
class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, double partial, double error_estimate)
        : NumericalError(what), partial_(partial), error_estimate_(error_estimate) {}

    double partial() const noexcept { return partial_; }
    double error_estimate() const noexcept { return error_estimate_; }

private:
    double partial_;
    double error_estimate_;
};

struct OccupancyOptions {
    double relative_tolerance = 1e-8;
    unsigned max_depth = 18;
};

/// Steady-state occupation of `mode`: ∫ dx Σ_k |(M⁻¹)_jk(x)|² n_k / (2π γ_j)
/// over the probe offset x, with baths taken from every mode. Throws
/// IntegrationError (with the partial value) when the tolerance is missed,
/// InvalidArgument for a negative tolerance or max_depth < 1.
double mechanical_occupancy(const ModeNetwork& network, const std::string& mode,
                            const OccupancyOptions& options = {});

/// mechanical_occupancy at each loop phase.
std::vector<double> occupancy_vs_phase(const ModeNetwork& network, const std::string& mode,
                                       std::span<const double> phases, const OccupancyOptions& options = {});

}  // namespace nrloop
