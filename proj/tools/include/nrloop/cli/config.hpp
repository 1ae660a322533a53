#pragma once

// Run configuration for the nrloop tool. JSON on disk; unknown keys are
// rejected. Frequencies are in Hz and phases in degrees in the file; every
// phase is converted to radians here.

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrloop/expansion.hpp"
#include "nrloop/isolator.hpp"
#include "nrloop/network.hpp"
#include "nrloop/noise.hpp"

namespace nrloop::cli {

/// Malformed or inconsistent configuration or data file (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { expanded, four_mode };

struct SweepConfig {
    std::vector<double> offsets{0.0};  ///< Hz
    std::optional<std::vector<double>> phases;  ///< rad
    std::vector<PortPair> pairs;
};

struct NoiseConfig {
    std::vector<std::string> ports{"a1", "a2"};
    AmplifierChain chain;
    std::map<std::string, double> bath_occupations;  ///< by oscillator
    std::vector<std::string> occupancy_modes;
};

struct FitConfig {
    std::string data;
    std::vector<std::string> free;
    std::map<std::string, std::array<double, 2>> bounds;
    std::map<std::string, double> initial;
    int restarts = 0;
    int max_iterations = 500;
    std::string noise_data;
    std::vector<std::string> noise_oscillators{"mech1", "mech2"};
    bool fit_added_noise = false;
};

struct OutputConfig {
    std::string format = "csv";
    std::string path;
    int precision = 12;
};

struct RunConfig {
    nlohmann::json raw;
    ModelKind model = ModelKind::expanded;

    std::optional<DeviceModel> device;
    std::optional<DriveSet> drives;
    ExpansionOptions expansion;

    std::optional<FourModeModel> effective;
    std::optional<double> optimize_at_phase;  ///< rad

    std::optional<IsolatorSpec> design;

    SweepConfig sweep;
    NoiseConfig noise;
    std::optional<FitConfig> fit;
    OutputConfig output;
    SolverLimits limits;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Network described by the `model` section, with noise.bath_occupations applied.
ModeNetwork build_network(const RunConfig& config);

/// Four-mode model of the `effective` section after optional detuning optimization.
FourModeModel resolved_effective(const RunConfig& config);

/// Couplings and red-sideband detunings of the configured drives, in
/// (1,1), (1,2), (2,1), (2,2) order.
std::array<double, 4> drive_couplings(const RunConfig& config);
std::array<double, 4> drive_detunings(const RunConfig& config);

}  // namespace nrloop::cli
