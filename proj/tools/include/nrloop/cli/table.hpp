#pragma once

// Tabular output (CSV with a commented header, or JSON) and the CSV data
// readers used by the fit command.

#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nrloop/fit.hpp"

namespace nrloop::cli {

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

/// %.<precision>g; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v, int precision);

/// Header comment lines carry the command and the resolved config; tables
/// follow in order, each introduced by a "# table: <name>" line.
void write_csv(std::ostream& out, const std::string& command, const nlohmann::json& config,
               const std::vector<Table>& tables, int precision);

void write_json(std::ostream& out, const std::string& command, const nlohmann::json& config,
                const std::vector<Table>& tables, int precision);

/// Reads |S|² samples from CSV text with columns offset_hz, phase_deg,
/// port_out, port_in, value and optional sigma / failed. Comment lines start
/// with '#'; only the first table is read. Rows flagged failed or holding a
/// non-finite value are skipped. Phases are returned in radians.
std::vector<Observation> read_scattering_data(std::istream& in, const std::string& source);

/// Noise samples with columns offset_hz, phase_deg, port and chain_quanta
/// (or value), optional sigma / failed.
std::vector<NoiseObservation> read_noise_data(std::istream& in, const std::string& source);

}  // namespace nrloop::cli
