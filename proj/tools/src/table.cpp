#include "nrloop/cli/table.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numbers>
#include <sstream>

#include "nrloop/cli/config.hpp"

namespace nrloop::cli {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

std::string cell_text(const Cell& c, int precision) {
    if (const double* d = std::get_if<double>(&c)) return format_number(*d, precision);
    if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

// Quotes a CSV field only when it needs it.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    out.push_back(field);
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    if (s.empty()) throw ConfigError(where + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ConfigError(where + ": '" + s + "' is not a number");
    return v;
}

struct CsvRows {
    std::map<std::string, std::size_t> column;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // line number, fields
};

CsvRows read_first_table(std::istream& in, const std::string& source) {
    CsvRows t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (have_header && !t.rows.empty()) break;
            continue;
        }
        if (line[0] == '#') {
            if (have_header && line.rfind("# table:", 0) == 0) break;
            continue;
        }
        std::vector<std::string> fields = split_csv(line);
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i) t.column[fields[i]] = i;
            width = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != width) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                              " fields, found " + std::to_string(fields.size()));
        }
        t.rows.emplace_back(lineno, std::move(fields));
    }
    if (!have_header) throw ConfigError(source + ": no header line");
    if (t.rows.empty()) throw ConfigError(source + ": no data rows");
    return t;
}

std::size_t require_column(const CsvRows& t, const std::string& name, const std::string& source) {
    const auto it = t.column.find(name);
    if (it == t.column.end()) throw ConfigError(source + ": missing column '" + name + "'");
    return it->second;
}

std::optional<std::size_t> optional_column(const CsvRows& t, const std::string& name) {
    const auto it = t.column.find(name);
    if (it == t.column.end()) return std::nullopt;
    return it->second;
}

}  // namespace

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("table '" + name + "': row width mismatch");
    rows.push_back(std::move(row));
}

std::string format_number(double v, int precision) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v == 0.0 ? 0.0 : v);
    return buf;
}

void write_csv(std::ostream& out, const std::string& command, const json& config, const std::vector<Table>& tables,
               int precision) {
    out << "# nrloop " << command << "\n";
    out << "# config: " << config.dump() << "\n";
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const Table& table = tables[t];
        if (t > 0) out << "\n";
        out << "# table: " << table.name << "\n";
        for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << csv_field(table.columns[c]);
        out << "\n";
        for (const auto& row : table.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(cell_text(row[c], precision));
            out << "\n";
        }
    }
}

void write_json(std::ostream& out, const std::string& command, const json& config, const std::vector<Table>& tables,
                int precision) {
    json doc;
    doc["command"] = command;
    doc["config"] = config;
    json jt = json::object();
    for (const Table& table : tables) {
        json rows = json::array();
        for (const auto& row : table.rows) {
            json r = json::object();
            for (std::size_t c = 0; c < row.size(); ++c) {
                const Cell& cell = row[c];
                if (const double* d = std::get_if<double>(&cell)) {
                    // Round-trip through the text form so JSON and CSV agree.
                    r[table.columns[c]] = std::isfinite(*d) ? json(std::strtod(format_number(*d, precision).c_str(), nullptr))
                                                             : json(nullptr);
                } else if (const long long* i = std::get_if<long long>(&cell)) {
                    r[table.columns[c]] = *i;
                } else {
                    r[table.columns[c]] = std::get<std::string>(cell);
                }
            }
            rows.push_back(std::move(r));
        }
        jt[table.name] = std::move(rows);
    }
    doc["tables"] = std::move(jt);
    out << doc.dump(2) << "\n";
}

std::vector<Observation> read_scattering_data(std::istream& in, const std::string& source) {
    const CsvRows t = read_first_table(in, source);
    const std::size_t c_off = require_column(t, "offset_hz", source);
    const std::size_t c_phase = require_column(t, "phase_deg", source);
    const std::size_t c_out = require_column(t, "port_out", source);
    const std::size_t c_in = require_column(t, "port_in", source);
    const std::size_t c_val = require_column(t, "value", source);
    const auto c_sigma = optional_column(t, "sigma");
    const auto c_failed = optional_column(t, "failed");

    std::vector<Observation> obs;
    for (const auto& [lineno, f] : t.rows) {
        const std::string where = source + ":" + std::to_string(lineno);
        if (c_failed && parse_number(f[*c_failed], where) != 0.0) continue;
        Observation o;
        o.offset = parse_number(f[c_off], where);
        o.phase = parse_number(f[c_phase], where) * kDeg;
        o.port_out = f[c_out];
        o.port_in = f[c_in];
        o.value = parse_number(f[c_val], where);
        if (c_sigma) o.sigma = parse_number(f[*c_sigma], where);
        if (!std::isfinite(o.value)) continue;
        if (!std::isfinite(o.offset) || !std::isfinite(o.phase) || !(o.sigma > 0.0)) {
            throw ConfigError(where + ": offset and phase must be finite and sigma positive");
        }
        obs.push_back(std::move(o));
    }
    return obs;
}

std::vector<NoiseObservation> read_noise_data(std::istream& in, const std::string& source) {
    const CsvRows t = read_first_table(in, source);
    const std::size_t c_off = require_column(t, "offset_hz", source);
    const std::size_t c_phase = require_column(t, "phase_deg", source);
    const std::size_t c_port = require_column(t, "port", source);
    const auto c_chain = optional_column(t, "chain_quanta");
    const std::size_t c_val = c_chain ? *c_chain : require_column(t, "value", source);
    const auto c_sigma = optional_column(t, "sigma");
    const auto c_failed = optional_column(t, "failed");

    std::vector<NoiseObservation> obs;
    for (const auto& [lineno, f] : t.rows) {
        const std::string where = source + ":" + std::to_string(lineno);
        if (c_failed && parse_number(f[*c_failed], where) != 0.0) continue;
        NoiseObservation o;
        o.offset = parse_number(f[c_off], where);
        o.phase = parse_number(f[c_phase], where) * kDeg;
        o.port = f[c_port];
        o.value = parse_number(f[c_val], where);
        if (c_sigma) o.sigma = parse_number(f[*c_sigma], where);
        if (!std::isfinite(o.value)) continue;
        if (!std::isfinite(o.offset) || !std::isfinite(o.phase) || !(o.sigma > 0.0)) {
            throw ConfigError(where + ": offset and phase must be finite and sigma positive");
        }
        obs.push_back(std::move(o));
    }
    return obs;
}

}  // namespace nrloop::cli
