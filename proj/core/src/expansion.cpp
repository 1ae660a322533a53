#include "nrloop/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

#include "nrloop/error.hpp"

namespace nrloop {
namespace {

constexpr std::array<const char*, 4> kOscillatorNames{"cavity1", "cavity2", "mech1", "mech2"};

void validate_device(const DeviceModel& d) {
    auto positive = [](double v, const std::string& what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("device: " + what + " must be positive");
    };
    for (int i = 0; i < 2; ++i) {
        const std::string s = std::to_string(i + 1);
        positive(d.cavity_freq[i], "cavity frequency " + s);
        positive(d.kappa[i], "cavity linewidth " + s);
        positive(d.mech_freq[i], "mechanical frequency " + s);
        positive(d.gamma[i], "mechanical linewidth " + s);
        if (!(d.eta[i] >= 0.0 && d.eta[i] <= 1.0)) throw InvalidArgument("device: eta" + s + " must lie in [0, 1]");
        if (!(d.mech_occupation[i] >= 0.0)) throw InvalidArgument("device: mechanical occupation must be non-negative");
        if (!(d.cavity_occupation[i] >= 0.0)) throw InvalidArgument("device: cavity occupation must be non-negative");
        for (int k = 0; k < 2; ++k) {
            if (!(d.g0[i][k] > 0.0) || !std::isfinite(d.g0[i][k])) {
                throw InvalidArgument("device: vacuum coupling g0_" + s + std::to_string(k + 1) +
                                      " is missing or non-positive");
            }
        }
    }
    for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
            if (!(d.kappa[j] < d.mech_freq[k])) {
                throw InvalidArgument("device: resolved-sideband regime requires kappa < mechanical frequency");
            }
        }
    }
    if (!(d.cross_coupling_scale >= 0.0) || !std::isfinite(d.cross_coupling_scale)) {
        throw InvalidArgument("device: cross-coupling scale must be non-negative");
    }
}

DriveSet canonical_drives(const DriveSet& drives) {
    DriveSet out = drives;
    std::sort(out.begin(), out.end(), [](const DriveTone& a, const DriveTone& b) {
        return std::pair(a.cavity, a.mech) < std::pair(b.cavity, b.mech);
    });
    for (int i = 0; i < 4; ++i) {
        const DriveTone& t = out[static_cast<std::size_t>(i)];
        if (t.cavity != i / 2 + 1 || t.mech != i % 2 + 1) {
            throw InvalidArgument("drives: exactly one tone per cavity-mechanical pair is required");
        }
        if (!(t.coupling >= 0.0) || !std::isfinite(t.coupling) || !std::isfinite(t.frequency) ||
            !std::isfinite(t.phase)) {
            throw InvalidArgument("drives: coupling must be non-negative and all fields finite");
        }
    }
    return out;
}

std::string drive_label(const DriveTone& t) {
    return "d" + std::to_string(t.cavity) + std::to_string(t.mech);
}

struct Node {
    int osc;  // 0, 1 cavities; 2, 3 mechanical
    double freq;
    int depth;
};

struct Hop {
    int osc;
    double freq;
    std::size_t drive;
    double beta;
};

class Expander {
public:
    Expander(const DeviceModel& device, const DriveSet& drives, const ExpansionOptions& options)
        : device_(device), drives_(drives), options_(options) {}

    // Normalized coupling that drive `d` induces between its cavity and
    // mechanical mode `mech` (0-based).
    double beta(std::size_t d, int mech) const {
        const DriveTone& t = drives_[d];
        const int j = t.cavity - 1, k = t.mech - 1;
        double g = t.coupling * device_.g0[j][mech] / device_.g0[j][k];
        if (mech != k) g *= device_.cross_coupling_scale;
        return g / std::sqrt(device_.kappa[j] * device_.gamma[mech]);
    }

    std::vector<Hop> hops(const Node& n) const {
        std::vector<Hop> out;
        if (n.osc < 2) {
            for (int mech = 0; mech < 2; ++mech) {
                for (std::size_t d = 0; d < drives_.size(); ++d) {
                    if (drives_[d].cavity - 1 != n.osc) continue;
                    out.push_back({2 + mech, n.freq - drives_[d].frequency, d, beta(d, mech)});
                }
            }
        } else {
            for (std::size_t d = 0; d < drives_.size(); ++d) {
                out.push_back({drives_[d].cavity - 1, n.freq + drives_[d].frequency, d, beta(d, n.osc - 2)});
            }
        }
        return out;
    }

    std::ptrdiff_t find(int osc, double freq) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].osc == osc && std::abs(nodes_[i].freq - freq) <= options_.merge_tolerance) {
                return static_cast<std::ptrdiff_t>(i);
            }
        }
        return -1;
    }

    ModeNetwork build() {
        const double x1 = device_.cavity_freq[0] - drives_[0].frequency;  // b1 via (1,1)
        const double x2 = device_.cavity_freq[0] - drives_[1].frequency;  // b2 via (1,2)
        const double a2 = x1 + drives_[2].frequency;                      // a2 via (2,1)
        const double a2_alt = x2 + drives_[3].frequency;                  // a2 via (2,2)
        if (std::abs(a2 - a2_alt) > options_.merge_tolerance) {
            throw InvalidArgument("drives: frequencies do not close the loop (cavity 2 signal differs by " +
                                  std::to_string(a2 - a2_alt) + " Hz between the two paths)");
        }
        nodes_ = {{0, device_.cavity_freq[0], 0}, {1, a2, 0}, {2, x1, 0}, {3, x2, 0}};

        std::deque<std::size_t> queue{0, 1, 2, 3};
        while (!queue.empty()) {
            const Node n = nodes_[queue.front()];
            queue.pop_front();
            if (n.depth >= options_.depth) continue;
            for (const Hop& h : hops(n)) {
                if (h.beta <= 0.0 || find(h.osc, h.freq) >= 0) continue;
                nodes_.push_back({h.osc, h.freq, n.depth + 1});
                queue.push_back(nodes_.size() - 1);
            }
        }

        std::vector<Mode> modes;
        modes.reserve(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            const bool cavity = n.osc < 2;
            const int o = cavity ? n.osc : n.osc - 2;
            Mode m;
            const std::string short_name = std::string(cavity ? "a" : "b") + std::to_string(o + 1);
            m.id = i < 4 ? short_name : short_name + ":" + std::to_string(i + 1);
            m.oscillator = kOscillatorNames[static_cast<std::size_t>(n.osc)];
            m.resonance_freq = cavity ? device_.cavity_freq[o] : device_.mech_freq[o];
            m.linewidth = cavity ? device_.kappa[o] : device_.gamma[o];
            m.coupling_efficiency = cavity ? device_.eta[o] : 1.0;
            m.signal_freq = n.freq;
            m.bath_occupation = cavity ? device_.cavity_occupation[o] : device_.mech_occupation[o];
            modes.push_back(std::move(m));
        }

        std::vector<Coupling> couplings;
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t c = 0; c < nodes_.size(); ++c) {
            if (nodes_[c].osc >= 2) continue;
            for (const Hop& h : hops(nodes_[c])) {
                if (h.beta <= 0.0) continue;
                const auto target = find(h.osc, h.freq);
                if (target < 0) continue;
                const auto t = static_cast<std::size_t>(target);
                if (!seen.insert({c, t}).second) {
                    throw InvalidArgument("drives: two tones couple modes '" + modes[c].id + "' and '" +
                                          modes[t].id + "' at the same frequency");
                }
                const DriveTone& tone = drives_[h.drive];
                couplings.push_back({modes[c].id, modes[t].id, h.beta, 0.0, drive_label(tone),
                                     tone.cavity == 1 && tone.mech == 2});
            }
        }
        return ModeNetwork(std::move(modes), std::move(couplings), loop_phase_of(drives_));
    }

private:
    const DeviceModel& device_;
    const DriveSet& drives_;
    const ExpansionOptions& options_;
    std::vector<Node> nodes_;
};

}  // namespace

double red_sideband(const DeviceModel& device, int cavity, int mech) {
    if (cavity < 1 || cavity > 2 || mech < 1 || mech > 2) throw InvalidArgument("cavity/mech index must be 1 or 2");
    return device.cavity_freq[cavity - 1] - device.mech_freq[mech - 1];
}

DriveSet make_drives(const DeviceModel& device, const std::array<double, 4>& coupling,
                     const std::array<double, 4>& detuning, double loop_phase) {
    DriveSet out;
    for (int i = 0; i < 4; ++i) {
        DriveTone& t = out[static_cast<std::size_t>(i)];
        t.cavity = i / 2 + 1;
        t.mech = i % 2 + 1;
        t.frequency = red_sideband(device, t.cavity, t.mech) + detuning[static_cast<std::size_t>(i)];
        t.coupling = coupling[static_cast<std::size_t>(i)];
        t.phase = (i == 1) ? loop_phase : 0.0;
    }
    return out;
}

double loop_phase_of(const DriveSet& drives) {
    const DriveSet d = canonical_drives(drives);
    return d[1].phase - d[0].phase + d[2].phase - d[3].phase;
}

std::array<double, 4> drive_cooperativities(const DeviceModel& device, const DriveSet& drives) {
    const DriveSet d = canonical_drives(drives);
    std::array<double, 4> c{};
    for (std::size_t i = 0; i < 4; ++i) {
        const int j = d[i].cavity - 1, k = d[i].mech - 1;
        c[i] = 4.0 * d[i].coupling * d[i].coupling / (device.kappa[j] * device.gamma[k]);
    }
    return c;
}

ModeNetwork build_expanded_network(const DeviceModel& device, const DriveSet& drives,
                                   const ExpansionOptions& options) {
    validate_device(device);
    if (options.depth < 1) throw InvalidArgument("expansion depth must be at least 1");
    if (!(options.merge_tolerance > 0.0)) throw InvalidArgument("merge tolerance must be positive");
    const DriveSet canonical = canonical_drives(drives);
    return Expander(device, canonical, options).build();
}

std::vector<std::string> auxiliary_mode_ids(const ModeNetwork& network) {
    std::vector<std::string> out;
    for (const Mode& m : network.modes()) {
        if (std::find(kFourModeIds.begin(), kFourModeIds.end(), m.id) == kFourModeIds.end()) out.push_back(m.id);
    }
    return out;
}

ComplexMatrix reduce_mode(const ComplexMatrix& m, std::size_t k, double pivot_tolerance) {
    const Eigen::Index n = m.rows();
    const auto kk = static_cast<Eigen::Index>(k);
    if (m.cols() != n || kk >= n) throw InvalidArgument("reduce_mode: index out of range");
    const Complex pivot = m(kk, kk);
    if (!(std::abs(pivot) >= pivot_tolerance)) {
        throw NumericalError("pivot too small; mode cannot be eliminated at this frequency");
    }
    ComplexMatrix out(n - 1, n - 1);
    for (Eigen::Index i = 0, oi = 0; i < n; ++i) {
        if (i == kk) continue;
        for (Eigen::Index j = 0, oj = 0; j < n; ++j) {
            if (j == kk) continue;
            out(oi, oj) = m(i, j) - m(i, kk) * m(kk, j) / pivot;
            ++oj;
        }
        ++oi;
    }
    return out;
}

Reduction reduce_network(const ModeNetwork& network, std::span<const std::string> retained,
                         double probe_offset, double pivot_tolerance) {
    std::vector<bool> keep(network.size(), false);
    for (const std::string& id : retained) {
        const std::size_t i = network.index_of(id);
        if (keep[i]) throw InvalidArgument("reduce: mode '" + id + "' listed twice");
        keep[i] = true;
    }

    Reduction out;
    ComplexMatrix m = assemble_M(network, probe_offset);
    std::vector<std::size_t> current(network.size());
    for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;

    for (std::size_t i = network.size(); i-- > 0;) {
        if (keep[i]) continue;
        const auto pos = static_cast<std::size_t>(std::find(current.begin(), current.end(), i) - current.begin());
        const auto p = static_cast<Eigen::Index>(pos);
        const Complex pivot = m(p, p);
        double worst = 0.0;
        if (std::abs(pivot) >= pivot_tolerance) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                if (r == p) continue;
                for (Eigen::Index c = 0; c < m.cols(); ++c) {
                    if (c != p) worst = std::max(worst, std::abs(m(r, p) * m(p, c) / pivot));
                }
            }
        }
        m = reduce_mode(m, pos, pivot_tolerance);
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(pos));
        out.eliminated.push_back(network.modes()[i].id);
        out.max_correction.push_back(worst);
    }

    // `current` is in network order; permute into the requested order.
    const auto r = static_cast<Eigen::Index>(retained.size());
    out.matrix.resize(r, r);
    std::vector<Eigen::Index> pos(retained.size());
    for (std::size_t a = 0; a < retained.size(); ++a) {
        const std::size_t idx = network.index_of(retained[a]);
        pos[a] = std::find(current.begin(), current.end(), idx) - current.begin();
    }
    for (Eigen::Index a = 0; a < r; ++a) {
        for (Eigen::Index b = 0; b < r; ++b) out.matrix(a, b) = m(pos[a], pos[b]);
    }
    out.retained.assign(retained.begin(), retained.end());
    return out;
}

ComplexMatrix reduced_scattering(const ModeNetwork& network, const Reduction& reduction, double probe_offset,
                                 const SolverLimits& limits) {
    Eigen::VectorXd eta(static_cast<Eigen::Index>(reduction.retained.size()));
    for (std::size_t a = 0; a < reduction.retained.size(); ++a) {
        eta(static_cast<Eigen::Index>(a)) = network.mode(reduction.retained[a]).coupling_efficiency;
    }
    return scattering_from_matrix(reduction.matrix, eta, probe_offset, limits);
}

double effective_occupation(double gamma, double occupation, double gamma_eff) {
    if (!(gamma > 0.0) || !(gamma_eff > 0.0)) throw InvalidArgument("linewidths must be positive");
    if (!(occupation >= 0.0)) throw InvalidArgument("occupation must be non-negative");
    return gamma * occupation / gamma_eff;
}

EffectiveParameters effective_parameters(const ModeNetwork& network, double probe_offset) {
    const std::vector<std::string> principal(kFourModeIds.begin(), kFourModeIds.end());
    EffectiveParameters p;
    p.reduction = reduce_network(network, principal, probe_offset);
    const ComplexMatrix& m = p.reduction.matrix;

    std::array<double, 4> width{};
    for (Eigen::Index i = 0; i < 4; ++i) {
        const Mode& mode = network.mode(principal[static_cast<std::size_t>(i)]);
        width[static_cast<std::size_t>(i)] = 2.0 * m(i, i).imag() * mode.linewidth;
    }
    p.kappa_eff = {width[0], width[1]};
    p.gamma_eff = {width[2], width[3]};
    for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
            const Eigen::Index a = j, b = 2 + k;
            p.cooperativity[static_cast<std::size_t>(2 * j + k)] =
                std::abs(m(a, b) * m(b, a)) / (m(a, a).imag() * m(b, b).imag());
        }
    }
    for (int k = 0; k < 2; ++k) {
        const Mode& mech = network.mode(principal[static_cast<std::size_t>(2 + k)]);
        const Eigen::Index b = 2 + k;
        p.n_eff[static_cast<std::size_t>(k)] =
            effective_occupation(mech.linewidth, mech.bath_occupation, p.gamma_eff[static_cast<std::size_t>(k)]);
        p.delta_eff[static_cast<std::size_t>(k)] = m(b, b).real() / (2.0 * m(b, b).imag());
    }
    // Loop a1 → b2 → a2 → b1 → a1.
    p.loop_phase = std::arg(m(0, 3) * m(3, 1) * m(1, 2) * m(2, 0));
    return p;
}

EffectiveParameters effective_parameters(const DeviceModel& device, const DriveSet& drives,
                                         const ExpansionOptions& options, double probe_offset) {
    return effective_parameters(build_expanded_network(device, drives, options), probe_offset);
}

FourModeModel effective_model(const DeviceModel& device, const DriveSet& drives, const ExpansionOptions& options) {
    const EffectiveParameters p = effective_parameters(device, drives, options);
    FourModeModel m;
    m.cooperativity = p.cooperativity;
    m.eta = device.eta;
    m.kappa = p.kappa_eff;
    m.gamma = p.gamma_eff;
    m.delta = p.delta_eff;
    m.loop_phase = p.loop_phase;
    m.cavity_freq = device.cavity_freq;
    m.mech_freq = device.mech_freq;
    m.mech_occupation = p.n_eff;
    m.cavity_occupation = device.cavity_occupation;
    return m;
}

}  // namespace nrloop
