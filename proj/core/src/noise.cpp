#include "nrloop/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "parallel.hpp"

namespace nrloop {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd bath_vector(const ModeNetwork& network) {
    Eigen::VectorXd n(static_cast<Eigen::Index>(network.size()));
    for (std::size_t k = 0; k < network.size(); ++k) n(static_cast<Eigen::Index>(k)) = network.modes()[k].bath_occupation;
    return n;
}

double device_quanta(const ComplexMatrix& s, Eigen::Index row, const Eigen::VectorXd& n) {
    double q = 0.0;
    for (Eigen::Index k = 0; k < s.cols(); ++k) q += std::norm(s(row, k)) * n(k);
    return q;
}

}  // namespace

AmplifierStage AmplifierChain::at(const std::string& port) const {
    const auto it = ports.find(port);
    return it == ports.end() ? AmplifierStage{} : it->second;
}

void AmplifierChain::validate() const {
    for (const auto& [port, stage] : ports) {
        if (!(stage.gain >= 1.0) || !std::isfinite(stage.gain)) {
            throw InvalidArgument("amplifier gain at port '" + port + "' must be >= 1");
        }
        if (!(stage.added_noise >= 0.0) || !std::isfinite(stage.added_noise)) {
            throw InvalidArgument("amplifier added noise at port '" + port + "' must be >= 0");
        }
    }
}

NoiseSpectrum output_noise(const ModeNetwork& network, const AmplifierChain& chain, const std::string& port,
                           std::span<const double> offsets, const SolverLimits& limits) {
    chain.validate();
    const auto row = static_cast<Eigen::Index>(network.index_of(port));
    const Eigen::VectorXd n = bath_vector(network);
    const AmplifierStage stage = chain.at(port);
    const double signal = network.modes()[static_cast<std::size_t>(row)].signal_freq;

    NoiseSpectrum out;
    out.port = port;
    out.offsets.assign(offsets.begin(), offsets.end());
    out.quanta.assign(offsets.size(), kNaN);
    out.power.assign(offsets.size(), kNaN);
    out.failed.assign(offsets.size(), 0);
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        try {
            const ComplexMatrix s = scattering(network, offsets[i], limits);
            out.quanta[i] = device_quanta(s, row, n);
        } catch (const NumericalError&) {
            out.failed[i] = 1;
            continue;
        }
        const double f = signal + offsets[i];
        out.power[i] = kPlanck * f * stage.gain * (1.0 + stage.added_noise + out.quanta[i]);
    }
    return out;
}

NoiseMap noise_map(const ModeNetwork& network, const AmplifierChain& chain, std::span<const std::string> ports,
                   std::span<const double> offsets, std::span<const double> phases, unsigned threads,
                   const SolverLimits& limits) {
    chain.validate();
    if (offsets.empty() || phases.empty() || ports.empty()) {
        throw InvalidArgument("noise map grids and port list must be non-empty");
    }
    NoiseMap map;
    map.offsets.assign(offsets.begin(), offsets.end());
    map.phases.assign(phases.begin(), phases.end());
    map.ports.assign(ports.begin(), ports.end());

    std::vector<Eigen::Index> rows;
    std::vector<AmplifierStage> stages;
    for (const std::string& p : map.ports) {
        rows.push_back(static_cast<Eigen::Index>(network.index_of(p)));
        stages.push_back(chain.at(p));
    }
    const Eigen::VectorXd n = bath_vector(network);
    const std::size_t points = phases.size() * offsets.size();
    map.quanta.assign(points * ports.size(), kNaN);
    map.power.assign(points * ports.size(), kNaN);
    map.failed.assign(points, 0);

    detail::parallel_for(phases.size(), threads, [&](std::size_t ip) {
        const ModeNetwork net = network.with_loop_phase(phases[ip]);
        for (std::size_t io = 0; io < offsets.size(); ++io) {
            ComplexMatrix s;
            try {
                s = scattering(net, offsets[io], limits);
            } catch (const NumericalError&) {
                map.failed[ip * offsets.size() + io] = 1;
                continue;
            }
            for (std::size_t p = 0; p < rows.size(); ++p) {
                const double q = device_quanta(s, rows[p], n);
                const double f = net.modes()[static_cast<std::size_t>(rows[p])].signal_freq + offsets[io];
                const std::size_t at = map.index(ip, io, p);
                map.quanta[at] = q;
                map.power[at] = kPlanck * f * stages[p].gain * (1.0 + stages[p].added_noise + q);
            }
        }
    });
    return map;
}

Eigen::MatrixXd bath_weights(const ModeNetwork& network, std::span<const std::string> ports,
                             std::span<const std::string> oscillators, double probe_offset,
                             const SolverLimits& limits) {
    const ComplexMatrix s = scattering(network, probe_offset, limits);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ports.size()),
                                              static_cast<Eigen::Index>(oscillators.size()));
    for (std::size_t c = 0; c < oscillators.size(); ++c) {
        bool found = false;
        for (std::size_t k = 0; k < network.size(); ++k) {
            if (network.modes()[k].oscillator != oscillators[c]) continue;
            found = true;
            for (std::size_t r = 0; r < ports.size(); ++r) {
                const auto row = static_cast<Eigen::Index>(network.index_of(ports[r]));
                w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +=
                    std::norm(s(row, static_cast<Eigen::Index>(k)));
            }
        }
        if (!found) throw InvalidArgument("no mode belongs to oscillator '" + oscillators[c] + "'");
    }
    return w;
}

double mechanical_occupancy(const ModeNetwork& network, const std::string& mode, const OccupancyOptions& options) {
    if (!(options.relative_tolerance >= 0.0) || options.max_depth < 1) {
        throw InvalidArgument("occupancy: tolerance must be non-negative and max_depth at least 1");
    }
    const auto j = static_cast<Eigen::Index>(network.index_of(mode));
    const Eigen::VectorXd n = bath_vector(network);
    if (n.maxCoeff() == 0.0) return 0.0;
    const double width = network.modes()[static_cast<std::size_t>(j)].linewidth;

    // det M(x) vanishes at the eigenvalues of −diag(γ)·M(0); split the real
    // line at their real parts and a few widths either side so that every
    // narrow resonance sits at a panel boundary.
    const ComplexMatrix m0 = assemble_M(network, 0.0);
    ComplexMatrix scaled = m0;
    for (std::size_t k = 0; k < network.size(); ++k) {
        scaled.row(static_cast<Eigen::Index>(k)) *= -network.modes()[k].linewidth;
    }
    const Eigen::VectorXcd poles = scaled.eigenvalues();
    std::vector<double> cuts;
    for (Eigen::Index p = 0; p < poles.size(); ++p) {
        const double re = poles(p).real(), w = std::abs(poles(p).imag());
        for (double k : {-10.0, -1.0, 0.0, 1.0, 10.0}) cuts.push_back(re + k * w);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               cuts.end());

    Eigen::VectorXd inv_width(static_cast<Eigen::Index>(network.size()));
    for (std::size_t k = 0; k < network.size(); ++k) inv_width(static_cast<Eigen::Index>(k)) = 1.0 / network.modes()[k].linewidth;
    auto spectrum = [&](double x) {
        ComplexMatrix m = m0;
        m.diagonal() += (x * inv_width).cast<Complex>();
        const ComplexMatrix inv = m.partialPivLu().inverse();
        double s = 0.0;
        for (Eigen::Index k = 0; k < inv.cols(); ++k) s += std::norm(inv(j, k)) * n(k);
        return s;
    };

    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0, error = 0.0;
    auto panel = [&](double a, double b) {
        double e = 0.0;
        total += gauss_kronrod<double, 61>::integrate(spectrum, a, b, options.max_depth,
                                                      options.relative_tolerance * 1e-2, &e);
        error += e;
    };
    // Tails decay as 1/x²; x = from/t maps each onto a smooth integrand over t ∈ (0, 1].
    auto tail = [&](double from) {
        double e = 0.0;
        const auto mapped = [&](double t) { return spectrum(from / t) * std::abs(from) / (t * t); };
        total += gauss_kronrod<double, 61>::integrate(mapped, 0.0, 1.0, options.max_depth,
                                                      options.relative_tolerance * 1e-2, &e);
        error += e;
    };
    const double reach = std::max({std::abs(cuts.front()), std::abs(cuts.back()), 1.0}) * 2.0;
    cuts.insert(cuts.begin(), -reach);
    cuts.push_back(reach);
    tail(-reach);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) panel(cuts[i], cuts[i + 1]);
    tail(reach);

    const double value = total / (2.0 * M_PI * width);
    const double err = error / (2.0 * M_PI * width);
    if (!std::isfinite(value) || err > options.relative_tolerance * std::max(std::abs(value), 1e-300)) {
        throw IntegrationError("occupancy integral of mode '" + mode + "' did not converge", value, err);
    }
    return value;
}

std::vector<double> occupancy_vs_phase(const ModeNetwork& network, const std::string& mode,
                                       std::span<const double> phases, const OccupancyOptions& options) {
    std::vector<double> out;
    out.reserve(phases.size());
    for (double phi : phases) out.push_back(mechanical_occupancy(network.with_loop_phase(phi), mode, options));
    return out;
}

}  // namespace nrloop
