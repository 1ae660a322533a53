#include <cmath>
#include <limits>

#include "nrloop/error.hpp"
#include "nrloop/network.hpp"
#include "parallel.hpp"

namespace nrloop {

std::size_t SweepResult::failure_count() const noexcept {
    std::size_t n = 0;
    for (auto f : failed) n += f != 0;
    return n;
}

std::vector<PortPair> all_port_pairs(const ModeNetwork& network) {
    std::vector<PortPair> pairs;
    pairs.reserve(network.size() * network.size());
    for (const Mode& out : network.modes()) {
        for (const Mode& in : network.modes()) pairs.push_back({out.id, in.id});
    }
    return pairs;
}

SweepResult sweep_scattering(const ModeNetwork& network, std::span<const double> offsets,
                             std::span<const double> phases, std::span<const PortPair> pairs,
                             const SweepOptions& options) {
    if (offsets.empty() || phases.empty()) throw InvalidArgument("sweep grids must be non-empty");

    SweepResult result;
    result.offsets.assign(offsets.begin(), offsets.end());
    result.phases.assign(phases.begin(), phases.end());
    result.pairs = pairs.empty() ? all_port_pairs(network)
                                 : std::vector<PortPair>(pairs.begin(), pairs.end());

    std::vector<std::pair<Eigen::Index, Eigen::Index>> idx;
    idx.reserve(result.pairs.size());
    for (const PortPair& p : result.pairs) {
        idx.emplace_back(static_cast<Eigen::Index>(network.index_of(p.out)),
                         static_cast<Eigen::Index>(network.index_of(p.in)));
    }

    const std::size_t n_points = phases.size() * offsets.size();
    result.power.assign(n_points * idx.size(), std::numeric_limits<double>::quiet_NaN());
    if (options.keep_complex) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        result.amplitude.assign(n_points * idx.size(), Complex(nan, nan));
    }
    result.failed.assign(n_points, 0);

    // One work item per phase row: each row owns a network copy and a
    // disjoint slice of the output arrays.
    detail::parallel_for(phases.size(), options.threads, [&](std::size_t ip) {
        const ModeNetwork row = network.with_loop_phase(phases[ip]);
        for (std::size_t io = 0; io < offsets.size(); ++io) {
            ComplexMatrix s;
            try {
                s = scattering(row, offsets[io], options.limits);
            } catch (const NumericalError&) {
                result.failed[ip * offsets.size() + io] = 1;
                continue;
            }
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const Complex v = s(idx[k].first, idx[k].second);
                const std::size_t at = result.index(ip, io, k);
                result.power[at] = std::norm(v);
                if (options.keep_complex) result.amplitude[at] = v;
            }
        }
    });
    return result;
}

}  // namespace nrloop
