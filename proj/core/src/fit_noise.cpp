#include <algorithm>
#include <cmath>
#include <map>

#include "nrloop/error.hpp"
#include "nrloop/fit.hpp"

namespace nrloop {

Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
    const Eigen::Index m = a.rows(), n = a.cols();
    if (b.size() != m) throw InvalidArgument("nnls: dimension mismatch");
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                       static_cast<double>(std::max(m, n));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
        }
        Eigen::MatrixXd ap(m, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) ap.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
        const Eigen::VectorXd sp = ap.colPivHouseholderQr().solve(b);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        for (std::size_t c = 0; c < cols.size(); ++c) s(cols[c]) = sp(static_cast<Eigen::Index>(c));
        return s;
    };

    for (int outer = 0; outer < max_iterations; ++outer) {
        const Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index t = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
                best = w(j);
                t = j;
            }
        }
        if (t < 0) return x;
        passive[static_cast<std::size_t>(t)] = true;

        for (int inner = 0; inner < max_iterations; ++inner) {
            const Eigen::VectorXd s = solve_passive();
            bool feasible = true;
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x(j) / (x(j) - s(j)));
                }
            }
            if (feasible) {
                x = s;
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
    }
    throw NumericalError("nnls: iteration limit reached");
}

FitReport fit_noise(const NoiseFitProblem& problem, const ModelParametrization& scattering_model,
                    const FitOptions& options) {
    problem.chain.validate();
    if (problem.oscillators.empty()) throw InvalidArgument("noise fit needs at least one oscillator");
    const std::vector<double> values = scattering_model.values();
    const ModeNetwork base = scattering_model.network(values);
    const double shift = values[scattering_model.index_of("phase_offset")];

    std::vector<std::string> columns;
    std::map<std::string, Eigen::Index> osc_column;
    for (const std::string& osc : problem.oscillators) {
        if (osc_column.count(osc)) throw InvalidArgument("oscillator '" + osc + "' listed twice");
        const bool exists = std::any_of(base.modes().begin(), base.modes().end(),
                                        [&](const Mode& md) { return md.oscillator == osc; });
        if (!exists) throw InvalidArgument("no mode belongs to oscillator '" + osc + "'");
        osc_column[osc] = static_cast<Eigen::Index>(columns.size());
        columns.push_back("n_" + osc);
    }
    std::map<std::string, Eigen::Index> amp_column;
    if (problem.fit_added_noise) {
        for (const NoiseObservation& o : problem.observations) {
            if (amp_column.count(o.port)) continue;
            amp_column[o.port] = static_cast<Eigen::Index>(columns.size());
            columns.push_back("n_amp_" + o.port);
        }
    }

    const auto m = static_cast<Eigen::Index>(problem.observations.size());
    const auto p = static_cast<Eigen::Index>(columns.size());
    if (m < p) {
        throw IllPosedFitError("noise fit is underdetermined: " + std::to_string(m) + " observations for " +
                               std::to_string(p) + " occupations");
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, p);
    Eigen::VectorXd y(m);
    std::map<double, ModeNetwork> by_phase;
    for (Eigen::Index i = 0; i < m; ++i) {
        const NoiseObservation& o = problem.observations[static_cast<std::size_t>(i)];
        if (!(o.sigma > 0.0) || !std::isfinite(o.value)) {
            throw InvalidArgument("noise observations need finite values and positive sigma");
        }
        auto it = by_phase.find(o.phase);
        if (it == by_phase.end()) it = by_phase.emplace(o.phase, base.with_loop_phase(o.phase + shift)).first;
        const ModeNetwork& net = it->second;
        const auto row = static_cast<Eigen::Index>(net.index_of(o.port));
        const ComplexMatrix s = scattering(net, o.offset, options.limits);

        double fixed = 0.0;
        for (std::size_t k = 0; k < net.size(); ++k) {
            const Mode& md = net.modes()[k];
            const double w = std::norm(s(row, static_cast<Eigen::Index>(k)));
            const auto col = osc_column.find(md.oscillator);
            if (col != osc_column.end()) {
                a(i, col->second) += w;
            } else {
                fixed += w * md.bath_occupation;
            }
        }
        double floor = 1.0;
        if (problem.fit_added_noise) {
            a(i, amp_column.at(o.port)) = 1.0;
        } else {
            floor += problem.chain.at(o.port).added_noise;
        }
        y(i) = (o.value - floor - fixed) / o.sigma;
        a.row(i) /= o.sigma;
    }

    // Columns that move together cannot be separated by any data set.
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
    std::vector<bool> involved(static_cast<std::size_t>(p), false);
    bool deficient = false;
    for (Eigen::Index c = 0; c < sv.size(); ++c) {
        if (sv(c) > cutoff) continue;
        deficient = true;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (std::abs(svd.matrixV()(k, c)) > 1e-8) involved[static_cast<std::size_t>(k)] = true;
        }
    }
    if (deficient) {
        std::string names;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (!involved[static_cast<std::size_t>(k)]) continue;
            if (!names.empty()) names += ", ";
            names += columns[static_cast<std::size_t>(k)];
        }
        throw IllPosedFitError("noise design matrix is rank deficient; indistinguishable baths: " + names);
    }

    const Eigen::VectorXd x = nonnegative_least_squares(a, y);

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p);
    for (const auto& [osc, c] : osc_column) {
        for (const Mode& md : base.modes()) {
            if (md.oscillator == osc) {
                x0(c) = md.bath_occupation;
                break;
            }
        }
    }
    for (const auto& [port, c] : amp_column) x0(c) = problem.chain.at(port).added_noise;

    FitReport report;
    report.observations = static_cast<std::size_t>(m);
    report.residual_norm = (a * x - y).norm();
    report.initial_residual_norm = (a * x0 - y).norm();
    report.iterations = 1;
    report.converged = true;
    report.termination = "non-negative least squares";

    const double dof = static_cast<double>(std::max<Eigen::Index>(m - p, 1));
    const double s2 = report.residual_norm * report.residual_norm / dof;
    const Eigen::MatrixXd cov = (a.transpose() * a).inverse() * s2;
    for (Eigen::Index k = 0; k < p; ++k) {
        report.parameters.push_back({columns[static_cast<std::size_t>(k)], x(k), x0(k),
                                     std::sqrt(std::max(cov(k, k), 0.0)), true});
    }

    report.model = scattering_model;
    for (const auto& [osc, c] : osc_column) {
        const std::string name = "n_" + osc;
        const auto& ps = report.model.parameters();
        if (std::any_of(ps.begin(), ps.end(), [&](const FitParameter& fp) { return fp.name == name; })) {
            report.model.set_value(name, x(c));
        }
    }
    report.cooperativity = scattering_model.cooperativities(values);
    report.effective = scattering_model.effective(values);
    return report;
}

}  // namespace nrloop
