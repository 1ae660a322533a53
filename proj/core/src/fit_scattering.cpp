#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <ceres/ceres.h>

#include "nrloop/error.hpp"
#include "nrloop/fit.hpp"
#include "parallel.hpp"

namespace nrloop {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Observations grouped by loop phase, then by probe offset, so that each
// distinct (phase, offset) point costs one scattering solve.
class Evaluator {
public:
    Evaluator(const ModelParametrization& model, std::span<const Observation> obs, unsigned threads,
              const SolverLimits& limits)
        : model_(model), obs_(obs), threads_(threads), limits_(limits),
          phase_offset_(model.index_of("phase_offset")) {
        const ModeNetwork net = model.network();
        for (const Observation& o : obs) {
            ports_.emplace_back(static_cast<Eigen::Index>(net.index_of(o.port_out)),
                                static_cast<Eigen::Index>(net.index_of(o.port_in)));
            if (!(o.sigma > 0.0) || !std::isfinite(o.sigma) || !std::isfinite(o.value) ||
                !std::isfinite(o.offset) || !std::isfinite(o.phase)) {
                throw InvalidArgument("observations need finite values and positive sigma");
            }
        }
        std::map<double, std::map<double, std::vector<std::size_t>>> grouped;
        for (std::size_t i = 0; i < obs.size(); ++i) grouped[obs[i].phase][obs[i].offset].push_back(i);
        for (auto& [phase, by_offset] : grouped) {
            Group g{phase, {}};
            for (auto& [offset, idx] : by_offset) g.points.push_back({offset, std::move(idx)});
            groups_.push_back(std::move(g));
        }
    }

    // |S|² per observation; failed points are NaN. Returns false when the
    // parameter vector does not describe a valid network.
    bool evaluate(std::span<const double> values, std::vector<double>& out) const {
        out.assign(obs_.size(), kNaN);
        std::optional<ModeNetwork> base;
        try {
            base.emplace(model_.network(values));
        } catch (const Error&) {
            return false;
        }
        const double shift = values[phase_offset_];
        detail::parallel_for(groups_.size(), threads_, [&](std::size_t gi) {
            const Group& g = groups_[gi];
            const ModeNetwork net = base->with_loop_phase(g.phase + shift);
            for (const Point& p : g.points) {
                ComplexMatrix s;
                try {
                    s = scattering(net, p.offset, limits_);
                } catch (const NumericalError&) {
                    continue;
                }
                for (std::size_t i : p.observations) out[i] = std::norm(s(ports_[i].first, ports_[i].second));
            }
        });
        return true;
    }

    bool residuals(std::span<const double> values, double* r) const {
        std::vector<double> v;
        if (!evaluate(values, v)) return false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) return false;
            r[i] = (v[i] - obs_[i].value) / obs_[i].sigma;
        }
        return true;
    }

private:
    struct Point {
        double offset;
        std::vector<std::size_t> observations;
    };
    struct Group {
        double phase;
        std::vector<Point> points;
    };

    const ModelParametrization& model_;
    std::span<const Observation> obs_;
    unsigned threads_;
    SolverLimits limits_;
    std::size_t phase_offset_;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ports_;
    std::vector<Group> groups_;
};

// Maps the solver's scaled free coordinates p onto a full parameter vector.
struct Scaling {
    std::vector<double> base;
    std::vector<std::size_t> free;
    std::vector<double> scale;

    std::vector<double> full(const double* p) const {
        std::vector<double> v = base;
        for (std::size_t k = 0; k < free.size(); ++k) v[free[k]] = p[k] * scale[k];
        return v;
    }
};

struct ResidualFunctor {
    const Evaluator* evaluator;
    const Scaling* scaling;

    bool operator()(double const* const* parameters, double* residuals) const {
        return evaluator->residuals(scaling->full(parameters[0]), residuals);
    }
};

struct StartResult {
    std::vector<double> p;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string termination;
};

StartResult run_start(const Evaluator& evaluator, const Scaling& scaling, std::vector<double> p0,
                      const std::vector<double>& lower, const std::vector<double>& upper, std::size_t m,
                      const FitOptions& options) {
    ceres::NumericDiffOptions diff;
    diff.relative_step_size = options.relative_step;
    auto* cost = new ceres::DynamicNumericDiffCostFunction<ResidualFunctor, ceres::FORWARD>(
        new ResidualFunctor{&evaluator, &scaling}, ceres::TAKE_OWNERSHIP, diff);
    cost->AddParameterBlock(static_cast<int>(p0.size()));
    cost->SetNumResiduals(static_cast<int>(m));

    StartResult r;
    r.p = std::move(p0);
    ceres::Problem problem;
    problem.AddResidualBlock(cost, nullptr, r.p.data());
    for (std::size_t k = 0; k < r.p.size(); ++k) {
        if (std::isfinite(lower[k])) problem.SetParameterLowerBound(r.p.data(), static_cast<int>(k), lower[k]);
        if (std::isfinite(upper[k])) problem.SetParameterUpperBound(r.p.data(), static_cast<int>(k), upper[k]);
    }

    ceres::Solver::Options so;
    so.minimizer_type = ceres::TRUST_REGION;
    so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    so.linear_solver_type = ceres::DENSE_QR;
    so.max_num_iterations = options.max_iterations;
    so.function_tolerance = options.function_tolerance;
    so.parameter_tolerance = options.parameter_tolerance;
    so.gradient_tolerance = 1e-14;
    so.num_threads = 1;
    so.logging_type = ceres::SILENT;
    so.minimizer_progress_to_stdout = false;

    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);
    r.cost = 2.0 * summary.final_cost;  // Ceres reports ½Σr²
    r.iterations = static_cast<int>(summary.iterations.size());
    r.converged = summary.termination_type == ceres::CONVERGENCE;
    r.termination = summary.message;
    return r;
}

double residual_norm(const Evaluator& evaluator, std::span<const double> values, std::size_t m) {
    std::vector<double> r(m);
    if (!evaluator.residuals(values, r.data())) return kNaN;
    double s = 0.0;
    for (double x : r) s += x * x;
    return std::sqrt(s);
}

}  // namespace

const FittedParameter& FitReport::parameter(std::string_view name) const {
    for (const FittedParameter& p : parameters) {
        if (p.name == name) return p;
    }
    throw InvalidArgument("fit report has no parameter '" + std::string(name) + "'");
}

std::vector<double> model_values(const ModelParametrization& model, std::span<const double> values,
                                 std::span<const Observation> observations, unsigned threads,
                                 const SolverLimits& limits) {
    const Evaluator evaluator(model, observations, threads, limits);
    std::vector<double> out;
    if (!evaluator.evaluate(values, out)) throw InvalidArgument("parameter vector does not describe a valid network");
    return out;
}

FitReport fit_scattering(const FitProblem& problem, const FitOptions& options) {
    const ModelParametrization& model = problem.model;
    const std::vector<std::size_t> free = model.free_indices();
    const std::size_t m = problem.observations.size();
    const std::size_t n = free.size();
    if (n == 0) throw InvalidArgument("fit has no free parameters");
    if (m < n) {
        throw IllPosedFitError("fit is underdetermined: " + std::to_string(m) + " observations for " +
                               std::to_string(n) + " free parameters");
    }

    Scaling scaling{model.values(), free, {}};
    std::vector<double> lower(n), upper(n), p0(n);
    for (std::size_t k = 0; k < n; ++k) {
        const FitParameter& fp = model.parameters()[free[k]];
        if (!(fp.value >= fp.lower && fp.value <= fp.upper)) {
            throw InvalidArgument("initial value of '" + fp.name + "' lies outside its bounds");
        }
        scaling.scale.push_back(fp.scale);
        lower[k] = fp.lower / fp.scale;
        upper[k] = fp.upper / fp.scale;
        p0[k] = fp.value / fp.scale;
    }

    const Evaluator evaluator(model, problem.observations, options.threads, options.limits);
    FitReport report;
    report.observations = m;
    report.initial_residual_norm = residual_norm(evaluator, scaling.full(p0.data()), m);
    if (!std::isfinite(report.initial_residual_norm)) {
        throw NumericalError("model cannot be evaluated at the initial guess");
    }

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    StartResult best;
    for (int start = 0; start <= options.restarts; ++start) {
        std::vector<double> p = p0;
        if (start > 0) {
            for (std::size_t k = 0; k < n; ++k) {
                const double jitter = options.restart_spread * unit(rng);
                p[k] = p0[k] != 0.0 ? p0[k] * (1.0 + jitter) : jitter;
                p[k] = std::clamp(p[k], lower[k], upper[k]);
            }
            if (!std::isfinite(residual_norm(evaluator, scaling.full(p.data()), m))) continue;
        }
        StartResult r = run_start(evaluator, scaling, std::move(p), lower, upper, m, options);
        report.iterations += r.iterations;
        if (r.cost < best.cost || (!best.converged && r.converged && r.cost <= best.cost)) best = std::move(r);
    }
    report.starts = options.restarts + 1;

    std::vector<double> fitted = scaling.full(best.p.data());
    if (!best.converged) {
        std::vector<double> point;
        for (std::size_t idx : free) point.push_back(fitted[idx]);
        throw ConvergenceError("scattering fit did not converge: " + best.termination, point,
                               std::sqrt(best.cost));
    }
    report.converged = true;
    report.termination = best.termination;
    report.residual_norm = residual_norm(evaluator, fitted, m);

    // Forward-difference Jacobian in scaled coordinates at the optimum.
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> r0(m), r1(m);
    evaluator.residuals(fitted, r0.data());
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> p = best.p;
        double h = options.relative_step * std::max(std::abs(p[k]), 1.0);
        if (p[k] + h > upper[k]) h = -h;
        p[k] += h;
        if (!evaluator.residuals(scaling.full(p.data()), r1.data())) {
            throw NumericalError("model cannot be evaluated next to the optimum");
        }
        for (std::size_t i = 0; i < m; ++i) {
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (r1[i] - r0[i]) / h;
        }
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();
    const double cutoff = options.rank_tolerance * (sv.size() > 0 ? sv(0) : 0.0);
    const double dof = static_cast<double>(std::max<std::size_t>(m - n, 1));
    const double s2 = report.residual_norm * report.residual_norm / dof;

    std::vector<bool> unidentifiable(n, false);
    for (Eigen::Index c = 0; c < sv.size(); ++c) {
        if (sv(c) > cutoff) continue;
        report.rank_deficient = true;
        std::vector<double> dir(n);
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            dir[k] = v(static_cast<Eigen::Index>(k), c) * scaling.scale[k];
            norm += dir[k] * dir[k];
            if (std::abs(v(static_cast<Eigen::Index>(k), c)) > 1e-6) unidentifiable[k] = true;
        }
        for (double& d : dir) d /= std::sqrt(norm);
        report.null_space.push_back(std::move(dir));
    }

    std::vector<double> error(model.parameters().size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (unidentifiable[k]) {
            error[free[k]] = std::numeric_limits<double>::infinity();
            continue;
        }
        double var = 0.0;
        for (Eigen::Index c = 0; c < sv.size(); ++c) {
            if (sv(c) > cutoff) var += std::pow(v(static_cast<Eigen::Index>(k), c) / sv(c), 2);
        }
        error[free[k]] = std::sqrt(s2 * var) * scaling.scale[k];
    }

    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const FitParameter& fp = model.parameters()[i];
        report.parameters.push_back({fp.name, fitted[i], fp.value, error[i], fp.free});
    }
    report.model = model;
    report.model.set_values(fitted);
    report.cooperativity = model.cooperativities(fitted);
    report.effective = model.effective(fitted);
    return report;
}

}  // namespace nrloop
