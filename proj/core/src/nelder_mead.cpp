#include "nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nrloop::detail {
namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

double spread_x(const std::vector<Vertex>& s) {
    double worst = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        for (std::size_t k = 0; k < s[0].x.size(); ++k) {
            const double scale = std::max(1.0, std::abs(s[0].x[k]));
            worst = std::max(worst, std::abs(s[i].x[k] - s[0].x[k]) / scale);
        }
    }
    return worst;
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, const std::vector<double>& step,
                          const SimplexOptions& options) {
    const std::size_t n = x0.size();
    SimplexResult result;
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    Vertex best{x0, eval(x0)};
    for (int round = 0; round <= options.restarts; ++round) {
        std::vector<Vertex> simplex;
        simplex.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            Vertex v{best.x, 0.0};
            v.x[i] += step[i];
            v.f = eval(v.x);
            simplex.push_back(std::move(v));
        }

        bool converged = false;
        while (evals < options.max_evaluations) {
            std::sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
            const double fspread = simplex.back().f - simplex.front().f;
            if (fspread <= options.f_tolerance * std::max(1.0, std::abs(simplex.front().f)) &&
                spread_x(simplex) <= options.x_tolerance) {
                converged = true;
                break;
            }

            std::vector<double> centroid(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i].x[k] / static_cast<double>(n);
            }
            auto along = [&](double t) {
                std::vector<double> p(n);
                for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + t * (simplex.back().x[k] - centroid[k]);
                return p;
            };

            Vertex reflected{along(-1.0), 0.0};
            reflected.f = eval(reflected.x);
            if (reflected.f < simplex.front().f) {
                Vertex expanded{along(-2.0), 0.0};
                expanded.f = eval(expanded.x);
                simplex.back() = expanded.f < reflected.f ? std::move(expanded) : std::move(reflected);
                continue;
            }
            if (reflected.f < simplex[n - 1].f) {
                simplex.back() = std::move(reflected);
                continue;
            }
            const bool outside = reflected.f < simplex.back().f;
            Vertex contracted{along(outside ? -0.5 : 0.5), 0.0};
            contracted.f = eval(contracted.x);
            if (contracted.f < (outside ? reflected.f : simplex.back().f)) {
                simplex.back() = std::move(contracted);
                continue;
            }
            for (std::size_t i = 1; i <= n; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    simplex[i].x[k] = simplex[0].x[k] + 0.5 * (simplex[i].x[k] - simplex[0].x[k]);
                }
                simplex[i].f = eval(simplex[i].x);
            }
        }

        std::sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        const double improvement = best.f - simplex.front().f;
        if (simplex.front().f <= best.f) best = simplex.front();
        result.converged = converged;
        if (!converged) break;
        if (round > 0 && improvement <= options.f_tolerance * std::max(1.0, std::abs(best.f))) break;
    }

    result.x = best.x;
    result.value = best.f;
    result.evaluations = evals;
    return result;
}

}  // namespace nrloop::detail
