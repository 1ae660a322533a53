#pragma once

#include <functional>
#include <vector>

namespace nrloop::detail {

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

struct SimplexOptions {
    int max_evaluations = 20000;
    double f_tolerance = 1e-14;   // spread of vertex values
    double x_tolerance = 1e-12;   // max vertex distance from the best vertex
    int restarts = 4;             // fresh simplices around the best point
};

// Derivative-free minimization (Nelder-Mead with standard coefficients).
// `step` sets the initial simplex edge per coordinate.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, const std::vector<double>& step,
                          const SimplexOptions& options);

}  // namespace nrloop::detail
