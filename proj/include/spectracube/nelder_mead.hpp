#pragma once

#include <functional>

#include <Eigen/Dense>

namespace spectracube {

struct NelderMeadOptions {
    double tol_x = 1e-8;  // simplex diameter
    double tol_f = 1e-8;  // function value spread
    int max_iter = 2000;
    // 0 keeps fminsearch-style 5% relative vertex steps; a positive value
    // uses that absolute per-coordinate step instead (useful when
    // coordinates live on log scales).
    double initial_step = 0.0;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Downhill simplex with the Lagarias et al. coefficients (reflection 1,
// expansion 2, contraction 0.5, shrink 0.5). Converged when both the
// simplex diameter and the value spread fall under tolerance.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

}  // namespace spectracube
