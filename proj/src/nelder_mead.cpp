#include "spectracube/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace spectracube {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
    const Eigen::Index n = x0.size();
    if (n < 1) throw std::invalid_argument("nelder_mead needs at least one dimension");

    constexpr double rho = 1.0;    // reflection
    constexpr double chi = 2.0;    // expansion
    constexpr double gamma = 0.5;  // contraction
    constexpr double sigma = 0.5;  // shrink

    // initial simplex: each vertex perturbs one coordinate
    std::vector<Eigen::VectorXd> vertex(static_cast<size_t>(n) + 1, x0);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (opts.initial_step > 0.0)
            vertex[static_cast<size_t>(i) + 1][i] += opts.initial_step;
        else if (x0[i] != 0.0)
            vertex[static_cast<size_t>(i) + 1][i] *= 1.05;  // fminsearch convention
        else
            vertex[static_cast<size_t>(i) + 1][i] = 0.00025;
    }

    std::vector<double> value(vertex.size());
    for (size_t i = 0; i < vertex.size(); ++i) {
        value[i] = objective(vertex[i]);
        if (!std::isfinite(value[i]) && i == 0)
            throw std::runtime_error("objective is not finite at the initial point");
    }

    std::vector<size_t> order(vertex.size());
    auto sort_simplex = [&]() {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return value[a] < value[b]; });
    };
    sort_simplex();

    NelderMeadResult result;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const size_t best = order.front();
        const size_t worst = order.back();
        const size_t second_worst = order[order.size() - 2];

        double diameter = 0.0;
        double spread = 0.0;
        for (size_t i = 1; i < order.size(); ++i) {
            diameter = std::max(diameter,
                                (vertex[order[i]] - vertex[best]).cwiseAbs().maxCoeff());
            spread = std::max(spread, std::abs(value[order[i]] - value[best]));
        }
        if (diameter < opts.tol_x && spread < opts.tol_f) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < order.size(); ++i) centroid += vertex[order[i]];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd reflected = centroid + rho * (centroid - vertex[worst]);
        const double f_reflected = objective(reflected);

        if (f_reflected < value[best]) {
            const Eigen::VectorXd expanded = centroid + rho * chi * (centroid - vertex[worst]);
            const double f_expanded = objective(expanded);
            if (f_expanded < f_reflected) {
                vertex[worst] = expanded;
                value[worst] = f_expanded;
            } else {
                vertex[worst] = reflected;
                value[worst] = f_reflected;
            }
        } else if (f_reflected < value[second_worst]) {
            vertex[worst] = reflected;
            value[worst] = f_reflected;
        } else if (f_reflected < value[worst]) {
            // outside contraction
            const Eigen::VectorXd contracted =
                centroid + gamma * rho * (centroid - vertex[worst]);
            const double f_contracted = objective(contracted);
            if (f_contracted <= f_reflected) {
                vertex[worst] = contracted;
                value[worst] = f_contracted;
            } else {
                for (size_t i = 1; i < order.size(); ++i) {
                    vertex[order[i]] = vertex[best] + sigma * (vertex[order[i]] - vertex[best]);
                    value[order[i]] = objective(vertex[order[i]]);
                }
            }
        } else {
            // inside contraction
            const Eigen::VectorXd contracted = centroid - gamma * (centroid - vertex[worst]);
            const double f_contracted = objective(contracted);
            if (f_contracted < value[worst]) {
                vertex[worst] = contracted;
                value[worst] = f_contracted;
            } else {
                for (size_t i = 1; i < order.size(); ++i) {
                    vertex[order[i]] = vertex[best] + sigma * (vertex[order[i]] - vertex[best]);
                    value[order[i]] = objective(vertex[order[i]]);
                }
            }
        }
        sort_simplex();
    }

    const size_t best = order.front();
    result.x = vertex[best];
    result.fx = value[best];
    result.iterations = iter;
    return result;
}

}  // namespace spectracube
