#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace doaiq {

struct BfgsOptions {
    int max_iters = 200;
    double grad_tol = 1e-6;   // infinity norm of the gradient
    double step_tol = 1e-12;  // relative objective decrease
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    int iterations = 0;
    bool converged = false;
};

// Dense BFGS with Armijo backtracking.  The objective returns f(x) and fills
// the gradient; it may return +infinity outside its domain, which the line
// search treats as an always-rejected step.
inline BfgsResult minimize_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& objective,
    Eigen::VectorXd x0, const BfgsOptions& opts = {}) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.grad.resize(n);
    res.f = objective(res.x, res.grad);

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g_new(n);

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it;
        if (res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
            res.converged = true;
            return res;
        }

        Eigen::VectorXd p = -(H * res.grad);
        double slope = res.grad.dot(p);
        if (!(slope < 0.0)) {  // stale curvature; restart from steepest descent
            H.setIdentity();
            p = -res.grad;
            slope = res.grad.dot(p);
        }

        constexpr double c1 = 1e-4;
        double alpha = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            x_new = res.x + alpha * p;
            f_new = objective(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= res.f + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return res;  // no progress possible along this direction

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd yv = g_new - res.grad;
        const double rel_drop = (res.f - f_new) / std::max(std::abs(res.f), 1.0);

        res.x = std::move(x_new);
        res.f = f_new;
        res.grad = g_new;

        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            const Eigen::MatrixXd V = I - rho * s * yv.transpose();
            H = V * H * V.transpose() + rho * s * s.transpose();
        }
        if (rel_drop < opts.step_tol) {
            res.converged = res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol;
            res.iterations = it + 1;
            return res;
        }
    }
    res.iterations = opts.max_iters;
    return res;
}

}  // namespace doaiq
