#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doaiq/bfgs.hpp"
#include "doaiq/csv.hpp"
#include "doaiq/encoding.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/rng.hpp"

namespace doaiq {

// Additive Gaussian process over mixed inputs: one product kernel per binary
// factor, summed.  For a pair of observations,
//   Sigma_h(w_i, w_j) = tau^2 * (exp(-||x_i-x_j||^2 / theta_h) + eta*1(i=j))
//                              * (z_hi == z_hj ? 1 : rho_h)
// and the full covariance is the sum over h.

struct MixedInput {
    std::vector<double> x_cont;
    std::vector<int> z_bin;
};

struct AgpBounds {
    double theta_lo = 1e-3, theta_hi = 1e3;
    double eta_lo = 1e-8, eta_hi = 1.0;
    double rho_lo = 1e-4, rho_hi = 1.0 - 1e-6;
};

struct AgpParams {
    Eigen::VectorXd rho;    // per-factor correlation across unequal levels
    Eigen::VectorXd theta;  // per-factor length-scale
    double eta = 0.0;       // nugget, applied inside every summand
    double tau2 = 1.0;      // process variance (profile estimate after fitting)
};

struct AgpFitOptions {
    int max_iters = 150;
    double grad_tol = 1e-5;
    int restarts = 5;
    std::uint64_t seed = 0;
    std::optional<double> fixed_eta;  // freeze the nugget (e.g. 0 for interpolation)
    AgpBounds bounds;
    bool parallel_restarts = true;
};

struct AgpFitReport {
    double final_nll = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    int best_restart = -1;
    bool degenerate = false;  // constant responses, no likelihood to optimize
};

struct PredictiveDistribution {
    double mean = 0.0;
    double variance = 0.0;
};

namespace agp_detail {

inline void check_shapes(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                         const Eigen::VectorXd& rho, const Eigen::VectorXd& theta) {
    if (X.rows() != Z.rows()) throw ParameterError("agp: X and Z row counts differ");
    if (Z.cols() < 1) throw ParameterError("agp: need at least one binary factor");
    if (rho.size() != Z.cols() || theta.size() != Z.cols())
        throw ParameterError("agp: rho/theta length must equal the binary factor count");
    for (Eigen::Index i = 0; i < Z.size(); ++i)
        if (Z(i) != 0 && Z(i) != 1) throw ParameterError("agp: binary entries must be 0/1");
}

inline Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::VectorXd nrm = X.rowwise().squaredNorm();
    Eigen::MatrixXd D2 = nrm.replicate(1, n) + nrm.transpose().replicate(n, 1) -
                         2.0 * (X * X.transpose());
    return D2.cwiseMax(0.0);
}

// Cholesky factor of a symmetric matrix, with a diagnostic pivot scan on
// failure so conditioning errors report where positivity was lost.
inline Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& R) {
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const Eigen::Index n = R.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    double worst_pivot = std::numeric_limits<double>::infinity();
    Eigen::Index worst_index = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = R(j, j) - L.row(j).head(j).squaredNorm();
        if (d < worst_pivot) {
            worst_pivot = d;
            worst_index = j;
        }
        if (d <= 0.0) break;
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i)
            L(i, j) = (R(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
    std::ostringstream msg;
    msg << "covariance factorization failed: smallest pivot " << worst_pivot
        << " at index " << worst_index;
    throw ConditioningError(msg.str());
}

// Cached quantities that do not change while parameters vary.
struct LikelihoodCache {
    Eigen::MatrixXd D2;                 // squared continuous distances
    std::vector<Eigen::MatrixXd> neq;   // per factor: 1.0 where levels differ
    Eigen::Index n = 0;
    Eigen::Index q = 0;

    LikelihoodCache(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z)
        : D2(pairwise_sqdist(X)), n(X.rows()), q(Z.cols()) {
        neq.reserve(q);
        for (Eigen::Index h = 0; h < q; ++h) {
            Eigen::MatrixXd M(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    M(i, j) = Z(i, h) == Z(j, h) ? 0.0 : 1.0;
            neq.push_back(std::move(M));
        }
    }

    // unit-variance covariance R = Sigma / tau^2
    Eigen::MatrixXd unit_covariance(const Eigen::VectorXd& rho, const Eigen::VectorXd& theta,
                                    double eta) const {
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index h = 0; h < q; ++h) {
            const Eigen::ArrayXXd expo = (-D2.array() / theta(h)).exp();
            const Eigen::ArrayXXd phi = 1.0 + neq[h].array() * (rho(h) - 1.0);
            R.array() += expo * phi;
        }
        R.diagonal().array() += static_cast<double>(q) * eta;
        return R;
    }
};

struct LikelihoodEval {
    double nll = 0.0;
    double quad_form = 0.0;  // y' R^{-1} y
    Eigen::MatrixXd L;       // cholesky of R
    Eigen::VectorXd alpha;   // R^{-1} y
};

inline LikelihoodEval evaluate_nll(const LikelihoodCache& cache, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& rho, const Eigen::VectorXd& theta,
                                   double eta) {
    LikelihoodEval ev;
    const Eigen::MatrixXd R = cache.unit_covariance(rho, theta, eta);
    ev.L = cholesky_or_throw(R);
    ev.alpha = ev.L.triangularView<Eigen::Lower>().solve(y);
    ev.L.triangularView<Eigen::Lower>().transpose().solveInPlace(ev.alpha);
    ev.quad_form = y.dot(ev.alpha);
    if (!(ev.quad_form > 0.0))
        throw ConditioningError("likelihood: quadratic form is not positive");
    const double logdet = 2.0 * ev.L.diagonal().array().log().sum();
    ev.nll = logdet + static_cast<double>(cache.n) * std::log(ev.quad_form);
    return ev;
}

// gradient of the concentrated NLL w.r.t. (rho_1..q, theta_1..q, eta)
inline Eigen::VectorXd evaluate_gradient(const LikelihoodCache& cache, const Eigen::VectorXd& rho,
                                         const Eigen::VectorXd& theta,
                                         const LikelihoodEval& ev) {
    const Eigen::Index n = cache.n;
    const Eigen::Index q = cache.q;
    Eigen::MatrixXd Rinv = Eigen::MatrixXd::Identity(n, n);
    ev.L.triangularView<Eigen::Lower>().solveInPlace(Rinv);
    ev.L.triangularView<Eigen::Lower>().transpose().solveInPlace(Rinv);

    const double weight = static_cast<double>(n) / ev.quad_form;
    Eigen::VectorXd grad(2 * q + 1);
    for (Eigen::Index h = 0; h < q; ++h) {
        const Eigen::ArrayXXd expo = (-cache.D2.array() / theta(h)).exp();
        // d/d rho: only pairs with unequal levels carry rho
        const Eigen::ArrayXXd d_rho = expo * cache.neq[h].array();
        // d/d theta: chain rule through exp(-D2/theta) for both level parities
        const Eigen::ArrayXXd phi = 1.0 + cache.neq[h].array() * (rho(h) - 1.0);
        const Eigen::ArrayXXd d_theta =
            expo * phi * cache.D2.array() / (theta(h) * theta(h));

        grad(h) = (Rinv.array() * d_rho).sum() -
                  weight * (ev.alpha.transpose() * d_rho.matrix() * ev.alpha).value();
        grad(q + h) = (Rinv.array() * d_theta).sum() -
                      weight * (ev.alpha.transpose() * d_theta.matrix() * ev.alpha).value();
    }
    // d/d eta: q * identity
    grad(2 * q) =
        static_cast<double>(q) * (Rinv.trace() - weight * ev.alpha.squaredNorm());
    return grad;
}

}  // namespace agp_detail

// ---- public operations on raw matrices -------------------------------------

// Covariance of a single pair under the additive kernel (includes tau^2).
inline double covariance(const MixedInput& wi, const MixedInput& wj, const AgpParams& params,
                         bool same_index) {
    if (wi.x_cont.size() != wj.x_cont.size() || wi.z_bin.size() != wj.z_bin.size())
        throw ParameterError("covariance: input dimensions differ");
    const std::size_t q = wi.z_bin.size();
    if (params.rho.size() != static_cast<Eigen::Index>(q) ||
        params.theta.size() != static_cast<Eigen::Index>(q))
        throw ParameterError("covariance: parameter dimensions do not match inputs");
    double d2 = 0.0;
    for (std::size_t l = 0; l < wi.x_cont.size(); ++l) {
        const double d = wi.x_cont[l] - wj.x_cont[l];
        d2 += d * d;
    }
    double total = 0.0;
    for (std::size_t h = 0; h < q; ++h) {
        const double psi = std::exp(-d2 / params.theta(static_cast<Eigen::Index>(h))) +
                           (same_index ? params.eta : 0.0);
        const double phi =
            wi.z_bin[h] == wj.z_bin[h] ? 1.0 : params.rho(static_cast<Eigen::Index>(h));
        total += psi * phi;
    }
    return params.tau2 * total;
}

// Full training covariance (includes tau^2).  Symmetric positive definite for
// eta > 0, or for eta = 0 with distinct inputs.
inline Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                                         const AgpParams& params) {
    agp_detail::check_shapes(X, Z, params.rho, params.theta);
    agp_detail::LikelihoodCache cache(X, Z);
    return params.tau2 * cache.unit_covariance(params.rho, params.theta, params.eta);
}

// Profile variance estimate tau^2 = y' R^{-1} y / N via Cholesky.
inline double profile_tau2(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                           const Eigen::VectorXd& y, const Eigen::VectorXd& rho,
                           const Eigen::VectorXd& theta, double eta) {
    agp_detail::check_shapes(X, Z, rho, theta);
    if (y.size() != X.rows()) throw ParameterError("profile_tau2: response length mismatch");
    agp_detail::LikelihoodCache cache(X, Z);
    const Eigen::MatrixXd R = cache.unit_covariance(rho, theta, eta);
    Eigen::MatrixXd L = agp_detail::cholesky_or_throw(R);
    Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(y);
    return v.squaredNorm() / static_cast<double>(X.rows());
}

// Concentrated negative log-likelihood: log det R + N log(y' R^{-1} y).
// The process variance cancels, so this is evaluated on the unit-variance
// covariance.
inline double neg_log_likelihood(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                                 const Eigen::VectorXd& y, const Eigen::VectorXd& rho,
                                 const Eigen::VectorXd& theta, double eta) {
    agp_detail::check_shapes(X, Z, rho, theta);
    if (y.size() != X.rows())
        throw ParameterError("neg_log_likelihood: response length mismatch");
    agp_detail::LikelihoodCache cache(X, Z);
    return agp_detail::evaluate_nll(cache, y, rho, theta, eta).nll;
}

// Analytic gradient of the concentrated NLL, ordered (rho..., theta..., eta).
inline Eigen::VectorXd nll_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                                    const Eigen::VectorXd& y, const Eigen::VectorXd& rho,
                                    const Eigen::VectorXd& theta, double eta) {
    agp_detail::check_shapes(X, Z, rho, theta);
    if (y.size() != X.rows()) throw ParameterError("nll_gradient: response length mismatch");
    agp_detail::LikelihoodCache cache(X, Z);
    const auto ev = agp_detail::evaluate_nll(cache, y, rho, theta, eta);
    return agp_detail::evaluate_gradient(cache, rho, theta, ev);
}

// ---- fitted model -----------------------------------------------------------

struct AgpModel {
    AgpParams params;
    Eigen::MatrixXd X;  // encoded continuous inputs, one row per observation
    Eigen::MatrixXi Z;  // binary factors
    Eigen::VectorXd y_centered;
    double y_mean = 0.0;
    Eigen::MatrixXd L;       // cholesky factor of the unit-variance covariance
    Eigen::VectorXd alpha;   // R^{-1} y_centered
    AgpFitReport report;
    CovariateEncoder encoder;  // empty cont_cols when fitted from raw matrices
    std::string response_name = "y";

    std::size_t q() const { return static_cast<std::size_t>(Z.cols()); }
    std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
};

namespace agp_detail {

// Bounded smooth reparameterization: BFGS runs over unconstrained u, with
// rho mapped through a logistic onto its interval and theta/eta through a
// logistic in log-space.
struct ParamMap {
    AgpBounds b;
    Eigen::Index q = 0;
    bool fit_eta = true;
    double eta_fixed = 0.0;

    static double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }
    static double logit(double s) {
        s = std::clamp(s, 1e-12, 1.0 - 1e-12);
        return std::log(s / (1.0 - s));
    }

    Eigen::Index dim() const { return fit_eta ? 2 * q + 1 : 2 * q; }

    void unpack(const Eigen::VectorXd& u, Eigen::VectorXd& rho, Eigen::VectorXd& theta,
                double& eta) const {
        rho.resize(q);
        theta.resize(q);
        for (Eigen::Index h = 0; h < q; ++h) {
            rho(h) = b.rho_lo + (b.rho_hi - b.rho_lo) * sigmoid(u(h));
            const double lt = std::log(b.theta_lo) +
                              (std::log(b.theta_hi) - std::log(b.theta_lo)) * sigmoid(u(q + h));
            theta(h) = std::exp(lt);
        }
        if (fit_eta) {
            const double le = std::log(b.eta_lo) +
                              (std::log(b.eta_hi) - std::log(b.eta_lo)) * sigmoid(u(2 * q));
            eta = std::exp(le);
        } else {
            eta = eta_fixed;
        }
    }

    Eigen::VectorXd pack(const Eigen::VectorXd& rho, const Eigen::VectorXd& theta,
                         double eta) const {
        Eigen::VectorXd u(dim());
        for (Eigen::Index h = 0; h < q; ++h) {
            u(h) = logit((rho(h) - b.rho_lo) / (b.rho_hi - b.rho_lo));
            u(q + h) = logit((std::log(theta(h)) - std::log(b.theta_lo)) /
                             (std::log(b.theta_hi) - std::log(b.theta_lo)));
        }
        if (fit_eta)
            u(2 * q) = logit((std::log(std::max(eta, b.eta_lo)) - std::log(b.eta_lo)) /
                             (std::log(b.eta_hi) - std::log(b.eta_lo)));
        return u;
    }

    // chain-rule factors d(param)/d(u), aligned with the raw gradient layout
    Eigen::VectorXd jacobian_diag(const Eigen::VectorXd& u, const Eigen::VectorXd& theta,
                                  double eta) const {
        Eigen::VectorXd j(dim());
        for (Eigen::Index h = 0; h < q; ++h) {
            const double s = sigmoid(u(h));
            j(h) = (b.rho_hi - b.rho_lo) * s * (1.0 - s);
            const double st = sigmoid(u(q + h));
            j(q + h) = theta(h) * (std::log(b.theta_hi) - std::log(b.theta_lo)) * st * (1.0 - st);
        }
        if (fit_eta) {
            const double se = sigmoid(u(2 * q));
            j(2 * q) = eta * (std::log(b.eta_hi) - std::log(b.eta_lo)) * se * (1.0 - se);
        }
        return j;
    }
};

struct RestartOutcome {
    bool ok = false;
    double nll = std::numeric_limits<double>::infinity();
    Eigen::VectorXd rho, theta;
    double eta = 0.0;
    int iterations = 0;
    double grad_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Restart 0 starts from a length-scale matched to the mean squared distance;
// later restarts scatter around it.
inline AgpParams initial_params(int restart, Eigen::Index q, double d_typical,
                                const AgpBounds& b, std::uint64_t seed) {
    AgpParams init;
    init.rho.resize(q);
    init.theta.resize(q);
    if (restart == 0) {
        init.rho.setConstant(0.5);
        init.theta.setConstant(std::clamp(d_typical, b.theta_lo, b.theta_hi));
        init.eta = std::clamp(1e-3, b.eta_lo, b.eta_hi);
        return init;
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(restart)));
    for (Eigen::Index h = 0; h < q; ++h) {
        init.rho(h) = std::clamp(rng.uniform(0.1, 0.95), b.rho_lo, b.rho_hi);
        const double f = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
        init.theta(h) = std::clamp(d_typical * f, b.theta_lo, b.theta_hi);
    }
    init.eta = std::clamp(std::exp(rng.uniform(std::log(1e-6), std::log(0.1))),
                          b.eta_lo, b.eta_hi);
    return init;
}

inline RestartOutcome run_restart(const LikelihoodCache& cache, const Eigen::VectorXd& y,
                                  const AgpFitOptions& opts, int restart) {
    ParamMap map;
    map.b = opts.bounds;
    map.q = cache.q;
    if (opts.fixed_eta) {
        map.fit_eta = false;
        map.eta_fixed = *opts.fixed_eta;
    }

    double mean_d2 = cache.D2.sum() / std::max<double>(1.0, cache.n * (cache.n - 1));
    if (!(mean_d2 > 0.0)) mean_d2 = 1.0;
    AgpParams init = initial_params(restart, cache.q, mean_d2, opts.bounds, opts.seed);

    auto attempt = [&](const ParamMap& pm, const AgpParams& start) -> RestartOutcome {
        RestartOutcome out;
        const auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
            Eigen::VectorXd rho, theta;
            double eta = 0.0;
            pm.unpack(u, rho, theta, eta);
            try {
                const auto ev = evaluate_nll(cache, y, rho, theta, eta);
                const Eigen::VectorXd raw = evaluate_gradient(cache, rho, theta, ev);
                const Eigen::VectorXd j = pm.jacobian_diag(u, theta, eta);
                grad.resize(pm.dim());
                for (Eigen::Index k = 0; k < pm.dim(); ++k) {
                    // raw layout is (rho..., theta..., eta); u layout matches
                    grad(k) = raw(k) * j(k);
                }
                return ev.nll;
            } catch (const NumericalError&) {
                grad = Eigen::VectorXd::Zero(pm.dim());
                return std::numeric_limits<double>::infinity();
            }
        };

        // the initial point must be evaluable; a persistent failure aborts the restart
        {
            Eigen::VectorXd rho, theta;
            double eta = 0.0;
            Eigen::VectorXd u0 = pm.pack(start.rho, start.theta, start.eta);
            pm.unpack(u0, rho, theta, eta);
            evaluate_nll(cache, y, rho, theta, eta);  // throws on failure
        }

        BfgsOptions bo;
        bo.max_iters = opts.max_iters;
        bo.grad_tol = opts.grad_tol;
        const BfgsResult r =
            minimize_bfgs(objective, pm.pack(start.rho, start.theta, start.eta), bo);
        pm.unpack(r.x, out.rho, out.theta, out.eta);
        out.nll = r.f;
        out.iterations = r.iterations;
        out.grad_norm = r.grad.lpNorm<Eigen::Infinity>();
        out.converged = r.converged;
        out.ok = std::isfinite(r.f);
        return out;
    };

    try {
        return attempt(map, init);
    } catch (const NumericalError&) {
        // jitter retry: raise the nugget floor once before giving up
        ParamMap jittered = map;
        AgpParams start = init;
        if (map.fit_eta) {
            jittered.b.eta_lo = std::max(map.b.eta_lo, 1e-6);
            start.eta = std::max(start.eta, 1e-6);
        } else {
            jittered.fit_eta = false;
            jittered.eta_fixed = std::max(map.eta_fixed, 1e-6);
        }
        try {
            return attempt(jittered, start);
        } catch (const NumericalError&) {
            return {};
        }
    }
}

}  // namespace agp_detail

// Maximum-likelihood fit with multi-start BFGS over transformed parameters.
// Restarts are independent and deterministic; the best final NLL wins.
inline AgpModel agp_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXi& Z,
                        const Eigen::VectorXd& y_raw, const AgpFitOptions& opts = {}) {
    agp_detail::check_shapes(X, Z, Eigen::VectorXd::Ones(Z.cols()),
                             Eigen::VectorXd::Ones(Z.cols()));
    if (y_raw.size() != X.rows()) throw ParameterError("agp_fit: response length mismatch");
    if (X.rows() < 2) throw ParameterError("agp_fit: need at least 2 observations");
    if (!y_raw.allFinite()) throw ParameterError("agp_fit: responses must be finite");
    if (opts.restarts < 1) throw ParameterError("agp_fit: restarts must be >= 1");

    AgpModel model;
    model.X = X;
    model.Z = Z;
    model.y_mean = y_raw.mean();
    model.y_centered = y_raw.array() - model.y_mean;

    agp_detail::LikelihoodCache cache(X, Z);
    const Eigen::Index q = Z.cols();

    // constant responses: nothing to fit; predictions collapse to the mean
    if (model.y_centered.squaredNorm() <=
        1e-30 * static_cast<double>(X.rows()) * std::max(1.0, model.y_mean * model.y_mean)) {
        model.params.rho = Eigen::VectorXd::Constant(q, 0.5);
        model.params.theta = Eigen::VectorXd::Constant(q, 1.0);
        model.params.eta = opts.fixed_eta.value_or(1e-6);
        model.params.tau2 = 0.0;
        const Eigen::MatrixXd R =
            cache.unit_covariance(model.params.rho, model.params.theta,
                                  std::max(model.params.eta, 1e-6));
        model.L = agp_detail::cholesky_or_throw(R);
        model.alpha = Eigen::VectorXd::Zero(X.rows());
        model.report.degenerate = true;
        model.report.converged = true;
        return model;
    }

    std::vector<agp_detail::RestartOutcome> outcomes(opts.restarts);
    if (opts.parallel_restarts && opts.restarts > 1) {
        std::vector<std::future<agp_detail::RestartOutcome>> futures;
        futures.reserve(opts.restarts);
        for (int r = 0; r < opts.restarts; ++r)
            futures.push_back(std::async(std::launch::async, [&, r]() {
                return agp_detail::run_restart(cache, model.y_centered, opts, r);
            }));
        for (int r = 0; r < opts.restarts; ++r) outcomes[r] = futures[r].get();
    } else {
        for (int r = 0; r < opts.restarts; ++r)
            outcomes[r] = agp_detail::run_restart(cache, model.y_centered, opts, r);
    }

    int best = -1;
    for (int r = 0; r < opts.restarts; ++r) {
        if (!outcomes[r].ok) continue;
        if (best < 0 || outcomes[r].nll < outcomes[best].nll) best = r;
    }
    if (best < 0)
        throw ConditioningError("agp_fit: every restart failed to factorize the covariance");

    const auto& win = outcomes[best];
    model.params.rho = win.rho;
    model.params.theta = win.theta;
    model.params.eta = win.eta;
    const auto ev = agp_detail::evaluate_nll(cache, model.y_centered, win.rho, win.theta, win.eta);
    model.params.tau2 = ev.quad_form / static_cast<double>(X.rows());
    model.L = ev.L;
    model.alpha = ev.alpha;
    model.report.final_nll = win.nll;
    model.report.iterations = win.iterations;
    model.report.grad_norm = win.grad_norm;
    model.report.converged = win.converged;
    model.report.best_restart = best;
    return model;
}

// Predictive mean and variance at a new input, via triangular solves against
// the cached factor.
inline PredictiveDistribution agp_predict(const AgpModel& model, const MixedInput& w) {
    const Eigen::Index n = model.X.rows();
    const Eigen::Index q = model.Z.cols();
    if (w.x_cont.size() != model.p() || w.z_bin.size() != model.q())
        throw ParameterError("agp_predict: input dimensions do not match the model");

    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2 = 0.0;
        for (Eigen::Index l = 0; l < model.X.cols(); ++l) {
            const double d = w.x_cont[static_cast<std::size_t>(l)] - model.X(i, l);
            d2 += d * d;
        }
        double v = 0.0;
        for (Eigen::Index h = 0; h < q; ++h) {
            const double phi = w.z_bin[static_cast<std::size_t>(h)] == model.Z(i, h)
                                   ? 1.0
                                   : model.params.rho(h);
            v += std::exp(-d2 / model.params.theta(h)) * phi;
        }
        r(i) = v;
    }

    PredictiveDistribution out;
    out.mean = r.dot(model.alpha) + model.y_mean;
    const Eigen::VectorXd u = model.L.triangularView<Eigen::Lower>().solve(r);
    const double prior_unit = static_cast<double>(q) * (1.0 + model.params.eta);
    const double v_unit = prior_unit - u.squaredNorm();
    if (v_unit < -1e-10 * prior_unit)
        throw ConditioningError("agp_predict: negative predictive variance " +
                                std::to_string(v_unit) + " (unit scale)");
    out.variance = model.params.tau2 * std::max(v_unit, 0.0);
    return out;
}

// ---- table-driven fitting and persistence -----------------------------------

// Encodes a pipeline data table and fits the named response column.
inline AgpModel agp_fit_table(const CsvTable& data, const std::string& response,
                              const AgpFitOptions& opts = {},
                              const std::vector<std::string>& log_cols = {"z1"}) {
    const CovariateEncoder enc = build_encoder(data, log_cols);
    if (enc.levels.size() < 2)
        throw ParameterError("agp_fit_table: data needs a categorical column with >= 2 levels");
    const std::size_t n = data.rows.size();
    const std::size_t p = enc.p();
    const std::size_t q = enc.q();
    Eigen::MatrixXd X(n, p);
    Eigen::MatrixXi Z(n, q);
    Eigen::VectorXd y(n);
    const std::size_t yc = data.column(response);
    const std::size_t cc = data.column(enc.cat_col);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> xe = enc.encode_continuous(raw_continuous_row(data, i, enc));
        for (std::size_t j = 0; j < p; ++j) X(i, j) = xe[j];
        const std::vector<int> ze = enc.encode_level(data.rows[i][cc]);
        for (std::size_t h = 0; h < q; ++h) Z(i, h) = ze[h];
        y(i) = data.num(i, yc);
    }
    AgpModel model = agp_fit(X, Z, y, opts);
    model.encoder = enc;
    model.response_name = response;
    return model;
}

inline MixedInput encode_input(const CovariateEncoder& enc, const std::vector<double>& raw_cont,
                               const std::string& level) {
    MixedInput w;
    w.x_cont = enc.encode_continuous(raw_cont);
    w.z_bin = enc.encode_level(level);
    return w;
}

inline void save_agp_model(const std::string& path, const AgpModel& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const Eigen::Index n = model.X.rows();
    out << "doaiq-agp-model v1\n";
    out << "response " << model.response_name << "\n";
    out << "q " << model.q() << " p " << model.p() << " n " << n << "\n";
    out << "rho";
    for (Eigen::Index h = 0; h < model.params.rho.size(); ++h)
        out << ' ' << format_double(model.params.rho(h));
    out << "\ntheta";
    for (Eigen::Index h = 0; h < model.params.theta.size(); ++h)
        out << ' ' << format_double(model.params.theta(h));
    out << "\neta " << format_double(model.params.eta) << "\n";
    out << "tau2 " << format_double(model.params.tau2) << "\n";
    out << "y_mean " << format_double(model.y_mean) << "\n";
    out << "fit " << format_double(model.report.final_nll) << ' ' << model.report.iterations
        << ' ' << format_double(model.report.grad_norm) << ' ' << (model.report.converged ? 1 : 0)
        << ' ' << model.report.best_restart << ' ' << (model.report.degenerate ? 1 : 0) << "\n";
    if (model.encoder.cont_cols.empty()) out << "encoder none\n";
    else write_encoder(out, model.encoder);
    out << "train\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < model.X.cols(); ++j)
            out << format_double(model.X(i, j)) << ' ';
        for (Eigen::Index h = 0; h < model.Z.cols(); ++h) out << model.Z(i, h) << ' ';
        out << format_double(model.y_centered(i)) << "\n";
    }
    out << "end\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline AgpModel load_agp_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string magic, version;
    in >> magic >> version;
    if (magic != "doaiq-agp-model" || version != "v1")
        throw IoError("'" + path + "' is not a doaiq agp model file");
    AgpModel model;
    std::string tag;
    std::size_t q = 0, p = 0, n = 0;
    in >> tag >> model.response_name;
    in >> tag >> q >> tag >> p >> tag >> n;
    model.params.rho.resize(q);
    model.params.theta.resize(q);
    in >> tag;
    for (std::size_t h = 0; h < q; ++h) in >> model.params.rho(h);
    in >> tag;
    for (std::size_t h = 0; h < q; ++h) in >> model.params.theta(h);
    in >> tag >> model.params.eta;
    in >> tag >> model.params.tau2;
    in >> tag >> model.y_mean;
    int converged = 0, degenerate = 0;
    in >> tag >> model.report.final_nll >> model.report.iterations >> model.report.grad_norm >>
        converged >> model.report.best_restart >> degenerate;
    model.report.converged = converged != 0;
    model.report.degenerate = degenerate != 0;
    // encoder block starts with its own tag
    std::streampos mark = in.tellg();
    in >> tag;
    if (tag != "encoder") throw IoError("model file: expected encoder block");
    std::string next;
    in >> next;
    if (next == "none") {
        // no encoder stored
    } else {
        in.seekg(mark);
        model.encoder = read_encoder(in);
    }
    in >> tag;
    if (tag != "train") throw IoError("model file: expected training block");
    model.X.resize(n, p);
    model.Z.resize(n, q);
    model.y_centered.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) in >> model.X(i, j);
        for (std::size_t h = 0; h < q; ++h) in >> model.Z(i, h);
        in >> model.y_centered(i);
    }
    in >> tag;
    if (!in || tag != "end") throw IoError("model file: truncated training block");

    agp_detail::LikelihoodCache cache(model.X, model.Z);
    const Eigen::MatrixXd R = cache.unit_covariance(
        model.params.rho, model.params.theta,
        model.report.degenerate ? std::max(model.params.eta, 1e-6) : model.params.eta);
    model.L = agp_detail::cholesky_or_throw(R);
    if (model.params.tau2 > 0.0) {
        model.alpha = model.L.triangularView<Eigen::Lower>().solve(model.y_centered);
        model.L.triangularView<Eigen::Lower>().transpose().solveInPlace(model.alpha);
    } else {
        model.alpha = Eigen::VectorXd::Zero(model.X.rows());
    }
    return model;
}

}  // namespace doaiq
