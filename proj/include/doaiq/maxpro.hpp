#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "doaiq/candidates.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/rng.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

struct InnerOptConfig {
    std::size_t max_iters = 200;
    double initial_step = 0.25;   // largest coordinate move tried first
    double shrink = 0.5;
    std::size_t max_backtracks = 40;
};

struct OptimizerConfig {
    std::size_t max_redundant_iters = 10000;  // failed-exchange budget
    double convergence_tol = 1e-8;            // relative criterion change
    double delta2 = 1e-6;                     // regularizer inside squared differences
    InnerOptConfig inner;
    std::uint64_t seed = 0;
};

struct ConstrainedDesign {
    std::vector<SimplexPoint> rows;
    double criterion_value = std::numeric_limits<double>::infinity();
};

struct TraceEntry {
    std::size_t step;
    std::string action;  // init | exchange | refine | converged | exhausted
    double criterion;
};

namespace detail {

inline void check_design_rows(std::span<const SimplexPoint> rows) {
    if (rows.size() < 2) throw ParameterError("design needs at least 2 rows");
    const std::size_t m = rows.front().dim();
    for (const auto& r : rows)
        if (r.dim() != m)
            throw ParameterError("design rows have mismatched dimensions");
}

// product over coordinates of 1/((xi_l - xj_l)^2 + delta2)
inline double pair_term(const SimplexPoint& a, const SimplexPoint& b, double delta2) {
    double prod = 1.0;
    for (std::size_t l = 0; l < a.dim(); ++l) {
        const double d = a[l] - b[l];
        prod *= 1.0 / (d * d + delta2);
    }
    return prod;
}

}  // namespace detail

// Regularized MaxPro criterion: sum over row pairs of the product over
// coordinates of 1/((x_il - x_jl)^2 + delta2).  With delta2 = 0 a coincident
// coordinate pair yields +infinity (signaled through the return value).
inline double maxpro_criterion(std::span<const SimplexPoint> rows, double delta2) {
    detail::check_design_rows(rows);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            total += detail::pair_term(rows[i], rows[j], delta2);
    return total;
}

// One row's share: sum over j != i of the pair term.  Summing over all rows
// double-counts each pair, so the row contributions add up to 2x the criterion.
inline double row_contribution(std::span<const SimplexPoint> rows, std::size_t i,
                               double delta2) {
    detail::check_design_rows(rows);
    if (i >= rows.size()) throw ParameterError("row_contribution: index out of range");
    double total = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j)
        if (j != i) total += detail::pair_term(rows[i], rows[j], delta2);
    return total;
}

// Contribution a foreign point would have against rows, skipping row `skip`.
inline double contribution_of(std::span<const SimplexPoint> rows, const SimplexPoint& p,
                              std::size_t skip, double delta2) {
    double total = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j)
        if (j != skip) total += detail::pair_term(p, rows[j], delta2);
    return total;
}

namespace detail {

// gradient of contribution_of w.r.t. the free point's coordinates
inline std::vector<double> contribution_gradient(std::span<const SimplexPoint> rows,
                                                 const std::vector<double>& x,
                                                 std::size_t skip, double delta2) {
    const std::size_t m = x.size();
    std::vector<double> g(m, 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (j == skip) continue;
        double term = 1.0;
        for (std::size_t l = 0; l < m; ++l) {
            const double d = x[l] - rows[j][l];
            term *= 1.0 / (d * d + delta2);
        }
        for (std::size_t l = 0; l < m; ++l) {
            const double d = x[l] - rows[j][l];
            g[l] += term * (-2.0 * d) / (d * d + delta2);
        }
    }
    return g;
}

inline double contribution_at(std::span<const SimplexPoint> rows, const std::vector<double>& x,
                              std::size_t skip, double delta2) {
    double total = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (j == skip) continue;
        double term = 1.0;
        for (std::size_t l = 0; l < x.size(); ++l) {
            const double d = x[l] - rows[j][l];
            term *= 1.0 / (d * d + delta2);
        }
        total += term;
    }
    return total;
}

}  // namespace detail

// Continuous refinement of a single row: projected gradient descent over the
// simplex with a backtracking line search.  Monotone: the returned point never
// increases the criterion.
inline SimplexPoint refine_row(std::span<const SimplexPoint> rows, std::size_t row_index,
                               double delta2, const InnerOptConfig& inner = {}) {
    detail::check_design_rows(rows);
    if (row_index >= rows.size()) throw ParameterError("refine_row: index out of range");

    std::vector<double> x = rows[row_index].coords;
    double fx = detail::contribution_at(rows, x, row_index, delta2);
    if (!std::isfinite(fx))
        throw DegenerateDesignError("refine_row: criterion is not finite at the start");

    double step = inner.initial_step;
    bool converged = false;
    for (std::size_t it = 0; it < inner.max_iters && !converged; ++it) {
        const std::vector<double> g = detail::contribution_gradient(rows, x, row_index, delta2);
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax == 0.0) break;

        // scale so the first trial moves at most `step` per coordinate
        double alpha = step / gmax;
        bool accepted = false;
        for (std::size_t bt = 0; bt < inner.max_backtracks; ++bt) {
            std::vector<double> trial(x.size());
            for (std::size_t l = 0; l < x.size(); ++l) trial[l] = x[l] - alpha * g[l];
            trial = project_to_simplex(trial);
            const double ft = detail::contribution_at(rows, trial, row_index, delta2);
            if (ft < fx) {
                converged = (fx - ft) < 1e-12 * std::max(fx, 1e-300);
                x = std::move(trial);
                fx = ft;
                accepted = true;
                break;
            }
            alpha *= inner.shrink;
        }
        if (!accepted) break;  // local optimum at this resolution
        step = std::min(inner.initial_step, step * 2.0);
    }
    return SimplexPoint(std::move(x));
}

// Coordinate-exchange search over the candidate pool with continuous
// refinement of each accepted exchange.  Seeded and deterministic.
inline ConstrainedDesign optimize_design(const CandidateSet& candidates, std::size_t n_runs,
                                         const OptimizerConfig& config,
                                         std::vector<TraceEntry>* trace = nullptr) {
    if (n_runs < 2) throw ParameterError("optimize_design: need at least 2 runs");
    if (candidates.size() < n_runs)
        throw ParameterError("optimize_design: candidate pool smaller than run count");

    Rng rng(config.seed);
    std::vector<SimplexPoint> rows;
    rows.reserve(n_runs);
    for (std::size_t idx : rng.sample_indices(candidates.size(), n_runs))
        rows.push_back(candidates.points[idx]);

    double crit = maxpro_criterion(rows, config.delta2);
    std::vector<double> contrib(n_runs);
    auto recompute_contribs = [&]() {
        for (std::size_t i = 0; i < n_runs; ++i)
            contrib[i] = row_contribution(rows, i, config.delta2);
    };
    recompute_contribs();

    std::size_t step_no = 0;
    auto record = [&](const char* action, double value) {
        if (trace) trace->push_back({step_no, action, value});
        ++step_no;
    };
    record("init", crit);

    std::vector<std::size_t> scan_order(candidates.size());
    for (std::size_t i = 0; i < scan_order.size(); ++i) scan_order[i] = i;
    std::vector<std::size_t> row_order(n_runs);

    std::size_t failures = 0;
    while (failures <= config.max_redundant_iters) {
        // rows in decreasing contribution, worst exchanged first; ties break
        // to the lowest index
        for (std::size_t i = 0; i < n_runs; ++i) row_order[i] = i;
        std::stable_sort(row_order.begin(), row_order.end(),
                         [&](std::size_t a, std::size_t b) { return contrib[a] > contrib[b]; });

        bool improved = false;
        for (std::size_t row : row_order) {
            rng.shuffle(scan_order);
            for (std::size_t pos = 0; pos < scan_order.size(); ++pos) {
                const SimplexPoint& cand = candidates.points[scan_order[pos]];
                const double cand_contrib = contribution_of(rows, cand, row, config.delta2);
                const double new_crit = crit - contrib[row] + cand_contrib;
                if (new_crit < crit) {
                    rows[row] = cand;
                    record("exchange", new_crit);
                    rows[row] = refine_row(rows, row, config.delta2, config.inner);
                    const double before = crit;
                    crit = maxpro_criterion(rows, config.delta2);
                    recompute_contribs();
                    record("refine", crit);
                    improved = true;
                    if (std::abs(before - crit) <
                        config.convergence_tol * std::max(before, 1e-300)) {
                        record("converged", crit);
                        return {std::move(rows), crit};
                    }
                    break;
                }
                ++failures;
                if (failures > config.max_redundant_iters) return {std::move(rows), crit};
            }
            if (improved) break;  // re-rank rows against the updated design
        }
        // every row failed a full candidate scan: no single exchange can
        // improve the design, so the remaining failure budget is moot
        if (!improved) {
            record("exhausted", crit);
            break;
        }
    }
    return {std::move(rows), crit};
}

// Monte Carlo estimate of the modified maximin criterion
// E_theta sum_{i<j} (sum_l theta_l (x_il-x_jl)^2)^(-p/2) with theta uniform on
// the simplex.  With p = 2m this expectation recovers the unregularized
// MaxPro criterion.
inline double montecarlo_maximin_expectation(std::span<const SimplexPoint> rows, double p,
                                             std::size_t samples, std::uint64_t seed) {
    detail::check_design_rows(rows);
    if (samples < 1) throw ParameterError("monte carlo: need at least one sample");
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            if (same_point(rows[i], rows[j]))
                throw DegenerateDesignError("monte carlo: coincident design rows");

    const std::size_t m = rows.front().dim();
    const std::size_t npairs = rows.size() * (rows.size() - 1) / 2;
    std::vector<double> sqdiff(npairs * m);
    std::size_t k = 0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            for (std::size_t l = 0; l < m; ++l) {
                const double d = rows[i][l] - rows[j][l];
                sqdiff[k * m + l] = d * d;
            }
            ++k;
        }

    Rng rng(seed);
    const double half_p = p / 2.0;
    double mean = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::vector<double> theta = sample_simplex_uniform(m, rng);
        double f = 0.0;
        for (std::size_t pair = 0; pair < npairs; ++pair) {
            double dot = 0.0;
            for (std::size_t l = 0; l < m; ++l) dot += theta[l] * sqdiff[pair * m + l];
            f += std::pow(dot, -half_p);
        }
        mean += (f - mean) / static_cast<double>(s + 1);
    }
    return mean;
}

}  // namespace doaiq
