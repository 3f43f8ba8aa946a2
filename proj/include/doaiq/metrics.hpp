#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "doaiq/candidates.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/maxpro.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

// Nearest-neighbor distances d_i = min_{j != i} ||x_i - x_j|| and their mean.
struct NearestNeighborProfile {
    std::vector<double> d;
    double d_bar = 0.0;
};

inline NearestNeighborProfile nearest_neighbor_profile(std::span<const SimplexPoint> rows) {
    detail::check_design_rows(rows);
    const std::size_t n = rows.size();
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = squared_distance(rows[i], rows[j]);
            d2[i] = std::min(d2[i], s);
            d2[j] = std::min(d2[j], s);
        }
    NearestNeighborProfile profile;
    profile.d.resize(n);
    const double dup_tol2 = kSimplexTol * kSimplexTol * static_cast<double>(rows.front().dim());
    for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= dup_tol2)
            throw DegenerateDesignError("nearest-neighbor profile: duplicate design rows");
        profile.d[i] = std::sqrt(d2[i]);
    }
    profile.d_bar = std::accumulate(profile.d.begin(), profile.d.end(), 0.0) /
                    static_cast<double>(n);
    return profile;
}

// Coverage measure: (1/d_bar) * sum_i (d_i - d_bar)^2, bigger is better.
inline double pm1_coverage(std::span<const SimplexPoint> rows) {
    const NearestNeighborProfile p = nearest_neighbor_profile(rows);
    double ss = 0.0;
    for (double di : p.d) {
        const double dev = di - p.d_bar;
        ss += dev * dev;
    }
    return ss / p.d_bar;
}

// Maximin measure: max_i d_i, bigger is better.
inline double pm2_maximin(std::span<const SimplexPoint> rows) {
    const NearestNeighborProfile p = nearest_neighbor_profile(rows);
    return *std::max_element(p.d.begin(), p.d.end());
}

namespace detail {

// Exact farthest pair.  Candidate coordinates are nonnegative, so
// ||p-q||^2 <= ||p||^2 + ||q||^2; scanning pairs in decreasing norm order and
// cutting once the bound drops below the incumbent keeps this near-linear on
// centroid-style pools while remaining exact.
inline std::pair<std::size_t, std::size_t> farthest_pair(std::span<const SimplexPoint> pts) {
    const std::size_t n = pts.size();
    std::vector<double> norm2(n);
    for (std::size_t i = 0; i < n; ++i) norm2[i] = squared_norm(pts[i]);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (norm2[a] != norm2[b]) return norm2[a] > norm2[b];
        return a < b;
    });

    double best = -1.0;
    std::pair<std::size_t, std::size_t> best_pair{0, 1};
    for (std::size_t a = 0; a + 1 < n; ++a) {
        const std::size_t i = order[a];
        if (norm2[i] + norm2[order[a + 1]] < best) break;
        for (std::size_t b = a + 1; b < n; ++b) {
            const std::size_t j = order[b];
            if (norm2[i] + norm2[j] < best) break;
            const double d2 = squared_distance(pts[i], pts[j]);
            std::pair<std::size_t, std::size_t> pair{std::min(i, j), std::max(i, j)};
            if (d2 > best || (d2 == best && pair < best_pair)) {
                if (d2 > best) best = d2;
                best_pair = pair;
            }
        }
    }
    return best_pair;
}

}  // namespace detail

// Classical Kennard-Stone selection: seed with the farthest pair, then
// repeatedly add the pool point with the largest minimum distance to the
// selection.  Ties break to the lowest pool index.
inline ConstrainedDesign kennard_stone_select(const CandidateSet& pool, std::size_t n_runs,
                                              double criterion_delta2 = 1e-6) {
    if (n_runs < 2) throw ParameterError("kennard-stone: need at least 2 runs");
    if (pool.size() < n_runs)
        throw ParameterError("kennard-stone: pool smaller than run count");

    const auto& pts = pool.points;
    const auto seed_pair = detail::farthest_pair(pts);

    std::vector<SimplexPoint> selected;
    selected.reserve(n_runs);
    std::vector<bool> taken(pts.size(), false);
    std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());

    auto add = [&](std::size_t idx) {
        taken[idx] = true;
        selected.push_back(pts[idx]);
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (!taken[i]) min_d2[i] = std::min(min_d2[i], squared_distance(pts[i], pts[idx]));
    };
    add(seed_pair.first);
    add(seed_pair.second);

    while (selected.size() < n_runs) {
        std::size_t next = pts.size();
        double best = -1.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (taken[i]) continue;
            if (min_d2[i] > best) {
                best = min_d2[i];
                next = i;
            }
        }
        add(next);
    }
    const double crit = maxpro_criterion(selected, criterion_delta2);
    return {std::move(selected), crit};
}

}  // namespace doaiq
