#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "doaiq/errors.hpp"
#include "doaiq/rng.hpp"

namespace doaiq {

inline constexpr double kSimplexTol = 1e-12;

// A point on the probability simplex: coordinates in [0,1] summing to 1.
struct SimplexPoint {
    std::vector<double> coords;

    SimplexPoint() = default;
    explicit SimplexPoint(std::vector<double> c) : coords(std::move(c)) { validate(); }

    std::size_t dim() const { return coords.size(); }
    double operator[](std::size_t i) const { return coords[i]; }

    void validate() const {
        if (coords.size() < 2)
            throw ParameterError("simplex point needs dimension >= 2, got " +
                                 std::to_string(coords.size()));
        double sum = 0.0;
        for (double c : coords) {
            if (!(c >= 0.0 && c <= 1.0))
                throw ParameterError("simplex coordinate " + std::to_string(c) +
                                     " outside [0,1]");
            sum += c;
        }
        if (std::abs(sum - 1.0) > kSimplexTol)
            throw ParameterError("simplex coordinates sum to " + std::to_string(sum) +
                                 ", not 1");
    }
};

inline bool same_point(const SimplexPoint& a, const SimplexPoint& b, double tol = kSimplexTol) {
    if (a.dim() != b.dim()) return false;
    for (std::size_t l = 0; l < a.dim(); ++l)
        if (std::abs(a[l] - b[l]) > tol) return false;
    return true;
}

inline double squared_distance(const SimplexPoint& a, const SimplexPoint& b) {
    double s = 0.0;
    for (std::size_t l = 0; l < a.dim(); ++l) {
        const double d = a[l] - b[l];
        s += d * d;
    }
    return s;
}

inline double squared_norm(const SimplexPoint& a) {
    double s = 0.0;
    for (std::size_t l = 0; l < a.dim(); ++l) s += a[l] * a[l];
    return s;
}

// Euclidean projection of an arbitrary vector onto the probability simplex
// (sort-based algorithm).
inline std::vector<double> project_to_simplex(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    std::size_t support = 0;
    for (std::size_t k = 0; k < n; ++k) {
        running += u[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) {
            theta = candidate;
            support = k + 1;
        }
    }
    (void)support;
    std::vector<double> out(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::max(v[i] - theta, 0.0);
        sum += out[i];
    }
    // renormalize away the last ulps so downstream invariants hold exactly
    if (sum > 0.0)
        for (double& x : out) x /= sum;
    return out;
}

// Uniform draw from the simplex via normalized exponentials.
inline std::vector<double> sample_simplex_uniform(std::size_t m, Rng& rng) {
    std::vector<double> e(m);
    double sum = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        double u = rng.uniform01();
        while (u <= 0.0) u = rng.uniform01();
        e[l] = -std::log(u);
        sum += e[l];
    }
    for (double& x : e) x /= sum;
    return e;
}

}  // namespace doaiq
