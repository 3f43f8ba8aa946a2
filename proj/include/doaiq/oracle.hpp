#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doaiq/errors.hpp"
#include "doaiq/factors.hpp"
#include "doaiq/rng.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

// Population variance of the class-proportion vector; larger means more
// imbalance.  Balanced proportions give exactly zero.
inline double variance_feature(const SimplexPoint& x) {
    const std::size_t m = x.dim();
    double mean = 0.0;
    for (std::size_t l = 0; l < m; ++l) mean += x[l];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        const double d = x[l] - mean;
        var += d * d;
    }
    return var / static_cast<double>(m);
}

// Deterministic stand-in for the instrumented experiment: smooth response
// surfaces over the design factors plus seeded, clipped Gaussian noise.
//
// oracle_id "default": y2 (detection) falls off linearly in the mislabel
// proportion, jumps sigmoidally in log z1 around z1 = 1, and degrades mildly
// with class imbalance; y1 (prediction) adds a per-dataset level offset.
// oracle_id "linear": both responses are affine in the regression covariates,
// so a first-order fit is exact up to noise.
struct SyntheticOracle {
    std::string oracle_id = "default";
    double noise_sd = 0.01;
    std::uint64_t seed = 0;
};

namespace oracle_detail {

// imbalance normalized so a vertex maps to 1 and the centroid to 0
inline double normalized_imbalance(const SimplexPoint& x) {
    const double m = static_cast<double>(x.dim());
    return variance_feature(x) * m * m / (m - 1.0);
}

inline double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace oracle_detail

// Returns (y1, y2).  The categorical offset is keyed by the level's position
// in the declared level list.
inline std::pair<double, double> synthetic_response(const DesignRun& run,
                                                    const SyntheticOracle& oracle,
                                                    const std::vector<std::string>& levels) {
    if (oracle.noise_sd < 0.0) throw ParameterError("oracle: noise_sd must be >= 0");
    std::size_t level_idx = 0;
    {
        bool found = false;
        for (std::size_t i = 0; i < levels.size(); ++i)
            if (levels[i] == run.z_cat) {
                level_idx = i;
                found = true;
                break;
            }
        if (!found) throw ParameterError("oracle: run level '" + run.z_cat +
                                         "' not in the declared level list");
    }
    if (run.z_cont.size() < 3)
        throw ParameterError("oracle: expected at least 3 continuous factors (z1,z2,z3)");
    const double z1 = run.z_cont[0];
    const double z2 = run.z_cont[1];
    const double z3 = run.z_cont[2];
    if (!(z1 > 0.0)) throw ParameterError("oracle: z1 must be positive");

    const double imbalance = oracle_detail::normalized_imbalance(run.x);
    const double lvl = static_cast<double>(level_idx);

    double y1 = 0.0, y2 = 0.0;
    if (oracle.oracle_id == "default") {
        const double gate = std::tanh(1.2 * std::log(z1));  // jump around z1 = 1
        const double bump2 = std::exp(-(z2 - 2.0) * (z2 - 2.0) / 0.5);
        y2 = 0.55 + 0.20 * gate - 0.45 * (z3 - 0.3) - 0.08 * imbalance + 0.05 * bump2;
        y1 = 0.62 + 0.15 * gate - 0.25 * (z3 - 0.3) - 0.12 * imbalance +
             0.06 * std::exp(-(z2 - 1.6) * (z2 - 1.6) / 0.8) - 0.06 * lvl;
    } else if (oracle.oracle_id == "linear") {
        const double u1 = std::log(z1) / (2.0 * std::log(500.0));  // [-0.5, 0.5] on the default range
        y2 = 0.60 + 0.10 * u1 - 0.30 * (z3 - 0.3) + 0.02 * (z2 - 2.0) - 0.05 * run.x[0];
        y1 = 0.65 + 0.08 * u1 - 0.20 * (z3 - 0.3) + 0.03 * (z2 - 2.0) - 0.04 * run.x[0] -
             0.05 * lvl;
    } else {
        throw ParameterError("oracle: unknown oracle_id '" + oracle.oracle_id + "'");
    }

    if (oracle.noise_sd > 0.0) {
        Rng noise(mix_seed(mix_seed(oracle.seed, run.run_id), 0x0acce55ULL));
        y1 += oracle.noise_sd * noise.normal();
        y2 += oracle.noise_sd * noise.normal();
    }
    return {oracle_detail::clip01(y1), oracle_detail::clip01(y2)};
}

}  // namespace doaiq
