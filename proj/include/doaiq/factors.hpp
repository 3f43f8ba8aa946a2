#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doaiq/errors.hpp"
#include "doaiq/rng.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

// One experimental factor: a bounded continuous variable (linear or log
// spacing) or a categorical variable with named levels.
struct FactorSpec {
    enum class Kind { Continuous, Categorical };
    enum class Scale { Linear, Log };

    std::string name;
    Kind kind = Kind::Continuous;
    double lower = 0.0;
    double upper = 1.0;
    Scale scale = Scale::Linear;
    std::vector<std::string> levels;

    void validate() const {
        if (name.empty()) throw ParameterError("factor spec: missing name");
        if (kind == Kind::Continuous) {
            if (!(lower < upper))
                throw ParameterError("factor '" + name + "': lower must be below upper");
            if (scale == Scale::Log && !(lower > 0.0))
                throw ParameterError("factor '" + name + "': log scale needs lower > 0");
        } else {
            if (levels.size() < 2)
                throw ParameterError("factor '" + name + "': categorical needs >= 2 levels");
        }
    }
};

// Parses factor specs from a flat key-value file, one factor per line:
//   z1 = continuous 0.002 500 log
//   z4 = categorical MNIST FashionMNIST
inline std::vector<FactorSpec> parse_factor_specs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open factor spec file '" + path + "'");
    std::vector<FactorSpec> specs;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("factor spec line missing '=': " + line);
        FactorSpec spec;
        {
            std::istringstream name_in(line.substr(0, eq));
            name_in >> spec.name;
        }
        std::istringstream rest(line.substr(eq + 1));
        std::string kind;
        rest >> kind;
        if (kind == "continuous") {
            std::string scale;
            if (!(rest >> spec.lower >> spec.upper))
                throw ParameterError("factor '" + spec.name + "': expected bounds");
            if (rest >> scale) {
                if (scale == "log") spec.scale = FactorSpec::Scale::Log;
                else if (scale == "linear") spec.scale = FactorSpec::Scale::Linear;
                else throw ParameterError("factor '" + spec.name + "': unknown scale '" + scale + "'");
            }
        } else if (kind == "categorical") {
            spec.kind = FactorSpec::Kind::Categorical;
            std::string level;
            while (rest >> level) spec.levels.push_back(level);
        } else {
            throw ParameterError("factor '" + spec.name + "': unknown kind '" + kind + "'");
        }
        spec.validate();
        specs.push_back(std::move(spec));
    }
    return specs;
}

// Random Latin hypercube in natural units: one draw per equal-probability
// stratum per factor, with stratum order permuted independently per column.
// Log-scaled factors stratify geometrically.
inline std::vector<std::vector<double>> latin_hypercube(const std::vector<FactorSpec>& specs,
                                                        std::size_t n, std::uint64_t seed,
                                                        bool maximin_pass = false) {
    if (n < 1) throw ParameterError("latin hypercube: need n >= 1");
    for (const auto& s : specs) {
        s.validate();
        if (s.kind != FactorSpec::Kind::Continuous)
            throw ParameterError("latin hypercube: factor '" + s.name + "' is not continuous");
    }
    Rng rng(seed);
    const std::size_t p = specs.size();

    // unit-cube sample first
    std::vector<std::vector<double>> unit(n, std::vector<double>(p));
    std::vector<std::size_t> perm(n);
    for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        for (std::size_t i = 0; i < n; ++i)
            unit[i][c] = (static_cast<double>(perm[i]) + rng.uniform01()) / static_cast<double>(n);
    }

    if (maximin_pass && n >= 2 && p >= 1) {
        // greedy within-column swaps, accepted only when the minimum pairwise
        // distance (unit cube) strictly increases
        auto min_pair_d2 = [&]() {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i + 1 < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < p; ++c) {
                        const double d = unit[i][c] - unit[j][c];
                        s += d * d;
                    }
                    best = std::min(best, s);
                }
            return best;
        };
        double incumbent = min_pair_d2();
        const std::size_t attempts = 50 * n;
        for (std::size_t a = 0; a < attempts; ++a) {
            const std::size_t c = static_cast<std::size_t>(rng.uniform_index(p));
            const std::size_t i = static_cast<std::size_t>(rng.uniform_index(n));
            std::size_t j = static_cast<std::size_t>(rng.uniform_index(n));
            if (i == j) continue;
            std::swap(unit[i][c], unit[j][c]);
            const double trial = min_pair_d2();
            if (trial > incumbent) incumbent = trial;
            else std::swap(unit[i][c], unit[j][c]);
        }
    }

    // map to natural units
    std::vector<std::vector<double>> out(n, std::vector<double>(p));
    for (std::size_t c = 0; c < p; ++c) {
        const auto& s = specs[c];
        for (std::size_t i = 0; i < n; ++i) {
            const double u = unit[i][c];
            out[i][c] = s.scale == FactorSpec::Scale::Log
                            ? std::exp(std::log(s.lower) + u * (std::log(s.upper) - std::log(s.lower)))
                            : s.lower + u * (s.upper - s.lower);
        }
    }
    return out;
}

// One row of the assembled design.
struct DesignRun {
    std::size_t run_id = 0;           // 1-based, sequential over the whole array
    std::size_t replicate_index = 0;  // 1-based within a setting
    SimplexPoint x;
    std::vector<double> z_cont;
    std::string z_cat;
};

struct FullDesign {
    std::vector<DesignRun> runs;
    std::size_t replicate_count = 0;
    std::size_t n_x = 0;
    std::size_t n_z = 0;
    std::size_t n_levels = 0;

    // replicate-free setting identifier; replicates are adjacent by construction
    std::size_t setting_of(std::size_t run_index) const { return run_index / replicate_count; }
    std::size_t n_settings() const { return n_x * n_z * n_levels; }
};

inline constexpr std::size_t kDefaultCrossArrayCap = 5'000'000;

// Full cross array: every categorical level x every unconstrained row x every
// constrained row x every replicate, in that lexicographic order.
inline FullDesign cross_array(const std::vector<SimplexPoint>& x_rows,
                              const std::vector<std::vector<double>>& z_rows,
                              const std::vector<std::string>& cat_levels,
                              std::size_t replicates,
                              std::size_t cap = kDefaultCrossArrayCap) {
    if (x_rows.empty() || z_rows.empty() || cat_levels.empty())
        throw ParameterError("cross array: all components must be nonempty");
    if (replicates < 1) throw ParameterError("cross array: replicates must be >= 1");

    const std::size_t total_settings = x_rows.size() * z_rows.size() * cat_levels.size();
    if (total_settings > cap / replicates)
        throw CapacityError("cross array: " + std::to_string(total_settings) + " settings x " +
                            std::to_string(replicates) + " replicates exceeds cap " +
                            std::to_string(cap));

    FullDesign design;
    design.replicate_count = replicates;
    design.n_x = x_rows.size();
    design.n_z = z_rows.size();
    design.n_levels = cat_levels.size();
    design.runs.reserve(total_settings * replicates);

    std::size_t run_id = 1;
    for (const auto& level : cat_levels)
        for (const auto& z : z_rows)
            for (const auto& x : x_rows)
                for (std::size_t rep = 1; rep <= replicates; ++rep)
                    design.runs.push_back({run_id++, rep, x, z, level});
    return design;
}

}  // namespace doaiq
