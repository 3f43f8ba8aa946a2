#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "doaiq/errors.hpp"
#include "doaiq/rng.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

struct CandidateConfig {
    std::size_t max_subset_size = 0;  // 0 means "use the full dimension"
    std::vector<double> segment_fractions = {0.25, 0.5, 0.75};
    std::optional<std::size_t> max_pairs = 50000;
};

// Space-filling pool of simplex points: the simplex-centroid lattice plus
// interpolated points on segments between lattice pairs.
struct CandidateSet {
    std::vector<SimplexPoint> points;
    std::size_t dimension = 0;
    CandidateConfig config;

    std::size_t size() const { return points.size(); }
};

namespace detail {

// Hashable fixed-grid key; two points within the dedup tolerance quantize to
// the same key (grid step equals the tolerance).
struct PointKey {
    std::vector<std::int64_t> cells;
    bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
    std::size_t operator()(const PointKey& k) const {
        std::size_t h = 1469598103934665603ULL;
        for (std::int64_t c : k.cells) {
            h ^= static_cast<std::size_t>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }
};

inline PointKey quantize(const std::vector<double>& coords) {
    PointKey k;
    k.cells.reserve(coords.size());
    for (double c : coords)
        k.cells.push_back(static_cast<std::int64_t>(std::llround(c / kSimplexTol)));
    return k;
}

}  // namespace detail

// All centroid-design points with support size up to max_subset_size: for a
// subset S of coordinates, the point putting mass 1/|S| on each member of S.
// Enumeration order: by subset size, then lexicographic within a size.
inline std::vector<SimplexPoint> generate_centroid_points(std::size_t m,
                                                          std::size_t max_subset_size) {
    if (m < 2) throw ParameterError("centroid points: dimension must be >= 2");
    if (max_subset_size < 1 || max_subset_size > m)
        throw ParameterError("centroid points: max_subset_size must be in [1, dimension]");

    std::vector<SimplexPoint> out;
    std::vector<std::size_t> subset;
    for (std::size_t s = 1; s <= max_subset_size; ++s) {
        subset.resize(s);
        for (std::size_t i = 0; i < s; ++i) subset[i] = i;
        while (true) {
            std::vector<double> coords(m, 0.0);
            const double w = 1.0 / static_cast<double>(s);
            for (std::size_t idx : subset) coords[idx] = w;
            // the weights sum to s*(1/s) which may be off by an ulp for s=3,6,...
            double sum = 0.0;
            for (double c : coords) sum += c;
            if (sum != 1.0) coords[subset.back()] += 1.0 - sum;
            out.emplace_back(std::move(coords));

            // advance to the next s-combination of {0..m-1}
            std::size_t i = s;
            while (i > 0 && subset[i - 1] == m - s + (i - 1)) --i;
            if (i == 0) break;
            ++subset[i - 1];
            for (std::size_t j = i; j < s; ++j) subset[j] = subset[j - 1] + 1;
        }
    }
    return out;
}

// Centroid points plus convex combinations along segments between distinct
// centroid pairs, deduplicated.  When the number of pairs exceeds
// config.max_pairs, pairs are subsampled without replacement using `seed`.
inline CandidateSet generate_candidate_set(std::size_t m, CandidateConfig config,
                                           std::uint64_t seed) {
    if (config.segment_fractions.empty())
        throw ParameterError("candidate set: segment_fractions must be nonempty");
    for (double f : config.segment_fractions)
        if (!(f > 0.0 && f < 1.0))
            throw ParameterError("candidate set: segment fraction " + std::to_string(f) +
                                 " outside (0,1)");
    const std::size_t mss = config.max_subset_size == 0 ? m : config.max_subset_size;

    std::vector<SimplexPoint> centroid = generate_centroid_points(m, mss);
    const std::size_t nc = centroid.size();

    CandidateSet set;
    set.dimension = m;
    set.config = config;
    set.config.max_subset_size = mss;

    std::unordered_set<detail::PointKey, detail::PointKeyHash> seen;
    auto push_unique = [&](SimplexPoint p) {
        if (seen.insert(detail::quantize(p.coords)).second)
            set.points.push_back(std::move(p));
    };

    for (const auto& p : centroid) push_unique(p);

    // pair selection is independent of the fraction list, so enlarging the
    // fraction list only ever adds points
    const std::size_t npairs = nc * (nc - 1) / 2;
    std::vector<std::size_t> pair_ids;
    if (config.max_pairs && npairs > *config.max_pairs) {
        Rng rng(seed);
        pair_ids = rng.sample_indices(npairs, *config.max_pairs);
    } else {
        pair_ids.resize(npairs);
        for (std::size_t i = 0; i < npairs; ++i) pair_ids[i] = i;
    }

    for (std::size_t pid : pair_ids) {
        // invert the row-major (i<j) pair index
        std::size_t i = 0;
        std::size_t before = 0;
        while (before + (nc - 1 - i) <= pid) {
            before += nc - 1 - i;
            ++i;
        }
        const std::size_t j = i + 1 + (pid - before);
        const auto& p = centroid[i];
        const auto& q = centroid[j];
        for (double lambda : config.segment_fractions) {
            std::vector<double> coords(m);
            for (std::size_t l = 0; l < m; ++l)
                coords[l] = lambda * p[l] + (1.0 - lambda) * q[l];
            push_unique(SimplexPoint(std::move(coords)));
        }
    }
    return set;
}

}  // namespace doaiq
