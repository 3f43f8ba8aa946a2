#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doaiq/candidates.hpp"

using doaiq::CandidateConfig;
using doaiq::CandidateSet;
using doaiq::SimplexPoint;

namespace {

// independent O(K^2) dedup used as the counting oracle
std::vector<std::vector<double>> brute_force_pool(std::size_t m, std::size_t max_subset,
                                                  const std::vector<double>& fractions) {
    const auto centroid = doaiq::generate_centroid_points(m, max_subset);
    std::vector<std::vector<double>> all;
    for (const auto& p : centroid) all.push_back(p.coords);
    for (std::size_t i = 0; i + 1 < centroid.size(); ++i)
        for (std::size_t j = i + 1; j < centroid.size(); ++j)
            for (double lam : fractions) {
                std::vector<double> c(m);
                for (std::size_t l = 0; l < m; ++l)
                    c[l] = lam * centroid[i][l] + (1.0 - lam) * centroid[j][l];
                all.push_back(std::move(c));
            }
    std::vector<std::vector<double>> unique;
    for (const auto& c : all) {
        bool dup = false;
        for (const auto& u : unique) {
            bool close = true;
            for (std::size_t l = 0; l < m; ++l)
                if (std::abs(c[l] - u[l]) > 1e-12) {
                    close = false;
                    break;
                }
            if (close) {
                dup = true;
                break;
            }
        }
        if (!dup) unique.push_back(c);
    }
    return unique;
}

bool contains_point(const std::vector<SimplexPoint>& pts, const std::vector<double>& c) {
    for (const auto& p : pts) {
        bool close = true;
        for (std::size_t l = 0; l < c.size(); ++l)
            if (std::abs(p[l] - c[l]) > 1e-12) {
                close = false;
                break;
            }
        if (close) return true;
    }
    return false;
}

}  // namespace

TEST(CentroidPoints, M3FullLattice) {
    const auto pts = doaiq::generate_centroid_points(3, 3);
    ASSERT_EQ(pts.size(), 7u);  // 2^3 - 1 subsets
    EXPECT_TRUE(contains_point(pts, {1, 0, 0}));
    EXPECT_TRUE(contains_point(pts, {0, 1, 0}));
    EXPECT_TRUE(contains_point(pts, {0, 0, 1}));
    EXPECT_TRUE(contains_point(pts, {0.5, 0.5, 0}));
    EXPECT_TRUE(contains_point(pts, {0.5, 0, 0.5}));
    EXPECT_TRUE(contains_point(pts, {0, 0.5, 0.5}));
    EXPECT_TRUE(contains_point(pts, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(CentroidPoints, CountMatchesBinomialSums) {
    EXPECT_EQ(doaiq::generate_centroid_points(10, 2).size(), 55u);  // C(10,1)+C(10,2)
    EXPECT_EQ(doaiq::generate_centroid_points(10, 10).size(), 1023u);
    EXPECT_EQ(doaiq::generate_centroid_points(5, 3).size(), 5u + 10u + 10u);
}

TEST(CentroidPoints, RejectsBadArguments) {
    EXPECT_THROW(doaiq::generate_centroid_points(1, 1), doaiq::ParameterError);
    EXPECT_THROW(doaiq::generate_centroid_points(3, 0), doaiq::ParameterError);
    EXPECT_THROW(doaiq::generate_centroid_points(3, 4), doaiq::ParameterError);
}

TEST(CandidateSet, M2MidpointsDeduplicated) {
    CandidateConfig cfg;
    cfg.segment_fractions = {0.5};
    const auto set = doaiq::generate_candidate_set(2, cfg, 1);
    ASSERT_EQ(set.size(), 5u);
    EXPECT_TRUE(contains_point(set.points, {1, 0}));
    EXPECT_TRUE(contains_point(set.points, {0, 1}));
    EXPECT_TRUE(contains_point(set.points, {0.5, 0.5}));
    EXPECT_TRUE(contains_point(set.points, {0.75, 0.25}));
    EXPECT_TRUE(contains_point(set.points, {0.25, 0.75}));
}

TEST(CandidateSet, M3MidpointCountMatchesBruteForce) {
    CandidateConfig cfg;
    cfg.segment_fractions = {0.5};
    const auto set = doaiq::generate_candidate_set(3, cfg, 1);
    const auto oracle = brute_force_pool(3, 3, {0.5});
    EXPECT_EQ(set.size(), oracle.size());
    EXPECT_EQ(set.size(), 22u);  // frozen from the oracle
    for (const auto& c : oracle) EXPECT_TRUE(contains_point(set.points, c));
}

TEST(CandidateSet, DefaultConfigMatchesBruteForce) {
    const auto set = doaiq::generate_candidate_set(4, CandidateConfig{}, 7);
    const auto oracle = brute_force_pool(4, 4, {0.25, 0.5, 0.75});
    EXPECT_EQ(set.size(), oracle.size());
}

TEST(CandidateSet, SimplexClosure) {
    const auto set = doaiq::generate_candidate_set(6, CandidateConfig{}, 3);
    for (const auto& p : set.points) {
        EXPECT_NO_THROW(p.validate());
        double sum = 0.0;
        for (std::size_t l = 0; l < p.dim(); ++l) sum += p[l];
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(CandidateSet, NoDuplicatesWithinTolerance) {
    const auto set = doaiq::generate_candidate_set(5, CandidateConfig{}, 11);
    for (std::size_t i = 0; i + 1 < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            EXPECT_FALSE(doaiq::same_point(set.points[i], set.points[j]));
}

TEST(CandidateSet, DeterministicAndSeedSensitive) {
    CandidateConfig cfg;
    cfg.max_pairs = 40;  // force subsampling: C(15,2)=105 pairs at m=4
    const auto a = doaiq::generate_candidate_set(4, cfg, 42);
    const auto b = doaiq::generate_candidate_set(4, cfg, 42);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(a.points[i][l], b.points[i][l]);

    const auto c = doaiq::generate_candidate_set(4, cfg, 43);
    bool any_difference = a.size() != c.size();
    for (std::size_t i = 0; !any_difference && i < a.size(); ++i)
        any_difference = !doaiq::same_point(a.points[i], c.points[i]);
    EXPECT_TRUE(any_difference);
}

TEST(CandidateSet, EnlargingFractionsNeverRemovesPoints) {
    CandidateConfig small;
    small.segment_fractions = {0.5};
    CandidateConfig big;
    big.segment_fractions = {0.5, 0.25, 0.75, 0.125};
    const auto s = doaiq::generate_candidate_set(4, small, 5);
    const auto b = doaiq::generate_candidate_set(4, big, 5);
    EXPECT_GE(b.size(), s.size());
    for (const auto& p : s.points) EXPECT_TRUE(contains_point(b.points, p.coords));
}

TEST(CandidateSet, RejectsBadFractions) {
    CandidateConfig cfg;
    cfg.segment_fractions = {};
    EXPECT_THROW(doaiq::generate_candidate_set(3, cfg, 1), doaiq::ParameterError);
    cfg.segment_fractions = {0.0};
    EXPECT_THROW(doaiq::generate_candidate_set(3, cfg, 1), doaiq::ParameterError);
    cfg.segment_fractions = {1.0};
    EXPECT_THROW(doaiq::generate_candidate_set(3, cfg, 1), doaiq::ParameterError);
}

TEST(SimplexPoint, ValidationCatchesViolations) {
    EXPECT_THROW(SimplexPoint({0.5}), doaiq::ParameterError);
    EXPECT_THROW(SimplexPoint({0.5, 0.6}), doaiq::ParameterError);
    EXPECT_THROW(SimplexPoint({-0.1, 1.1}), doaiq::ParameterError);
    EXPECT_NO_THROW(SimplexPoint({0.25, 0.75}));
}
