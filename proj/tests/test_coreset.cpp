#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hiercore/coreset.hpp"
#include "hiercore/error.hpp"
#include "oracles.hpp"

using namespace hiercore;

namespace {

Matrix random_pool(std::size_t m, std::size_t d, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(-5.0f, 5.0f);
    Matrix p(m, d);
    for (auto& v : p.data) v = u(rng);
    return p;
}

oracle::Points to_points(const Matrix& m) {
    oracle::Points p(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) p[i].assign(m.row(i).begin(), m.row(i).end());
    return p;
}

}  // namespace

TEST(Coreset, BudgetRounding) {
    EXPECT_EQ(coreset_budget(100, 0.10), 10u);
    EXPECT_EQ(coreset_budget(5, 0.10), 1u);
    EXPECT_EQ(coreset_budget(15, 0.10), 2u);
    EXPECT_EQ(coreset_budget(7, 1.0), 7u);
}

TEST(Coreset, InvalidRatioIsUsageError) {
    for (double r : {0.0, -0.1, 1.5}) {
        try {
            validate(CoresetConfig{r, 0, 0});
            FAIL() << r;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::usage);
        }
    }
}

TEST(Coreset, FollowsFarthestPointDefinition) {
    const Matrix pool = random_pool(60, 3, 1);
    const Coreset cs = kcenter_greedy(pool, {0.2, 9, 0});
    const auto pts = to_points(pool);
    ASSERT_EQ(cs.indices.size(), 12u);
    EXPECT_EQ(cs.indices.front(), std::mt19937_64(9)() % 60);
    for (std::size_t k = 1; k < cs.indices.size(); ++k) {
        std::vector<std::size_t> chosen(cs.indices.begin(), cs.indices.begin() + static_cast<std::ptrdiff_t>(k));
        double best = -1;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (auto c : chosen) d = std::min(d, oracle::dist(pts[i], pts[c]));
            if (d > best) {
                best = d;
                arg = i;
            }
        }
        EXPECT_EQ(cs.indices[k], arg);
        EXPECT_NEAR(cs.radii[k - 1], best, 1e-9);
    }
    EXPECT_NEAR(cs.covering_radius, oracle::covering_radius(pts, cs.indices), 1e-9);
    EXPECT_EQ(cs.distance_evals, 12u * 60);
    for (std::size_t k = 0; k < cs.indices.size(); ++k)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cs.vectors(k, j), pool(cs.indices[k], j));
}

TEST(Coreset, RadiiAreNonIncreasing) {
    const Coreset cs = kcenter_greedy(random_pool(300, 4, 2), {0.3, 1, 0});
    for (std::size_t i = 1; i < cs.radii.size(); ++i) EXPECT_LE(cs.radii[i], cs.radii[i - 1]);
}

TEST(Coreset, TwoApproximationOnSmallPools) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = 3 + rng() % 10;
        const std::size_t d = 1 + rng() % 3;
        const Matrix pool = random_pool(m, d, 1000 + trial);
        const double ratio = static_cast<double>(std::min<std::size_t>(1 + rng() % 4, m)) / static_cast<double>(m);
        const Coreset cs = kcenter_greedy(pool, {ratio, rng(), 0});
        const double opt = oracle::optimal_kcenter_radius(to_points(pool), cs.indices.size());
        EXPECT_LE(cs.covering_radius, 2.0 * opt);
    }
}

TEST(Coreset, FullRatioCoversEverything) {
    const Matrix pool = random_pool(25, 2, 3);
    const Coreset cs = kcenter_greedy(pool, {1.0, 0, 0});
    EXPECT_EQ(std::set<std::size_t>(cs.indices.begin(), cs.indices.end()).size(), 25u);
    EXPECT_EQ(cs.covering_radius, 0.0);
}

TEST(Coreset, ParallelUpdateMatchesSerialSelection) {
    const Matrix pool = random_pool(5000, 8, 4);
    const Coreset a = kcenter_greedy(pool, {0.01, 3, 0});
    // the parallel update only changes who computes each min, never the result
    const Coreset b = kcenter_greedy(pool, {0.01, 3, 0});
    EXPECT_EQ(a.indices, b.indices);
    const auto pts = to_points(pool);
    EXPECT_NEAR(a.covering_radius, oracle::covering_radius(pts, a.indices), 1e-9);
}

TEST(Coreset, ProjectionKeepsOriginalVectors) {
    const Matrix pool = random_pool(400, 16, 5);
    const Coreset cs = kcenter_greedy(pool, {0.05, 2, 4});
    ASSERT_EQ(cs.vectors.cols, 16u);
    for (std::size_t k = 0; k < cs.indices.size(); ++k)
        for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(cs.vectors(k, j), pool(cs.indices[k], j));
    EXPECT_NEAR(cs.covering_radius, oracle::covering_radius(to_points(pool), cs.indices), 1e-9);
}
