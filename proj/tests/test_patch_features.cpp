#include <gtest/gtest.h>

#include <random>

#include "hiercore/error.hpp"
#include "hiercore/patch_features.hpp"
#include "oracles.hpp"

using namespace hiercore;

namespace {

LayerMap random_map(std::uint32_t h, std::uint32_t w, std::uint32_t c, std::uint32_t seed, int id = 0) {
    LayerMap m{id, h, w, c, std::vector<float>(std::size_t{h} * w * c)};
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& v : m.values) v = u(rng);
    return m;
}

}  // namespace

TEST(Window, ExtentAndPatchCount) {
    EXPECT_EQ(pooled_extent(28, 3, 1, 1), 28u);
    EXPECT_EQ(pooled_extent(10, 3, 0, 1), 8u);
    EXPECT_EQ(pooled_extent(10, 3, 1, 2), 5u);
    EXPECT_EQ(patch_count(5, 28, 28, WindowSpec{}), 5u * 28 * 28);
}

TEST(Window, CountNormalisedMeanMatchesDirectSum) {
    const LayerMap m = random_map(6, 5, 3, 1);
    const LayerMap out = aggregate_window(m);
    ASSERT_EQ(out.height, 6u);
    ASSERT_EQ(out.width, 5u);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 5; ++x) {
            for (std::uint32_t c = 0; c < 3; ++c) {
                double s = 0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || xx < 0 || yy >= 6 || xx >= 5) continue;
                        s += m.at(static_cast<std::uint32_t>(yy), static_cast<std::uint32_t>(xx), c);
                        ++n;
                    }
                EXPECT_NEAR(out.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), c), s / n, 1e-6);
            }
        }
    }
}

TEST(Window, ConstantMapIsFixedPoint) {
    LayerMap m{0, 4, 4, 2, std::vector<float>(32, 2.5f)};
    const LayerMap out = aggregate_window(m);
    for (float v : out.values) EXPECT_FLOAT_EQ(v, 2.5f);
}

TEST(Window, EvenWindowIsRejected) {
    EXPECT_THROW(aggregate_window(random_map(4, 4, 1, 2), WindowSpec{2, 2, 1, 1}), Error);
}

TEST(Resize, CornerAlignedBilinearMatchesClosedForm) {
    const LayerMap m = random_map(3, 4, 2, 5);
    const LayerMap r = resize_bilinear(m, 7, 10);
    for (std::uint32_t c = 0; c < 2; ++c) {
        std::vector<float> plane(12);
        for (std::uint32_t i = 0; i < 12; ++i) plane[i] = m.values[i * 2 + c];
        for (std::uint32_t y = 0; y < 7; ++y) {
            for (std::uint32_t x = 0; x < 10; ++x) {
                const double gy = y * 2.0 / 6.0, gx = x * 3.0 / 9.0;
                EXPECT_NEAR(r.at(y, x, c), oracle::bilinear_at(plane, 3, 4, gy, gx), 1e-5);
            }
        }
    }
    // corners are copied exactly
    EXPECT_EQ(r.at(0, 0, 1), m.at(0, 0, 1));
    EXPECT_EQ(r.at(6, 9, 0), m.at(2, 3, 0));
}

TEST(Merge, ConcatenatesOnLargestGridInLayerOrder) {
    const LayerMap fine = random_map(8, 8, 3, 1, 2);
    const LayerMap coarse = random_map(4, 4, 5, 2, 3);
    const std::vector<LayerMap> maps{coarse, fine};
    const PatchTensor t = merge_layers(maps);
    EXPECT_EQ(t.grid_h, 8u);
    EXPECT_EQ(t.grid_w, 8u);
    EXPECT_EQ(t.patch_dim, 8u);
    const LayerMap up = resize_bilinear(coarse, 8, 8);
    for (std::uint32_t y = 0; y < 8; ++y) {
        for (std::uint32_t x = 0; x < 8; ++x) {
            const std::size_t cell = std::size_t{y} * 8 + x;
            for (std::uint32_t c = 0; c < 5; ++c) EXPECT_EQ(t.patches(cell, c), up.at(y, x, c));
            for (std::uint32_t c = 0; c < 3; ++c) EXPECT_EQ(t.patches(cell, 5 + c), fine.at(y, x, c));
        }
    }
}

TEST(Merge, LocalFeaturesAggregateBeforeMerging) {
    const std::vector<LayerMap> maps{random_map(6, 6, 2, 3), random_map(3, 3, 2, 4)};
    const std::vector<LayerMap> pooled{aggregate_window(maps[0]), aggregate_window(maps[1])};
    EXPECT_EQ(local_patch_features(maps).patches, merge_layers(pooled).patches);
}
