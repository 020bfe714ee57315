#include <gtest/gtest.h>

#include <cmath>

#include "dsdr/density.hpp"
#include "oracles.hpp"

using namespace dsdr;
using dsdr::testing::gaussian_mass;
using dsdr::testing::interior_centroids;

TEST(GaussianKernel, NormalisedAndSymmetric) {
    for (double sigma : {0.5, 1.0, 3.0, 7.5})
        for (int k : {1, 4, 10}) {
            const GaussianKernel g = gaussian_kernel(sigma, k);
            ASSERT_EQ(g.size(), 2 * k + 1);
            double s = 0.0;
            for (double v : g.values) s += v;
            EXPECT_NEAR(s, 1.0, 1e-9);
            for (int dy = -k; dy <= k; ++dy)
                for (int dx = -k; dx <= k; ++dx) {
                    EXPECT_EQ(g.at(dy, dx), g.at(-dy, dx));
                    EXPECT_EQ(g.at(dy, dx), g.at(dy, -dx));
                }
        }
}

TEST(GaussianKernel, DefaultCentreValue) {
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    EXPECT_EQ(g.size(), 21);
    EXPECT_NEAR(g.at(0, 0), 1.0 / gaussian_mass(3.0, 10), 1e-15);
}

TEST(GaussianKernel, WideSigmaTendsToUniform) {
    const GaussianKernel g = gaussian_kernel(1e6, 1);
    for (double v : g.values) EXPECT_NEAR(v, 1.0 / 9.0, 1e-9);
}

TEST(GaussianKernel, RejectsBadParameters) {
    EXPECT_THROW(gaussian_kernel(0.0, 3), std::invalid_argument);
    EXPECT_THROW(gaussian_kernel(-1.0, 3), std::invalid_argument);
    EXPECT_THROW(gaussian_kernel(1.0, 0), std::invalid_argument);
}

TEST(Render, EmptyAndCentred) {
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    EXPECT_EQ(count_from_density(render_density_map(64, 64, {}, g)), 0.0);
    EXPECT_NEAR(count_from_density(render_density_map(64, 64, {{32, 32}}, g)), 1.0, 1e-6);
}

TEST(Render, CornerKeepsOneQuadrant) {
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    double quadrant = 0.0;
    for (int dy = 0; dy <= 10; ++dy)
        for (int dx = 0; dx <= 10; ++dx) quadrant += std::exp(-(dx * dx + dy * dy) / 18.0);
    quadrant /= gaussian_mass(3.0, 10);
    EXPECT_NEAR(count_from_density(render_density_map(64, 64, {{0, 0}}, g)), quadrant, 1e-6);
}

TEST(Render, OutOfBoundsCentroidThrows) {
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    EXPECT_THROW(render_density_map(8, 8, {{8, 0}}, g), std::invalid_argument);
    EXPECT_THROW(render_density_map(8, 8, {{0, -1}}, g), std::invalid_argument);
}

TEST(Render, InteriorMassConservation) {
    Rng rng(17);
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    for (int trial = 0; trial < 30; ++trial) {
        const CentroidSet s = interior_centroids(1 + trial, 64, 64, 10, rng);
        const DensityMap m = render_density_map(64, 64, s, g);
        EXPECT_NEAR(count_from_density(m), static_cast<double>(s.size()), 1e-4);
        for (float v : m.values) EXPECT_GE(v, 0.0f);
    }
}

TEST(Render, LinearInCentroidSets) {
    Rng rng(5);
    const GaussianKernel g = gaussian_kernel(2.0, 6);
    const CentroidSet a = interior_centroids(7, 32, 40, 0, rng), b = interior_centroids(5, 32, 40, 0, rng);
    CentroidSet ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const DensityMap ma = render_density_map(32, 40, a, g), mb = render_density_map(32, 40, b, g);
    const DensityMap mab = render_density_map(32, 40, ab, g);
    for (std::size_t i = 0; i < mab.values.size(); ++i) EXPECT_NEAR(mab.values[i], ma.values[i] + mb.values[i], 1e-6);
}

TEST(Render, TranslationCovariance) {
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    const DensityMap a = render_density_map(64, 64, {{20, 25}}, g);
    const DensityMap b = render_density_map(64, 64, {{23, 21}}, g);  // dx = 3, dy = -4
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j) {
            const int si = i + 4, sj = j - 3;
            const float shifted = (si >= 0 && si < 64 && sj >= 0 && sj < 64) ? a.at(si, sj) : 0.0f;
            EXPECT_EQ(b.at(i, j), shifted);
        }
}

TEST(BlockSum, Examples) {
    DensityMap ones(4, 4);
    std::fill(ones.values.begin(), ones.values.end(), 1.0f);
    const DensityMap d = downsample_block_sum(ones, 2, 2);
    EXPECT_EQ(d.rows, 2);
    EXPECT_EQ(d.values, std::vector<float>(4, 4.0f));

    DensityMap spike(8, 8);
    spike.at(3, 5) = 1.0f;
    const DensityMap s = downsample_block_sum(spike, 4, 4);
    EXPECT_EQ(s.values, (std::vector<float>{0, 1, 0, 0}));

    EXPECT_THROW(downsample_block_sum(DensityMap(6, 8), 4, 4), std::invalid_argument);
}

TEST(BlockSum, ConservesMass) {
    Rng rng(8);
    const GaussianKernel g = gaussian_kernel(3.0, 10);
    for (int trial = 0; trial < 20; ++trial) {
        const DensityMap y = render_density_map(64, 64, interior_centroids(12, 64, 64, 0, rng), g);
        const double total = count_from_density(y);
        for (int f : {8, 4, 2}) {
            EXPECT_LE(std::abs(count_from_density(downsample_block_sum(y, f, f)) - total), 1e-5 * total);
        }
    }
}

TEST(DensityTensor, RoundTrip) {
    DensityMap m(2, 3);
    m.values = {1, 2, 3, 4, 5, 6};
    const Tensor t = to_tensor(m);
    EXPECT_EQ(t.shape(), (Shape{1, 1, 2, 3}));
    const DensityMap back = from_tensor(t);
    EXPECT_EQ(back.values, m.values);
    EXPECT_EQ(count_from_density(DensityMap(5, 5)), 0.0);
}
