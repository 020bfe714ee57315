#pragma once

#include <vector>

#include "dsdr/tensor.hpp"

namespace dsdr {

// Cell centroid in pixel coordinates: x is the column, y is the row.
struct Centroid {
    int x = 0;
    int y = 0;
    friend bool operator==(const Centroid&, const Centroid&) = default;
};

using CentroidSet = std::vector<Centroid>;

// Discrete isotropic Gaussian on a (2K+1) x (2K+1) support, normalised so the
// entries sum to one.
struct GaussianKernel {
    double sigma = 0.0;
    int half_width = 0;
    double normalizer = 0.0;  // C such that C * sum(exp(...)) == 1
    std::vector<double> values;

    int size() const { return 2 * half_width + 1; }
    // Offsets dy (row) and dx (column) in [-K, K].
    double at(int dy, int dx) const {
        return values[static_cast<std::size_t>(dy + half_width) * size() + (dx + half_width)];
    }
};

struct DensityMap {
    int rows = 0;
    int cols = 0;
    std::vector<float> values;

    DensityMap() = default;
    DensityMap(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0f) {}

    float& at(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
    float at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

// Defaults used for ground truth: sigma 3 px, kernel size 21 (K = 10).
inline constexpr double kDefaultSigma = 3.0;
inline constexpr int kDefaultKernelHalfWidth = 10;

GaussianKernel gaussian_kernel(double sigma, int half_width);

// Superposes one kernel per centroid. Kernel mass outside the image is dropped
// without renormalisation, so cells near the border contribute less than one.
DensityMap render_density_map(int rows, int cols, const CentroidSet& centroids, const GaussianKernel& kernel);

// Sums non-overlapping a x b blocks (a rows, b columns).
DensityMap downsample_block_sum(const DensityMap& map, int a, int b);

double count_from_density(const DensityMap& map);

// Conversions between a single-channel map and a (1,1,rows,cols) tensor.
Tensor to_tensor(const DensityMap& map);
DensityMap from_tensor(const Tensor& t, int item = 0);

}  // namespace dsdr
