#include "dsdr/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsdr {

GaussianKernel gaussian_kernel(double sigma, int half_width) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    if (half_width < 1) throw std::invalid_argument("gaussian_kernel: half_width must be >= 1");
    GaussianKernel k;
    k.sigma = sigma;
    k.half_width = half_width;
    const int size = k.size();
    k.values.resize(static_cast<std::size_t>(size) * size);
    const double denom = 2.0 * sigma * sigma;
    double total = 0.0;
    for (int dy = -half_width; dy <= half_width; ++dy) {
        for (int dx = -half_width; dx <= half_width; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / denom);
            k.values[static_cast<std::size_t>(dy + half_width) * size + (dx + half_width)] = v;
            total += v;
        }
    }
    k.normalizer = 1.0 / total;
    for (double& v : k.values) v *= k.normalizer;
    return k;
}

DensityMap render_density_map(int rows, int cols, const CentroidSet& centroids, const GaussianKernel& kernel) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("render_density_map: negative image size");
    std::vector<double> acc(static_cast<std::size_t>(rows) * cols, 0.0);
    const int hw = kernel.half_width;
    for (const Centroid& c : centroids) {
        if (c.x < 0 || c.x >= cols || c.y < 0 || c.y >= rows) {
            throw std::invalid_argument("render_density_map: centroid (" + std::to_string(c.x) + "," +
                                        std::to_string(c.y) + ") outside " + std::to_string(cols) + "x" +
                                        std::to_string(rows) + " image");
        }
        for (int dy = -hw; dy <= hw; ++dy) {
            const int i = c.y + dy;
            if (i < 0 || i >= rows) continue;
            for (int dx = -hw; dx <= hw; ++dx) {
                const int j = c.x + dx;
                if (j < 0 || j >= cols) continue;
                acc[static_cast<std::size_t>(i) * cols + j] += kernel.at(dy, dx);
            }
        }
    }
    DensityMap map(rows, cols);
    for (std::size_t i = 0; i < acc.size(); ++i) map.values[i] = static_cast<float>(acc[i]);
    return map;
}

DensityMap downsample_block_sum(const DensityMap& map, int a, int b) {
    if (a < 1 || b < 1) throw std::invalid_argument("downsample_block_sum: factors must be positive");
    if (map.rows % a != 0 || map.cols % b != 0) {
        throw std::invalid_argument("downsample_block_sum: " + std::to_string(map.rows) + "x" +
                                    std::to_string(map.cols) + " map is not divisible by (" + std::to_string(a) +
                                    "," + std::to_string(b) + ")");
    }
    DensityMap out(map.rows / a, map.cols / b);
    for (int oi = 0; oi < out.rows; ++oi) {
        for (int oj = 0; oj < out.cols; ++oj) {
            double s = 0.0;
            for (int i = oi * a; i < (oi + 1) * a; ++i)
                for (int j = oj * b; j < (oj + 1) * b; ++j) s += map.at(i, j);
            out.at(oi, oj) = static_cast<float>(s);
        }
    }
    return out;
}

double count_from_density(const DensityMap& map) {
    double s = 0.0;
    for (float v : map.values) s += v;
    return s;
}

Tensor to_tensor(const DensityMap& map) { return Tensor({1, 1, map.rows, map.cols}, map.values); }

DensityMap from_tensor(const Tensor& t, int item) {
    if (t.c() != 1) throw std::invalid_argument("from_tensor: expected a single-channel tensor");
    if (item < 0 || item >= t.n()) throw std::invalid_argument("from_tensor: item out of range");
    DensityMap map(t.h(), t.w());
    std::copy_n(t.item(item), map.values.size(), map.values.begin());
    return map;
}

}  // namespace dsdr
