#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dsdr/image.hpp"

namespace dsdr {

// Synthetic fluorescence-like images: Gaussian blobs on a flat background with
// additive noise, 8-bit quantised. The blob centres are the annotation.
struct SynthConfig {
    int num_images = 4;
    int rows = 64;
    int cols = 64;
    int cells_min = 5;
    int cells_max = 30;
    std::pair<double, double> blob_sigma_range = {1.5, 3.0};
    std::pair<double, double> amplitude_range = {0.4, 0.9};
    double noise_sigma = 0.03;
    double background_level = 0.1;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument

    // 512x512 images with 202..834 cells (uniform, mean 518).
    static SynthConfig paper_scale();
};

struct SyntheticCell {
    Centroid center;
    double sigma = 0.0;
    double amplitude = 0.0;
};

struct SyntheticImage {
    AnnotatedImage annotated;
    std::vector<SyntheticCell> cells;
};

// Minimum distance between two centroids, in pixels.
inline constexpr double kMinCellSeparation = 2.0;

// Half width of a rendered blob: ceil(4 sigma).
int blob_radius(double sigma);

std::vector<SyntheticImage> synth_generate_detailed(const SynthConfig& config);
std::vector<AnnotatedImage> synth_generate(const SynthConfig& config);

}  // namespace dsdr
