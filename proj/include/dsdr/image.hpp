#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsdr/density.hpp"
#include "dsdr/tensor.hpp"

namespace dsdr {

// 8-bit grayscale image, row-major.
struct GrayImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int r, int c) : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, 0) {}

    std::uint8_t& at(int i, int j) { return pixels[static_cast<std::size_t>(i) * cols + j]; }
    std::uint8_t at(int i, int j) const { return pixels[static_cast<std::size_t>(i) * cols + j]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Pixel values scaled to [0, 1] as a (1,1,rows,cols) tensor.
Tensor to_tensor(const GrayImage& image);

struct AnnotatedImage {
    std::string id;
    GrayImage image;
    CentroidSet centroids;
};

}  // namespace dsdr
