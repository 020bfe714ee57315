#include "dsdr/image.hpp"

namespace dsdr {

Tensor to_tensor(const GrayImage& image) {
    Tensor t({1, 1, image.rows, image.cols});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t.data()[i] = image.pixels[i] / 255.0f;
    return t;
}

}  // namespace dsdr
