#include "dsdr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsdr {

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw std::invalid_argument("Tensor: negative dimension in " + to_string(shape));
    }
    data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.size()) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + to_string(shape));
    }
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("dot: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.data()[i]) * b.data()[i];
    return s;
}

ConvFilter ConvFilter::zeros(int out_channels, int in_channels, int kernel) {
    if (kernel % 2 == 0) throw std::invalid_argument("ConvFilter: kernel size must be odd");
    ConvFilter f;
    f.weights = Tensor({out_channels, in_channels, kernel, kernel});
    f.bias.assign(static_cast<std::size_t>(out_channels), 0.0f);
    return f;
}

}  // namespace dsdr
