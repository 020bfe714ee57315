#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dsdr {

// Dimensions of a rank-4 tensor in (batch, channels, rows, cols) order.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense row-major float tensor. The universal value type of the engine.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    std::size_t index(int b, int ch, int i, int j) const {
        return ((static_cast<std::size_t>(b) * shape_.c + ch) * shape_.h + i) * shape_.w + j;
    }
    float& at(int b, int ch, int i, int j) { return data_[index(b, ch, i, j)]; }
    float at(int b, int ch, int i, int j) const { return data_[index(b, ch, i, j)]; }

    // Pointer to the first element of item b (all channels).
    float* item(int b) { return data_.data() + static_cast<std::size_t>(b) * shape_.c * shape_.plane(); }
    const float* item(int b) const {
        return data_.data() + static_cast<std::size_t>(b) * shape_.c * shape_.plane();
    }

    void fill(float v);
    double sum() const;
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Inner product accumulated in double precision.
double dot(const Tensor& a, const Tensor& b);

// A convolution filter bank: weights (out, in, k, k) plus one bias per output.
struct ConvFilter {
    Tensor weights;
    std::vector<float> bias;

    int out_channels() const { return weights.n(); }
    int in_channels() const { return weights.c(); }
    int kernel() const { return weights.h(); }

    static ConvFilter zeros(int out_channels, int in_channels, int kernel);
    std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

}  // namespace dsdr
