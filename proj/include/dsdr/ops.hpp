#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dsdr/tensor.hpp"

// Layer kernels used by the density regression networks. Every forward map has
// an exact adjoint. Batch items are processed in parallel with OpenMP; anything
// reduced across the batch is summed in item order so results do not depend on
// the thread count.
namespace dsdr::ops {

// "Same" convolution, stride 1, zero padding of k/2 on every side.
Tensor conv2d(const Tensor& input, const ConvFilter& filter);

struct ConvGradients {
    Tensor input;       // empty when not requested
    ConvFilter filter;  // d/dweights and d/dbias
};

ConvGradients conv2d_backward(const Tensor& input, const ConvFilter& filter, const Tensor& grad_output,
                              bool want_input_grad = true);

Tensor relu(const Tensor& input);
// `activation` may be either the ReLU input or its output; the gradient passes
// where it is strictly positive.
Tensor relu_backward(const Tensor& activation, const Tensor& grad_output);

struct PoolResult {
    Tensor output;
    // Winning offset (0..3, row-major inside the 2x2 window) per output element.
    std::vector<std::uint8_t> argmax;
};

PoolResult maxpool2x2(const Tensor& input);
Tensor maxpool2x2_backward(const PoolResult& pooled, const Tensor& grad_output);

// Bilinear x2 upsampling with half-pixel centres and clamped edges. Along each
// axis, for source length L and i in [0, L):
//   out[2i]   = 0.75 * in[i] + 0.25 * in[max(i-1, 0)]
//   out[2i+1] = 0.75 * in[i] + 0.25 * in[min(i+1, L-1)]
// The 2D map applies this along columns, then rows.
Tensor upsample2x_bilinear(const Tensor& input);
Tensor upsample2x_bilinear_backward(const Tensor& grad_output);

// Channel concatenation, `a` first.
Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& grad_output, int a_channels);

}  // namespace dsdr::ops
