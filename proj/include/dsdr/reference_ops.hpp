#pragma once

#include "dsdr/ops.hpp"

// Serial, loop-by-loop versions of the layer kernels. They follow the defining
// formulas directly and are kept as the oracle for tests and the baseline for
// the kernel benchmark.
namespace dsdr::reference {

Tensor conv2d(const Tensor& input, const ConvFilter& filter);
ops::ConvGradients conv2d_backward(const Tensor& input, const ConvFilter& filter, const Tensor& grad_output);

ops::PoolResult maxpool2x2(const Tensor& input);

// Evaluates the bilinear map through its 1D weight table rather than the
// separable line passes.
Tensor upsample2x_bilinear(const Tensor& input);
Tensor upsample2x_bilinear_backward(const Tensor& grad_output);

}  // namespace dsdr::reference
