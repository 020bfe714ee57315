#pragma once

#include <random>

#include "dsdr/tensor.hpp"

namespace dsdr {

using Rng = std::mt19937_64;

// Orthogonal initialisation of a (out, in, k, k) filter bank. The weights are
// viewed as an out x (in*k*k) matrix whose rows (or columns, when there are
// fewer of them) are orthonormal, then scaled by `gain`. Biases start at 0.
ConvFilter orthogonal_init(Shape shape, double gain, Rng& rng);

}  // namespace dsdr
