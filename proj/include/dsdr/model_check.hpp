#pragma once

#include <cstdint>
#include <vector>

#include "dsdr/gradcheck.hpp"
#include "dsdr/model.hpp"

namespace dsdr {

inline constexpr double kGradCheckTolerance = 1e-2;

struct ModelGradCheckOptions {
    double step = 1e-2;
    int samples = 50;  // per parameter group
    std::uint64_t seed = 0;
    int size = 16;     // square input side, a multiple of 8
    double abs_floor = 1e-8;
    // Adds a constant to every analytic gradient. Negative control only.
    bool corrupt_gradients = false;
};

struct GroupCheck {
    Group group;
    GradCheckResult result;
    bool passed(double tolerance = kGradCheckTolerance) const { return result.max_rel_error <= tolerance; }
};

// Finite-difference check of the full pricnn-aux objective (lambda = 1) on a
// seeded single synthetic image, one entry per parameter group.
std::vector<GroupCheck> gradcheck_model(const ModelGradCheckOptions& options);

}  // namespace dsdr
