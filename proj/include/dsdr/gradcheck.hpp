#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dsdr/init.hpp"

namespace dsdr {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    int samples = 0;
    // Samples whose +/- perturbation changed the activation pattern, and the
    // worst error among the samples that did not.
    int kink_crossings = 0;
    double max_rel_error_smooth = 0.0;
};

// A loss value plus a signature of the piecewise-linear regime it was
// evaluated in (ReLU masks, pooling winners). Equal signatures at p-h, p and
// p+h mean no kink lies between the two probes.
struct LossProbe {
    double loss = 0.0;
    std::uint64_t pattern = 0;
};

// Compares analytic gradients against central differences at `samples`
// randomly chosen scalars of `params` (a list of flat parameter views, with
// `analytic` holding the matching gradients). `loss` is re-evaluated after each
// in-place perturbation. The error for one scalar is
//   |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckResult finite_diff_check(const std::function<LossProbe()>& probe, const std::vector<std::span<float>>& params,
                                  const std::vector<std::span<const float>>& analytic, double step, int samples,
                                  Rng& rng, double abs_floor = 1e-8);

GradCheckResult finite_diff_check(const std::function<double()>& loss, const std::vector<std::span<float>>& params,
                                  const std::vector<std::span<const float>>& analytic, double step, int samples,
                                  Rng& rng, double abs_floor = 1e-8);

}  // namespace dsdr
