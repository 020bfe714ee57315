#include "dsdr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsdr {

GradCheckResult finite_diff_check(const std::function<LossProbe()>& probe, const std::vector<std::span<float>>& params,
                                  const std::vector<std::span<const float>>& analytic, double step, int samples,
                                  Rng& rng, double abs_floor) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    if (params.size() != analytic.size()) throw std::invalid_argument("finite_diff_check: view count mismatch");
    std::size_t total = 0;
    for (std::size_t v = 0; v < params.size(); ++v) {
        if (params[v].size() != analytic[v].size()) {
            throw std::invalid_argument("finite_diff_check: gradient view size mismatch");
        }
        total += params[v].size();
    }
    GradCheckResult result;
    if (total == 0) return result;

    const std::uint64_t base_pattern = probe().pattern;
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (int s = 0; s < samples; ++s) {
        std::size_t flat = pick(rng);
        std::size_t view = 0;
        while (flat >= params[view].size()) flat -= params[view++].size();

        float& p = params[view][flat];
        const float original = p;
        // Divide by the step actually representable in float.
        const float plus = static_cast<float>(original + step);
        const float minus = static_cast<float>(original - step);
        p = plus;
        const LossProbe f_plus = probe();
        p = minus;
        const LossProbe f_minus = probe();
        p = original;
        const bool kinked = f_plus.pattern != base_pattern || f_minus.pattern != base_pattern;

        const double numeric = (f_plus.loss - f_minus.loss) / (static_cast<double>(plus) - minus);
        const double exact = analytic[view][flat];
        const double abs_err = std::abs(exact - numeric);
        const double scale = std::max({std::abs(exact), std::abs(numeric), abs_floor});
        result.max_abs_error = std::max(result.max_abs_error, abs_err);
        result.max_rel_error = std::max(result.max_rel_error, abs_err / scale);
        if (kinked) {
            ++result.kink_crossings;
        } else {
            result.max_rel_error_smooth = std::max(result.max_rel_error_smooth, abs_err / scale);
        }
        ++result.samples;
    }
    return result;
}

GradCheckResult finite_diff_check(const std::function<double()>& loss, const std::vector<std::span<float>>& params,
                                  const std::vector<std::span<const float>>& analytic, double step, int samples,
                                  Rng& rng, double abs_floor) {
    return finite_diff_check([&] { return LossProbe{loss(), 0}; }, params, analytic, step, samples, rng, abs_floor);
}

}  // namespace dsdr
