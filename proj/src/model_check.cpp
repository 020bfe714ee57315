#include "dsdr/model_check.hpp"

#include <stdexcept>

#include "dsdr/synth.hpp"
#include "dsdr/training.hpp"

namespace dsdr {

std::vector<GroupCheck> gradcheck_model(const ModelGradCheckOptions& options) {
    if (options.size <= 0 || options.size % 8 != 0) {
        throw std::invalid_argument("gradcheck: input size must be a positive multiple of 8");
    }
    if (options.samples < 1) throw std::invalid_argument("gradcheck: samples must be >= 1");
    if (!(options.step > 0.0)) throw std::invalid_argument("gradcheck: step must be > 0");

    SynthConfig sc;
    sc.num_images = 1;
    sc.rows = sc.cols = options.size;
    sc.cells_min = 3;
    sc.cells_max = 6;
    sc.seed = options.seed;
    const std::vector<AnnotatedImage> data = synth_generate(sc);

    TrainConfig config;
    config.variant = Variant::pricnn_aux;
    config.lambda = {1.0, 1.0, 1.0};
    Rng rng(options.seed);
    ModelParams params = build_model(config.variant, rng);

    const Tensor x = stack_images(data, {0});
    const Tensor y = to_tensor(render_density_map(options.size, options.size, data[0].centroids,
                                                  gaussian_kernel(config.sigma, config.kernel_half_width)));
    StepResult step = loss_and_gradients(params, x, y, config);
    if (options.corrupt_gradients) {
        for (ConvFilter& g : step.grads) {
            for (float& v : g.weights.storage()) v += 1.0f;
            for (float& v : g.bias) v += 1.0f;
        }
    }

    const auto probe = [&] {
        Activations cache;
        const ForwardOutputs out = forward(params, x, &cache);
        return LossProbe{loss_overall(out, y, config.lambda, false, false).value.overall,
                         activation_pattern(out, cache)};
    };

    std::vector<GroupCheck> report;
    for (int g = 0; g < kGroupCount; ++g) {
        std::vector<std::span<float>> views;
        std::vector<std::span<const float>> grads;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            if (static_cast<int>(params.layers[l].group) != g) continue;
            views.emplace_back(params.layers[l].filter.weights.storage());
            grads.emplace_back(step.grads[l].weights.storage());
            views.emplace_back(params.layers[l].filter.bias);
            grads.emplace_back(step.grads[l].bias);
        }
        Rng pick(options.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(g) + 1);
        report.push_back({static_cast<Group>(g), finite_diff_check(probe, views, grads, options.step,
                                                                   options.samples, pick, options.abs_floor)});
    }
    return report;
}

}  // namespace dsdr
