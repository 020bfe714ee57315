#include "dsdr/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dsdr {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be a positive finite number");
    }
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    for (double l : lambda) {
        if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("each lambda must lie in [0, 1]");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (kernel_half_width < 1) throw std::invalid_argument("kernel half width must be >= 1");
    if (folds < 2) throw std::invalid_argument("folds must be >= 2");
    if (!(density_scale > 0.0) || !std::isfinite(density_scale)) {
        throw std::invalid_argument("density scale must be a positive finite number");
    }
}

std::array<Tensor, 3> gtlr_targets(const Tensor& target) {
    std::array<Tensor, 3> out;
    for (int k = 0; k < 3; ++k) {
        const int f = kAuxFactors[k];
        out[k] = Tensor({target.n(), 1, target.h() / f, target.w() / f});
        for (int b = 0; b < target.n(); ++b) {
            const DensityMap low = downsample_block_sum(from_tensor(target, b), f, f);
            std::copy(low.values.begin(), low.values.end(), out[k].item(b));
        }
    }
    return out;
}

namespace {

// Batch-mean squared Frobenius distance and, optionally, its gradient scaled by `weight`.
double squared_error(const Tensor& pred, const Tensor& target, bool per_pixel_mean, double weight, Tensor* grad) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("loss: prediction " + to_string(pred.shape()) + " vs target " +
                                    to_string(target.shape()));
    }
    double norm = std::max(pred.n(), 1);
    if (per_pixel_mean) norm *= static_cast<double>(pred.shape().plane());
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.data()[i]) - target.data()[i];
        total += d * d;
    }
    if (grad) {
        *grad = Tensor(pred.shape());
        const double scale = 2.0 * weight / norm;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            grad->data()[i] = static_cast<float>(scale * (static_cast<double>(pred.data()[i]) - target.data()[i]));
        }
    }
    return total / norm;
}

}  // namespace

LossResult loss_overall(const ForwardOutputs& out, const Tensor& target, const std::array<double, 3>& lambda,
                        bool per_pixel_mean, bool want_grads) {
    LossResult r;
    r.value.primary = squared_error(out.y_hat, target, per_pixel_mean, 1.0, want_grads ? &r.grads.y_hat : nullptr);
    r.value.overall = r.value.primary;
    if (out.aux[0].empty()) return r;

    const auto low = gtlr_targets(target);
    for (int k = 0; k < 3; ++k) {
        const bool grad_needed = want_grads && lambda[k] != 0.0;
        r.value.aux[k] = squared_error(out.aux[k], low[k], per_pixel_mean, lambda[k],
                                       grad_needed ? &r.grads.aux[k] : nullptr);
        r.value.overall += lambda[k] * r.value.aux[k];
    }
    return r;
}

void sgd_step(ModelParams& params, const ParamGradients& grads, double lr) {
    if (grads.size() != params.layers.size()) throw std::invalid_argument("sgd_step: gradient count mismatch");
    const float step = static_cast<float>(lr);
    for (std::size_t l = 0; l < grads.size(); ++l) {
        ConvFilter& p = params.layers[l].filter;
        const ConvFilter& g = grads[l];
        if (p.weights.shape() != g.weights.shape() || p.bias.size() != g.bias.size()) {
            throw std::invalid_argument("sgd_step: gradient shape mismatch for " + params.layers[l].name);
        }
        float* w = p.weights.data();
        const float* gw = g.weights.data();
        for (std::size_t i = 0; i < p.weights.size(); ++i) w[i] -= step * gw[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= step * g.bias[i];
    }
}

std::string loss_log_header() { return "epoch,batch,L,L1,L2,L3,L_overall"; }

std::string format_loss_record(const LossRecord& r) {
    std::ostringstream os;
    os.precision(9);
    os << r.epoch << ',' << r.batch << ',' << r.loss.primary << ',' << r.loss.aux[0] << ',' << r.loss.aux[1] << ','
       << r.loss.aux[2] << ',' << r.loss.overall;
    return os.str();
}

Tensor stack_images(const std::vector<AnnotatedImage>& dataset, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("stack_images: no indices");
    const GrayImage& first = dataset.at(indices.front()).image;
    Tensor x({static_cast<int>(indices.size()), 1, first.rows, first.cols});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const GrayImage& img = dataset.at(indices[b]).image;
        if (img.rows != first.rows || img.cols != first.cols) {
            throw std::invalid_argument("stack_images: images in a batch must share a size");
        }
        float* dst = x.item(static_cast<int>(b));
        for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = img.pixels[i] / 255.0f;
    }
    return x;
}

StepResult loss_and_gradients(const ModelParams& params, const Tensor& images, const Tensor& targets,
                              const TrainConfig& config) {
    Activations cache;
    const ForwardOutputs out = forward(params, images, &cache);
    LossResult loss = loss_overall(out, targets, config.lambda, config.per_pixel_mean);
    return {loss.value, backward(params, out, cache, loss.grads)};
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

void check_training_set(const std::vector<AnnotatedImage>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    const GrayImage& first = dataset.front().image;
    for (const auto& item : dataset) {
        check_model_input({1, 1, item.image.rows, item.image.cols});
        if (item.image.rows != first.rows || item.image.cols != first.cols) {
            throw std::invalid_argument("all training images must share a size; " + item.id + " is " +
                                        std::to_string(item.image.rows) + "x" + std::to_string(item.image.cols));
        }
    }
}

}  // namespace

TrainResult train(const std::vector<AnnotatedImage>& dataset, const TrainConfig& config, const ProgressSink& sink) {
    config.validate();
    check_training_set(dataset);

    const GaussianKernel kernel = gaussian_kernel(config.sigma, config.kernel_half_width);
    const int rows = dataset.front().image.rows, cols = dataset.front().image.cols;
    std::vector<std::vector<float>> targets;
    targets.reserve(dataset.size());
    for (const auto& item : dataset) {
        DensityMap y = render_density_map(rows, cols, item.centroids, kernel);
        for (float& v : y.values) v = static_cast<float>(v * config.density_scale);
        targets.push_back(std::move(y.values));
    }

    Rng init_rng(config.seed);
    Rng order_rng(config.seed ^ kShuffleStream);
    TrainResult result{build_model(config.variant, init_rng), {}};

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, order.size())));
            const Tensor x = stack_images(dataset, idx);
            Tensor y({static_cast<int>(idx.size()), 1, rows, cols});
            for (std::size_t b = 0; b < idx.size(); ++b) {
                std::copy(targets[idx[b]].begin(), targets[idx[b]].end(), y.item(static_cast<int>(b)));
            }
            StepResult step = loss_and_gradients(result.params, x, y, config);
            LossRecord rec{epoch, batch_index, step.loss};
            result.history.push_back(rec);
            if (sink) sink(rec);
            sgd_step(result.params, step.grads, config.learning_rate);
        }
    }
    return result;
}

std::vector<Fold> kfold_split(std::size_t n_items, int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
    if (static_cast<std::size_t>(folds) > n_items) {
        throw std::invalid_argument("kfold_split: " + std::to_string(folds) + " folds requested for " +
                                    std::to_string(n_items) + " items");
    }
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t base = n_items / static_cast<std::size_t>(folds);
    const std::size_t extra = n_items % static_cast<std::size_t>(folds);
    std::vector<Fold> out(static_cast<std::size_t>(folds));
    std::size_t start = 0;
    for (std::size_t f = 0; f < out.size(); ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        std::vector<bool> held(n_items, false);
        for (std::size_t i = start; i < start + size; ++i) {
            out[f].validation.push_back(order[i]);
            held[order[i]] = true;
        }
        for (std::size_t i = 0; i < n_items; ++i) {
            if (!held[i]) out[f].train.push_back(i);
        }
        std::sort(out[f].validation.begin(), out[f].validation.end());
        start += size;
    }
    return out;
}

EvalReport summarize(std::vector<ImageError> rows) {
    EvalReport r;
    r.per_image = std::move(rows);
    const std::size_t n = r.per_image.size();
    if (n == 0) return r;
    double sum = 0.0;
    for (auto& row : r.per_image) {
        row.abs_error = std::abs(row.estimated_count - row.true_count);
        sum += row.abs_error;
    }
    r.mae = sum / static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (const auto& row : r.per_image) ss += (row.abs_error - r.mae) * (row.abs_error - r.mae);
        r.std = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return r;
}

double estimate_count(const ModelParams& params, const GrayImage& image, double density_scale) {
    const ForwardOutputs out = forward(params, to_tensor(image));
    return out.y_hat.sum() / density_scale;
}

EvalReport evaluate(const ModelParams& params, const std::vector<AnnotatedImage>& dataset, double density_scale) {
    if (dataset.empty()) throw std::invalid_argument("evaluate: dataset is empty");
    std::vector<ImageError> rows;
    rows.reserve(dataset.size());
    for (const auto& item : dataset) {
        check_model_input({1, 1, item.image.rows, item.image.cols});
        rows.push_back({item.id, static_cast<double>(item.centroids.size()),
                        estimate_count(params, item.image, density_scale), 0.0});
    }
    return summarize(std::move(rows));
}

CrossValidationReport cross_validate(const std::vector<AnnotatedImage>& dataset, const TrainConfig& config,
                                     bool parallel) {
    config.validate();
    const auto splits = kfold_split(dataset.size(), config.folds, config.seed);

    auto run_fold = [&](int f) {
        const Fold& split = splits[static_cast<std::size_t>(f)];
        std::vector<AnnotatedImage> train_set, val_set;
        for (std::size_t i : split.train) train_set.push_back(dataset[i]);
        for (std::size_t i : split.validation) val_set.push_back(dataset[i]);
        TrainConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(f);
        TrainResult trained = train(train_set, cfg);
        EvalReport report = evaluate(trained.params, val_set, cfg.density_scale);
        return FoldOutcome{f, std::move(trained.params), std::move(report)};
    };

    CrossValidationReport out;
    if (parallel) {
        std::vector<std::future<FoldOutcome>> pending;
        for (int f = 0; f < config.folds; ++f) pending.push_back(std::async(std::launch::async, run_fold, f));
        for (auto& p : pending) out.folds.push_back(p.get());
    } else {
        for (int f = 0; f < config.folds; ++f) out.folds.push_back(run_fold(f));
    }

    std::vector<ImageError> pooled;
    for (const auto& f : out.folds) pooled.insert(pooled.end(), f.report.per_image.begin(), f.report.per_image.end());
    out.pooled = summarize(std::move(pooled));
    return out;
}

}  // namespace dsdr
