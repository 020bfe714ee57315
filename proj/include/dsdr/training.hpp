#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsdr/density.hpp"
#include "dsdr/image.hpp"
#include "dsdr/model.hpp"

namespace dsdr {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 100;
    int epochs = 1;
    std::array<double, 3> lambda = {1.0, 1.0, 1.0};
    double sigma = kDefaultSigma;
    int kernel_half_width = kDefaultKernelHalfWidth;
    std::uint64_t seed = 0;
    Variant variant = Variant::pricnn_aux;
    int folds = 5;
    // Targets are multiplied by this factor; counts are divided by it.
    double density_scale = 1.0;
    // Divide each squared-error term by the pixel count as well as the batch size.
    bool per_pixel_mean = false;

    void validate() const;  // throws std::invalid_argument
};

struct LossBreakdown {
    double primary = 0.0;
    std::array<double, 3> aux = {0.0, 0.0, 0.0};
    double overall = 0.0;
};

struct LossResult {
    LossBreakdown value;
    OutputGradients grads;  // aux entries empty when the head has no gradient
};

// Ground-truth low-resolution targets: block sums of `target` by kAuxFactors.
std::array<Tensor, 3> gtlr_targets(const Tensor& target);

// Combined objective L + sum_k lambda_k L_k where each term is the batch mean of
// the squared Frobenius distance between prediction and target.
LossResult loss_overall(const ForwardOutputs& out, const Tensor& target, const std::array<double, 3>& lambda,
                        bool per_pixel_mean = false, bool want_grads = true);

// p <- p - lr * g for every scalar.
void sgd_step(ModelParams& params, const ParamGradients& grads, double lr);

struct LossRecord {
    int epoch = 0;
    int batch = 0;
    LossBreakdown loss;
};

using ProgressSink = std::function<void(const LossRecord&)>;

// CSV helpers for the loss log: `epoch,batch,L,L1,L2,L3,L_overall`.
std::string loss_log_header();
std::string format_loss_record(const LossRecord& r);

struct TrainResult {
    ModelParams params;
    std::vector<LossRecord> history;
};

// Stacks images into a (B,1,H,W) batch; all images must share a size.
Tensor stack_images(const std::vector<AnnotatedImage>& dataset, const std::vector<std::size_t>& indices);

TrainResult train(const std::vector<AnnotatedImage>& dataset, const TrainConfig& config,
                  const ProgressSink& sink = {});

// One forward/backward pass on a batch; used by training and gradient checks.
struct StepResult {
    LossBreakdown loss;
    ParamGradients grads;
};
StepResult loss_and_gradients(const ModelParams& params, const Tensor& images, const Tensor& targets,
                              const TrainConfig& config);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Seeded shuffle, then contiguous partitions whose sizes differ by at most one.
std::vector<Fold> kfold_split(std::size_t n_items, int folds, std::uint64_t seed);

struct ImageError {
    std::string id;
    double true_count = 0.0;
    double estimated_count = 0.0;
    double abs_error = 0.0;
};

struct EvalReport {
    std::vector<ImageError> per_image;
    double mae = 0.0;
    double std = 0.0;  // sample standard deviation of the absolute errors
};

// Builds a report from (id, true, estimated) triples.
EvalReport summarize(std::vector<ImageError> rows);

double estimate_count(const ModelParams& params, const GrayImage& image, double density_scale = 1.0);

EvalReport evaluate(const ModelParams& params, const std::vector<AnnotatedImage>& dataset,
                    double density_scale = 1.0);

struct FoldOutcome {
    int fold = 0;
    ModelParams params;
    EvalReport report;
};

struct CrossValidationReport {
    std::vector<FoldOutcome> folds;
    EvalReport pooled;  // all validation images together
};

// Fold f trains with seed config.seed + f. With `parallel` the folds run on
// separate threads; results are identical to the sequential run.
CrossValidationReport cross_validate(const std::vector<AnnotatedImage>& dataset, const TrainConfig& config,
                                     bool parallel = false);

}  // namespace dsdr
