#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdr/dataio.hpp"
#include "dsdr/model_check.hpp"
#include "dsdr/synth.hpp"
#include "dsdr/training.hpp"

namespace dsdr::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt(const char* pattern, ...) {
    va_list args;
    va_start(args, pattern);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

// Bad flag combinations and values that only make sense together.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::pair<int, int> parse_pair(const std::string& text, char sep, const char* flag) {
    const auto pos = text.find(sep);
    try {
        if (pos == std::string::npos) throw std::invalid_argument("");
        std::size_t used_a = 0, used_b = 0;
        const int a = std::stoi(text.substr(0, pos), &used_a);
        const int b = std::stoi(text.substr(pos + 1), &used_b);
        if (used_a != pos || used_b != text.size() - pos - 1) throw std::invalid_argument("");
        return {a, b};
    } catch (const std::logic_error&) {
        throw UsageError(std::string(flag) + ": expected <a>" + sep + "<b>, got '" + text + "'");
    }
}

std::array<double, 3> parse_lambda(const std::string& text) {
    std::array<double, 3> out{};
    std::size_t start = 0;
    for (int k = 0; k < 3; ++k) {
        const auto end = text.find(',', start);
        if ((k < 2) == (end == std::string::npos)) throw UsageError("--lambda: expected three comma-separated values");
        const std::string field = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
        try {
            std::size_t used = 0;
            out[static_cast<std::size_t>(k)] = std::stod(field, &used);
            if (used != field.size()) throw std::invalid_argument("");
        } catch (const std::logic_error&) {
            throw UsageError("--lambda: '" + field + "' is not a number");
        }
        start = end + 1;
    }
    for (double l : out) {
        if (!(l >= 0.0 && l <= 1.0)) throw UsageError("--lambda: each value must lie in [0, 1]");
    }
    return out;
}

const std::vector<std::string> kPresets = {"desk", "paper-scale"};
const std::vector<std::string> kModels = {"pricnn-aux", "pricnn", "fcrn"};

struct TrainFlags {
    std::string data;
    std::string preset = "desk";
    std::string model = "pricnn-aux";
    std::string lambda = "1.0,1.0,1.0";
    double lr = 1e-4;
    int batch = 8;
    int epochs = 1;
    std::uint64_t seed = 0;
    double sigma = kDefaultSigma;
    int kernel_size = 2 * kDefaultKernelHalfWidth + 1;
    double density_scale = 1.0;

    CLI::Option* lambda_opt = nullptr;
    CLI::Option* batch_opt = nullptr;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--data", data, "Dataset directory")->required();
        cmd->add_option("--preset", preset, "desk (64x64, batch 8) or paper-scale (batch 100)")
            ->capture_default_str()
            ->check(CLI::IsMember(kPresets));
        cmd->add_option("--model", model, "Network variant")->capture_default_str()->check(CLI::IsMember(kModels));
        lambda_opt = cmd->add_option("--lambda", lambda, "Auxiliary loss weights l1,l2,l3 (pricnn-aux only)")
                         ->capture_default_str();
        cmd->add_option("--lr", lr, "Learning rate")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        batch_opt = cmd->add_option("--batch", batch, "Mini-batch size (100 under --preset paper-scale)")
                        ->capture_default_str()
                        ->check(CLI::Range(1, 1 << 20));
        cmd->add_option("--epochs", epochs, "Passes over the training set")
            ->capture_default_str()
            ->check(CLI::Range(0, 1 << 24));
        cmd->add_option("--seed", seed, "Seed for initialisation and shuffling")->capture_default_str();
        cmd->add_option("--sigma", sigma, "Ground-truth Gaussian sigma in pixels")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--kernel-size", kernel_size, "Ground-truth kernel size (odd)")
            ->capture_default_str()
            ->check(CLI::Range(3, 1001));
        cmd->add_option("--density-scale", density_scale, "Factor applied to density targets")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    }

    TrainConfig config() const {
        TrainConfig c;
        c.variant = *parse_variant(model);
        if (lambda_opt->count() > 0) {
            if (c.variant != Variant::pricnn_aux) {
                throw UsageError("--lambda is only valid with --model pricnn-aux");
            }
            c.lambda = parse_lambda(lambda);
        }
        if (kernel_size % 2 == 0) throw UsageError("--kernel-size must be odd");
        c.learning_rate = lr;
        c.batch_size = (preset == "paper-scale" && batch_opt->count() == 0) ? 100 : batch;
        c.epochs = epochs;
        c.seed = seed;
        c.sigma = sigma;
        c.kernel_half_width = kernel_size / 2;
        c.density_scale = density_scale;
        c.validate();
        return c;
    }
};

void check_sizes(const std::vector<AnnotatedImage>& data) {
    for (const auto& item : data) {
        try {
            check_model_input({1, 1, item.image.rows, item.image.cols});
        } catch (const std::invalid_argument& e) {
            throw UsageError(item.id + ": " + e.what() + " (three 2x2 poolings need dims divisible by 8)");
        }
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---- synth ----

struct SynthFlags {
    std::string out;
    int num_images = 4;
    std::string size = "64x64";
    std::string cells = "5:30";
    std::uint64_t seed = 0;
    std::string preset = "desk";
    CLI::Option* size_opt = nullptr;
    CLI::Option* cells_opt = nullptr;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
    SynthConfig c = f.preset == "paper-scale" ? SynthConfig::paper_scale() : SynthConfig{};
    if (f.preset == "desk" || f.size_opt->count() > 0) std::tie(c.rows, c.cols) = parse_pair(f.size, 'x', "--size");
    if (f.preset == "desk" || f.cells_opt->count() > 0) {
        std::tie(c.cells_min, c.cells_max) = parse_pair(f.cells, ':', "--cells");
    }
    c.num_images = f.num_images;
    c.seed = f.seed;
    c.validate();

    const std::vector<AnnotatedImage> data = synth_generate(c);
    save_dataset(f.out, data);

    double sum = 0.0, sq = 0.0;
    for (const auto& item : data) {
        const double n = static_cast<double>(item.centroids.size());
        out << item.id << ' ' << item.centroids.size() << '\n';
        sum += n;
        sq += n * n;
    }
    const double n = static_cast<double>(data.size());
    const double mean = sum / n;
    const double sd = data.size() > 1 ? std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1))) : 0.0;
    out << fmt("%zu images, %dx%d, cells per image %.1f +/- %.1f\n", data.size(), c.rows, c.cols, mean, sd);
    return kExitOk;
}

// ---- density ----

struct DensityFlags {
    std::string data;
    double sigma = kDefaultSigma;
    int kernel_size = 2 * kDefaultKernelHalfWidth + 1;
};

int cmd_density(const DensityFlags& f, std::ostream& out) {
    if (f.kernel_size % 2 == 0) throw UsageError("--kernel-size must be odd");
    const DatasetLayout layout{f.data};
    const GaussianKernel kernel = gaussian_kernel(f.sigma, f.kernel_size / 2);
    const std::vector<std::string> ids = list_dataset_ids(f.data);
    if (ids.empty()) throw IoError("no images found under " + (layout.root / "images").string());
    fs::create_directories(layout.root / "density");
    for (const auto& id : ids) {
        if (!fs::exists(layout.annotation(id))) {
            throw IoError("missing annotation for image '" + id + "' (" + layout.annotation(id).string() + ")");
        }
        const GrayImage image = read_pgm(layout.image(id));
        const DensityMap map = render_density_map(image.rows, image.cols, read_centroids(layout.annotation(id)), kernel);
        write_dmap(layout.density(id), map);
        out << fmt("%s %.4f\n", id.c_str(), count_from_density(map));
    }
    return kExitOk;
}

// ---- train ----

struct TrainCmdFlags {
    TrainFlags train;
    std::string out;
    std::string log;
    bool assert_converge = false;
};

int cmd_train(const TrainCmdFlags& f, std::ostream& out, std::ostream& err) {
    const TrainConfig config = f.train.config();
    const std::vector<AnnotatedImage> data = load_dataset(f.train.data);
    if (data.empty()) throw UsageError("dataset " + f.train.data + " has no images");
    check_sizes(data);

    std::string log = loss_log_header() + "\n";
    const TrainResult result = train(data, config, [&](const LossRecord& r) { log += format_loss_record(r) + "\n"; });

    save_checkpoint(f.out, result.params, static_cast<float>(config.density_scale));
    const fs::path log_path = f.log.empty() ? fs::path(f.out + ".loss.csv") : fs::path(f.log);
    write_text(log_path, log);

    if (result.history.empty()) {
        out << "no training steps run\n";
        return kExitOk;
    }
    const double first = result.history.front().loss.overall;
    const double last = result.history.back().loss.overall;
    out << fmt("steps %zu initial_loss %.6g final_loss %.6g ratio %.4g\n", result.history.size(), first, last,
               first > 0.0 ? last / first : 0.0);
    if (f.assert_converge && !(last < 0.01 * first)) {
        err << "training did not converge: final loss is not below 1% of the initial loss\n";
        return kExitFailure;
    }
    return kExitOk;
}

// ---- count ----

struct CountFlags {
    std::string checkpoint;
    std::vector<std::string> images;
    std::string dump;
};

int cmd_count(const CountFlags& f, std::ostream& out) {
    if (!f.dump.empty() && f.images.size() != 1) throw UsageError("--dump-density needs exactly one image");
    const Checkpoint ck = load_checkpoint(f.checkpoint);
    for (const auto& path : f.images) {
        const GrayImage image = read_pgm(path);
        const std::string id = fs::path(path).stem().string();
        check_sizes({{id, image, {}}});
        const ForwardOutputs pred = forward(ck.params, to_tensor(image));
        DensityMap map = from_tensor(pred.y_hat);
        for (float& v : map.values) v /= ck.density_scale;
        out << fmt("%s %.2f\n", id.c_str(), count_from_density(map));
        if (!f.dump.empty()) write_dmap(f.dump, map);
    }
    return kExitOk;
}

// ---- eval ----

struct EvalFlags {
    std::string data;
    std::string checkpoint;
    bool oracle = false;
};

void print_report(const EvalReport& r, std::ostream& out) {
    out << "id,true_count,estimated_count,abs_error\n";
    for (const auto& row : r.per_image) {
        out << fmt("%s,%.0f,%.3f,%.3f\n", row.id.c_str(), row.true_count, row.estimated_count, row.abs_error);
    }
    out << fmt("MAE,%.3f\nSTD,%.3f\n", r.mae, r.std);
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
    if (f.oracle == !f.checkpoint.empty()) throw UsageError("eval needs exactly one of --checkpoint or --oracle");
    const std::vector<AnnotatedImage> data = load_dataset(f.data);
    if (data.empty()) throw UsageError("dataset " + f.data + " has no images");
    if (f.oracle) {
        const DatasetLayout layout{f.data};
        std::vector<ImageError> rows;
        for (const auto& item : data) {
            rows.push_back({item.id, static_cast<double>(item.centroids.size()),
                            count_from_density(read_dmap(layout.density(item.id))), 0.0});
        }
        print_report(summarize(std::move(rows)), out);
        return kExitOk;
    }
    check_sizes(data);
    const Checkpoint ck = load_checkpoint(f.checkpoint);
    print_report(evaluate(ck.params, data, ck.density_scale), out);
    return kExitOk;
}

// ---- xval ----

struct XvalFlags {
    TrainFlags train;
    std::string out;
    int folds = 5;
    bool parallel = false;
};

int cmd_xval(const XvalFlags& f, std::ostream& out) {
    TrainConfig config = f.train.config();
    config.folds = f.folds;
    const std::vector<AnnotatedImage> data = load_dataset(f.train.data);
    if (static_cast<std::size_t>(f.folds) > data.size()) {
        throw UsageError(fmt("--folds %d exceeds the dataset size (%zu images)", f.folds, data.size()));
    }
    check_sizes(data);

    const CrossValidationReport report = cross_validate(data, config, f.parallel);
    fs::create_directories(f.out);
    std::string csv = "fold,mae,std\n";
    for (const auto& fold : report.folds) {
        save_checkpoint(fs::path(f.out) / fmt("fold%d.drmw", fold.fold + 1), fold.params,
                        static_cast<float>(config.density_scale));
        csv += fmt("%d,%.3f,%.3f\n", fold.fold + 1, fold.report.mae, fold.report.std);
    }
    csv += fmt("pooled,%.3f,%.3f\n", report.pooled.mae, report.pooled.std);
    write_text(fs::path(f.out) / "xval.csv", csv);
    out << csv;
    return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(const ModelGradCheckOptions& o, std::ostream& out) {
    const std::vector<GroupCheck> report = gradcheck_model(o);
    out << fmt("gradcheck step=%g samples=%d seed=%llu size=%d tolerance=%g\n", o.step, o.samples,
               static_cast<unsigned long long>(o.seed), o.size, kGradCheckTolerance);
    bool ok = true;
    for (const auto& g : report) {
        const GradCheckResult& r = g.result;
        out << fmt("%-7s max_rel=%.3e max_abs=%.3e kink_crossings=%d/%d max_rel_smooth=%.3e %s\n",
                   std::string(group_name(g.group)).c_str(), r.max_rel_error, r.max_abs_error, r.kink_crossings,
                   r.samples, r.max_rel_error_smooth, g.passed() ? "PASS" : "FAIL");
        ok = ok && g.passed();
    }
    return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Density-regression cell counting: data generation, training, counting and evaluation."};
    app.name("dsdr");
    app.require_subcommand(1);
    app.get_formatter()->column_width(36);

    SynthFlags synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
    synth_cmd->add_option("--out", synth.out, "Output dataset directory")->required();
    synth_cmd->add_option("--num-images", synth.num_images, "Number of images")
        ->capture_default_str()
        ->check(CLI::Range(1, 1 << 20));
    synth.size_opt = synth_cmd->add_option("--size", synth.size, "Image size ROWSxCOLS")->capture_default_str();
    synth.cells_opt = synth_cmd->add_option("--cells", synth.cells, "Cell count range MIN:MAX")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--preset", synth.preset, "desk or paper-scale (512x512, 202:834 cells)")
        ->capture_default_str()
        ->check(CLI::IsMember(kPresets));

    DensityFlags density;
    CLI::App* density_cmd = app.add_subcommand("density", "Render ground-truth density maps for a dataset");
    density_cmd->add_option("--data", density.data, "Dataset directory")->required();
    density_cmd->add_option("--sigma", density.sigma, "Gaussian sigma in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    density_cmd->add_option("--kernel-size", density.kernel_size, "Kernel size (odd)")
        ->capture_default_str()
        ->check(CLI::Range(3, 1001));

    TrainCmdFlags trainf;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint and loss log");
    trainf.train.add_to(train_cmd);
    train_cmd->add_option("--out", trainf.out, "Checkpoint path")->required();
    train_cmd->add_option("--log", trainf.log, "Loss log CSV path (default: <out>.loss.csv)");
    train_cmd->add_flag("--assert-converge", trainf.assert_converge,
                        "Exit 1 unless the last loss is below 1% of the first");

    CountFlags count;
    CLI::App* count_cmd = app.add_subcommand("count", "Estimate cell counts for images");
    count_cmd->add_option("--checkpoint", count.checkpoint, "Checkpoint path")->required();
    count_cmd->add_option("images", count.images, "PGM images (dims divisible by 8)")->required();
    count_cmd->add_option("--dump-density", count.dump, "Write the estimated density map (one image only)");

    EvalFlags evalf;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Report per-image counting errors, MAE and STD");
    eval_cmd->add_option("--data", evalf.data, "Dataset directory")->required();
    eval_cmd->add_option("--checkpoint", evalf.checkpoint, "Checkpoint path");
    eval_cmd->add_flag("--oracle", evalf.oracle, "Count from density/<id>.dmap instead of a model");

    XvalFlags xval;
    CLI::App* xval_cmd = app.add_subcommand("xval", "K-fold cross validation");
    xval.train.add_to(xval_cmd);
    xval_cmd->add_option("--out", xval.out, "Directory for fold checkpoints and xval.csv")->required();
    xval_cmd->add_option("--folds", xval.folds, "Number of folds")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    xval_cmd->add_flag("--parallel-folds", xval.parallel, "Train folds concurrently (same results)");

    ModelGradCheckOptions gc;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the pricnn-aux gradients");
    gc_cmd->add_option("--step", gc.step, "Central-difference step")->capture_default_str()->check(CLI::PositiveNumber);
    gc_cmd->add_option("--samples", gc.samples, "Sampled parameters per group")
        ->capture_default_str()
        ->check(CLI::Range(1, 1 << 20));
    gc_cmd->add_option("--seed", gc.seed, "Seed for the instance and sampling")->capture_default_str();
    gc_cmd->add_option("--size", gc.size, "Input side, a multiple of 8")->capture_default_str()->check(CLI::Range(8, 512));
    gc_cmd->add_flag("--corrupt-grad", gc.corrupt_gradients, "Perturb analytic gradients (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitFailure;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth, out);
        if (*density_cmd) return cmd_density(density, out);
        if (*train_cmd) return cmd_train(trainf, out, err);
        if (*count_cmd) return cmd_count(count, out);
        if (*eval_cmd) return cmd_eval(evalf, out);
        if (*xval_cmd) return cmd_xval(xval, out);
        if (*gc_cmd) return cmd_gradcheck(gc, out);
    } catch (const FormatError& e) {
        err << "dsdr: " << e.what() << '\n';
        return kExitIo;
    } catch (const IoError& e) {
        err << "dsdr: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "dsdr: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "dsdr: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace dsdr::cli
