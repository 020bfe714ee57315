// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
//   dsdr_acceptance [--only 1,5,...] [--fixtures DIR] [--trend-epochs N]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dsdr/dataio.hpp"
#include "dsdr/density.hpp"
#include "dsdr/model_check.hpp"
#include "dsdr/ops.hpp"
#include "dsdr/synth.hpp"
#include "dsdr/training.hpp"
#include "format_oracles.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dsdr;
using dsdr::testing::random_filter;
using dsdr::testing::random_tensor;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30}); }

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<GroupCheck> checks = gradcheck_model({});
    const double elapsed = seconds_since(t0);
    std::string detail;
    bool ok = elapsed < 120.0;
    for (const GroupCheck& c : checks) {
        ok = ok && c.passed();
        detail += fmt("%s %.2e%s (kinks %d/%d); ", std::string(group_name(c.group)).c_str(), c.result.max_rel_error,
                      c.passed() ? "" : " FAIL", c.result.kink_crossings, c.result.samples);
    }
    return {ok, detail + fmt("%.1fs", elapsed)};
}

Outcome mass_conservation() {
    const GaussianKernel kernel = gaussian_kernel(3.0, 10);
    Rng rng(2026);
    std::uniform_int_distribution<int> count(1, 40);
    double worst_count = 0.0, worst_gtlr = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int n = count(rng);
        const CentroidSet cells = dsdr::testing::interior_centroids(n, 64, 64, kernel.half_width, rng);
        const DensityMap y = render_density_map(64, 64, cells, kernel);
        const double total = count_from_density(y);
        worst_count = std::max(worst_count, std::abs(total - n));
        for (int f : {8, 4, 2}) worst_gtlr = std::max(worst_gtlr, rel_gap(count_from_density(downsample_block_sum(y, f, f)), total));
    }
    return {worst_count <= 1e-4 && worst_gtlr <= 1e-5,
            fmt("max |count - N| %.2e, max GTLR relative gap %.2e", worst_count, worst_gtlr)};
}

Outcome conv_oracle() {
    Rng rng(33);
    double worst = 0.0;
    int cases = 0;
    for (int k : {1, 3})
        for (int n = 1; n <= 2; ++n)
            for (int c = 1; c <= 3; ++c)
                for (int h = 1; h <= 8; ++h)
                    for (int w = 1; w <= 8; ++w)
                        for (int o = 1; o <= 3; ++o) {
                            const Tensor x = random_tensor({n, c, h, w}, rng);
                            const ConvFilter f = random_filter(o, c, k, rng);
                            const Tensor a = ops::conv2d(x, f), b = dsdr::testing::naive_conv(x, f);
                            for (std::size_t i = 0; i < a.size(); ++i)
                                worst = std::max(worst, std::abs(double(a.values()[i]) - b.values()[i]));
                            ++cases;
                        }
    return {worst <= 1e-5, fmt("%d shapes, max abs diff %.2e", cases, worst)};
}

Outcome adjoints() {
    Rng rng(44);
    double conv = 0, up = 0, cat = 0, pool = 0;
    for (int trial = 0; trial < 20; ++trial) {
        {
            const Tensor x = random_tensor({2, 3, 8, 7}, rng);
            const ConvFilter f = random_filter(4, 3, trial % 2 ? 3 : 1, rng, false);
            const Tensor y = random_tensor({2, 4, 8, 7}, rng);
            conv = std::max(conv, rel_gap(dot(ops::conv2d(x, f), y), dot(x, ops::conv2d_backward(x, f, y).input)));
        }
        {
            const Tensor x = random_tensor({2, 3, 5, 6}, rng);
            const Tensor y = random_tensor({2, 3, 10, 12}, rng);
            up = std::max(up, rel_gap(dot(ops::upsample2x_bilinear(x), y), dot(x, ops::upsample2x_bilinear_backward(y))));
        }
        {
            const Tensor a = random_tensor({2, 2, 4, 4}, rng), b = random_tensor({2, 3, 4, 4}, rng);
            const Tensor y = random_tensor({2, 5, 4, 4}, rng);
            const auto [ya, yb] = ops::split_channels(y, 2);
            cat = std::max(cat, rel_gap(dot(ops::concat_channels(a, b), y), dot(a, ya) + dot(b, yb)));
        }
        {
            // Pooling with the argmax pattern frozen from a different input is linear.
            const ops::PoolResult frozen = ops::maxpool2x2(random_tensor({2, 2, 6, 8}, rng));
            const Tensor x = random_tensor({2, 2, 6, 8}, rng);
            Tensor px(frozen.output.shape());
            for (std::size_t o = 0; o < px.size(); ++o) {
                const std::size_t plane = o / 12;
                const int i = static_cast<int>(o / 4 % 3), j = static_cast<int>(o % 4);
                const int a = frozen.argmax[o];
                px.values()[o] = x.values()[(plane * 6 + 2 * i + a / 2) * 8 + 2 * j + a % 2];
            }
            const Tensor y = random_tensor(px.shape(), rng);
            pool = std::max(pool, rel_gap(dot(px, y), dot(x, ops::maxpool2x2_backward(frozen, y))));
        }
    }
    const double worst = std::max({conv, up, cat, pool});
    return {worst <= 1e-5, fmt("max relative gap: conv %.1e, upsample %.1e, concat %.1e, pool %.1e", conv, up, cat, pool)};
}

Outcome overfit() {
    SynthConfig sc;
    sc.num_images = 1;
    sc.seed = 3;
    const auto data = synth_generate(sc);
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.epochs = 2000;
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    double first = -1.0, last = 0.0;
    int first_below = -1, step = 0;
    train(data, cfg, [&](const LossRecord& r) {
        if (first < 0) first = r.loss.overall;
        last = r.loss.overall;
        if (first_below < 0 && last < 0.01 * first) first_below = step;
        ++step;
    });
    const double elapsed = seconds_since(t0);
    std::string when = first_below < 0 ? "never" : fmt("step %d", first_below + 1);
    return {last < 0.01 * first && elapsed < 600.0,
            fmt("initial %.4g, after %d steps %.4g (ratio %.4f), below 1%% at %s, %.0fs", first, step, last,
                last / first, when.c_str(), elapsed)};
}

Outcome deep_supervision_equivalence() {
    SynthConfig sc;
    sc.num_images = 2;
    sc.seed = 6;
    const auto data = synth_generate(sc);
    const Tensor x = stack_images(data, {0, 1});
    Tensor y({2, 1, 64, 64});
    for (int b = 0; b < 2; ++b) {
        const Tensor t = to_tensor(render_density_map(64, 64, data[b].centroids, gaussian_kernel(3.0, 10)));
        std::copy(t.values().begin(), t.values().end(), y.values().begin() + b * 64 * 64);
    }
    TrainConfig aux_cfg;
    aux_cfg.lambda = {0, 0, 0};
    TrainConfig only_cfg = aux_cfg;
    only_cfg.variant = Variant::pricnn_only;
    Rng r1(17), r2(17);
    const ModelParams aux = build_model(Variant::pricnn_aux, r1);
    const ModelParams only = build_model(Variant::pricnn_only, r2);
    const StepResult a = loss_and_gradients(aux, x, y, aux_cfg);
    const StepResult b = loss_and_gradients(only, x, y, only_cfg);
    double worst = 0.0;
    for (std::size_t l = 0; l < only.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.grads[l].weights.size(); ++i)
            worst = std::max(worst, std::abs(double(a.grads[l].weights.values()[i]) - b.grads[l].weights.values()[i]));
        for (std::size_t i = 0; i < a.grads[l].bias.size(); ++i)
            worst = std::max(worst, std::abs(double(a.grads[l].bias[i]) - b.grads[l].bias[i]));
    }
    const double loss_gap = std::abs(a.loss.overall - b.loss.overall);
    return {worst <= 1e-7 && loss_gap == 0.0, fmt("max |grad difference| %.1e over %zu layers, loss gap %.1e", worst,
                                                  only.layers.size(), loss_gap)};
}

// Every combination shares one dataset; the seed drives fold assignment and init.
Outcome trend_check(int epochs) {
    SynthConfig sc;
    sc.num_images = 200;
    sc.seed = 2024;
    const auto data = synth_generate(sc);
    const std::vector<std::uint64_t> seeds = {100, 200, 300};
    const std::vector<Variant> variants = {Variant::pricnn_aux, Variant::pricnn_only, Variant::fcrn};
    std::vector<std::vector<double>> mae(variants.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed : seeds) {
        for (std::size_t v = 0; v < variants.size(); ++v) {
            TrainConfig cfg;
            cfg.variant = variants[v];
            cfg.seed = seed;
            cfg.epochs = epochs;
            cfg.batch_size = 2;
            cfg.learning_rate = 3e-5;
            cfg.density_scale = 10.0;
            const CrossValidationReport r = cross_validate(data, cfg);
            mae[v].push_back(r.pooled.mae);
            std::printf("    seed %llu %-10s pooled MAE %.3f STD %.3f (%.0fs)\n", static_cast<unsigned long long>(seed),
                        std::string(variant_name(variants[v])).c_str(), r.pooled.mae, r.pooled.std, seconds_since(t0));
            std::fflush(stdout);
        }
    }
    const double elapsed = seconds_since(t0);
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double aux = mean(mae[0]), only = mean(mae[1]), fcrn = mean(mae[2]);
    bool aux_far_worse_everywhere = true;
    for (std::size_t s = 0; s < seeds.size(); ++s) aux_far_worse_everywhere &= mae[0][s] > 1.1 * mae[2][s];
    const bool ordered = aux <= only && only <= fcrn;
    return {!aux_far_worse_everywhere && elapsed < 7200.0,
            fmt("mean pooled MAE aux %.3f / pricnn %.3f / fcrn %.3f, ordering %s, %.0fs", aux, only, fcrn,
                ordered ? "holds" : "does not hold", elapsed)};
}

struct Captured {
    int code;
    std::string out;
};

Captured cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dsdr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str() + err.str()};
}

// Runs synth -> density -> train -> count -> eval -> xval under `root`; returns
// the concatenated console output.
std::string pipeline(const fs::path& root) {
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string d = (root / "data").string();
    std::string log;
    auto step = [&](std::vector<std::string> args) {
        const Captured c = cli(std::move(args));
        if (c.code != 0) throw std::runtime_error("pipeline step failed: " + c.out);
        log += c.out;
    };
    step({"synth", "--out", d, "--num-images", "6", "--size", "32x32", "--seed", "9"});
    step({"density", "--data", d});
    step({"train", "--data", d, "--out", (root / "model.drmw").string(), "--epochs", "2", "--batch", "2", "--seed",
          "4", "--density-scale", "10", "--lr", "3e-5"});
    step({"count", "--checkpoint", (root / "model.drmw").string(), (root / "data/images/img0000.pgm").string()});
    step({"eval", "--data", d, "--checkpoint", (root / "model.drmw").string()});
    step({"xval", "--data", d, "--out", (root / "xval").string(), "--folds", "3", "--batch", "2", "--model", "fcrn"});
    return log;
}

Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / "dsdr_acceptance_determinism";
    const std::string log_a = pipeline(base / "a");
    const std::string log_b = pipeline(base / "b");
    int files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
        if (!e.is_regular_file()) continue;
        ++files;
        const fs::path twin = base / "b" / fs::relative(e.path(), base / "a");
        if (!fs::exists(twin) || read_file(e.path()) != read_file(twin)) ++differing;
    }
    const bool same_log = log_a == log_b;
    fs::remove_all(base);
    return {differing == 0 && same_log && files > 0,
            fmt("%d files compared (dataset, density maps, checkpoints, loss log, xval report), %d differ, console "
                "output %s",
                files, differing, same_log ? "identical" : "differs")};
}

Outcome format_fidelity(const fs::path& fixtures) {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    auto fixture = [&](const char* name) { return read_file(fixtures / name); };
    auto text = [](const Bytes& b) { return std::string(b.begin(), b.end()); };

    for (const char* name : {"gray_2x2.pgm"}) {
        const Bytes b = fixture(name);
        check(encode_pgm(decode_pgm(b)) == b, name);
    }
    for (const char* name : {"centroids.csv", "centroids_empty.csv"}) {
        const Bytes b = fixture(name);
        check(encode_centroids(decode_centroids(text(b))) == text(b), name);
    }
    {
        const Bytes b = fixture("map_1x1.dmap");
        check(encode_dmap(decode_dmap(b)) == b, "map_1x1.dmap");
    }
    {
        // Full checkpoints are megabytes; the golden is the exact size and digest of a pinned encoding.
        const ModelParams p = dsdr::testing::pattern_params(Variant::fcrn);
        const Bytes b = encode_checkpoint(p, 2.5f);
        check(b == dsdr::testing::drmw_oracle(p, 2.5f), "drmw oracle encoding");
        check(b.size() == dsdr::testing::kGoldenDrmwSize &&
                  dsdr::testing::fnv1a(b) == dsdr::testing::kGoldenDrmwDigest, "drmw golden digest");
        const Checkpoint c = decode_checkpoint(b, Variant::fcrn);
        check(encode_checkpoint(c.params, c.density_scale) == b, "drmw roundtrip");
    }

    auto rejects_format = [&](const char* name, const std::function<void(const Bytes&)>& decode) {
        try {
            decode(fixture(name));
            failures.push_back(std::string(name) + " accepted");
        } catch (const FormatError&) {
        } catch (const std::exception& e) {
            failures.push_back(std::string(name) + " wrong error: " + e.what());
        }
    };
    const auto pgm = [](const Bytes& b) { decode_pgm(b); };
    const auto csv = [&](const Bytes& b) { decode_centroids(text(b)); };
    const auto dmap = [](const Bytes& b) { decode_dmap(b); };
    const auto drmw = [](const Bytes& b) { decode_checkpoint(b); };
    for (const char* n : {"bad_maxval.pgm", "bad_truncated.pgm", "bad_magic.pgm"}) rejects_format(n, pgm);
    for (const char* n : {"bad_header.csv", "bad_field.csv"}) rejects_format(n, csv);
    for (const char* n : {"bad_magic.dmap", "bad_version.dmap", "bad_length.dmap"}) rejects_format(n, dmap);
    for (const char* n : {"bad_truncated.drmw", "bad_magic.drmw", "bad_version.drmw"}) rejects_format(n, drmw);
    try {
        read_pgm(fixtures / "does_not_exist.pgm");
        failures.push_back("missing file accepted");
    } catch (const IoError&) {
    }

    std::string detail = "4 golden files, pinned DRMW digest, 11 corrupted files, missing file -> IoError";
    for (const auto& f : failures) detail += "; FAILED " + f;
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks for the dsdr library"};
    std::vector<int> only;
    std::string fixtures = DSDR_FIXTURE_DIR;
    int trend_epochs = 5;
    app.add_option("--only", only, "Run only these criteria (1-9)")->delimiter(',')->check(CLI::Range(1, 9));
    app.add_option("--fixtures", fixtures, "Directory holding the format fixtures")->capture_default_str();
    app.add_option("--trend-epochs", trend_epochs, "Epochs per fold in the trend check")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", gradient_correctness},
        {2, "density mass conservation", mass_conservation},
        {3, "convolution oracle equivalence", conv_oracle},
        {4, "adjoint identities", adjoints},
        {5, "overfit convergence", overfit},
        {6, "deep-supervision equivalence", deep_supervision_equivalence},
        {7, "desk-scale trend check", [&] { return trend_check(trend_epochs); }},
        {8, "determinism", determinism},
        {9, "format fidelity", [&] { return format_fidelity(fixtures); }},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.passed;
        std::printf("[%s] %d %s: %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
