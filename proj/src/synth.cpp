#include "dsdr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "dsdr/init.hpp"

namespace dsdr {

void SynthConfig::validate() const {
    if (num_images < 0) throw std::invalid_argument("synth: num_images must be >= 0");
    if (rows <= 0 || cols <= 0 || rows % 8 != 0 || cols % 8 != 0) {
        throw std::invalid_argument("synth: rows and cols must be positive multiples of 8");
    }
    if (cells_min < 0 || cells_min > cells_max) throw std::invalid_argument("synth: need 0 <= cells_min <= cells_max");
    if (!(blob_sigma_range.first > 0.0) || blob_sigma_range.first > blob_sigma_range.second) {
        throw std::invalid_argument("synth: invalid blob sigma range");
    }
    if (!(amplitude_range.first >= 0.0) || amplitude_range.first > amplitude_range.second) {
        throw std::invalid_argument("synth: invalid amplitude range");
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synth: noise sigma must be >= 0");
    if (!(background_level >= 0.0 && background_level <= 1.0)) {
        throw std::invalid_argument("synth: background level must lie in [0, 1]");
    }
}

SynthConfig SynthConfig::paper_scale() {
    SynthConfig c;
    c.rows = 512;
    c.cols = 512;
    c.cells_min = 202;
    c.cells_max = 834;
    return c;
}

int blob_radius(double sigma) { return static_cast<int>(std::ceil(4.0 * sigma)); }

namespace {

Rng image_rng(std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return Rng(seq);
}

SyntheticImage generate_one(const SynthConfig& cfg, int index) {
    Rng rng = image_rng(cfg.seed, index);
    SyntheticImage out;
    char id[32];
    std::snprintf(id, sizeof id, "img%04d", index);
    out.annotated.id = id;

    std::uniform_int_distribution<int> count_dist(cfg.cells_min, cfg.cells_max);
    const int count = count_dist(rng);
    std::uniform_int_distribution<int> col_dist(0, cfg.cols - 1), row_dist(0, cfg.rows - 1);
    std::uniform_real_distribution<double> sigma_dist(cfg.blob_sigma_range.first, cfg.blob_sigma_range.second);
    std::uniform_real_distribution<double> amp_dist(cfg.amplitude_range.first, cfg.amplitude_range.second);

    const double min_sq = kMinCellSeparation * kMinCellSeparation;
    for (int c = 0; c < count; ++c) {
        Centroid p;
        int attempts = 0;
        for (;; ++attempts) {
            if (attempts > 10000) throw std::invalid_argument("synth: cannot place cells with minimum separation");
            p = {col_dist(rng), row_dist(rng)};
            const bool clear = std::none_of(out.cells.begin(), out.cells.end(), [&](const SyntheticCell& o) {
                const double dx = o.center.x - p.x, dy = o.center.y - p.y;
                return dx * dx + dy * dy < min_sq;
            });
            if (clear) break;
        }
        out.cells.push_back({p, 0.0, 0.0});
    }
    for (auto& cell : out.cells) {
        cell.sigma = sigma_dist(rng);
        cell.amplitude = amp_dist(rng);
    }

    std::vector<double> canvas(static_cast<std::size_t>(cfg.rows) * cfg.cols, cfg.background_level);
    for (const auto& cell : out.cells) {
        const int r = blob_radius(cell.sigma);
        const double denom = 2.0 * cell.sigma * cell.sigma;
        for (int i = std::max(0, cell.center.y - r); i <= std::min(cfg.rows - 1, cell.center.y + r); ++i) {
            for (int j = std::max(0, cell.center.x - r); j <= std::min(cfg.cols - 1, cell.center.x + r); ++j) {
                const double dy = i - cell.center.y, dx = j - cell.center.x;
                canvas[static_cast<std::size_t>(i) * cfg.cols + j] += cell.amplitude * std::exp(-(dx * dx + dy * dy) / denom);
            }
        }
    }
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (double& v : canvas) v += noise(rng);
    }

    GrayImage& img = out.annotated.image;
    img = GrayImage(cfg.rows, cfg.cols);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(canvas[i], 0.0, 1.0) * 255.0));
    }
    for (const auto& cell : out.cells) out.annotated.centroids.push_back(cell.center);
    return out;
}

}  // namespace

std::vector<SyntheticImage> synth_generate_detailed(const SynthConfig& config) {
    config.validate();
    std::vector<SyntheticImage> out;
    out.reserve(static_cast<std::size_t>(config.num_images));
    for (int i = 0; i < config.num_images; ++i) out.push_back(generate_one(config, i));
    return out;
}

std::vector<AnnotatedImage> synth_generate(const SynthConfig& config) {
    std::vector<AnnotatedImage> out;
    for (auto& s : synth_generate_detailed(config)) out.push_back(std::move(s.annotated));
    return out;
}

}  // namespace dsdr
