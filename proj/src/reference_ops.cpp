#include "dsdr/reference_ops.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace dsdr::reference {

Tensor conv2d(const Tensor& input, const ConvFilter& filter) {
    if (filter.in_channels() != input.c()) throw std::invalid_argument("reference::conv2d: channel mismatch");
    const int k = filter.kernel(), pad = k / 2;
    Tensor out({input.n(), filter.out_channels(), input.h(), input.w()});
    for (int b = 0; b < input.n(); ++b)
        for (int o = 0; o < filter.out_channels(); ++o)
            for (int i = 0; i < input.h(); ++i)
                for (int j = 0; j < input.w(); ++j) {
                    double acc = filter.bias[static_cast<std::size_t>(o)];
                    for (int c = 0; c < input.c(); ++c)
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v) {
                                const int ii = i + u - pad, jj = j + v - pad;
                                if (ii < 0 || ii >= input.h() || jj < 0 || jj >= input.w()) continue;
                                acc += static_cast<double>(input.at(b, c, ii, jj)) * filter.weights.at(o, c, u, v);
                            }
                    out.at(b, o, i, j) = static_cast<float>(acc);
                }
    return out;
}

ops::ConvGradients conv2d_backward(const Tensor& input, const ConvFilter& filter, const Tensor& grad_output) {
    const int k = filter.kernel(), pad = k / 2;
    ops::ConvGradients g;
    g.input = Tensor(input.shape());
    g.filter = ConvFilter::zeros(filter.out_channels(), filter.in_channels(), k);
    std::vector<double> dw(filter.weights.size(), 0.0), dx(input.size(), 0.0);
    std::vector<double> db(filter.bias.size(), 0.0);
    for (int b = 0; b < input.n(); ++b)
        for (int o = 0; o < filter.out_channels(); ++o)
            for (int i = 0; i < input.h(); ++i)
                for (int j = 0; j < input.w(); ++j) {
                    const double go = grad_output.at(b, o, i, j);
                    db[static_cast<std::size_t>(o)] += go;
                    for (int c = 0; c < input.c(); ++c)
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v) {
                                const int ii = i + u - pad, jj = j + v - pad;
                                if (ii < 0 || ii >= input.h() || jj < 0 || jj >= input.w()) continue;
                                dw[filter.weights.index(o, c, u, v)] += go * input.at(b, c, ii, jj);
                                dx[input.index(b, c, ii, jj)] += go * filter.weights.at(o, c, u, v);
                            }
                }
    std::transform(dw.begin(), dw.end(), g.filter.weights.data(), [](double v) { return static_cast<float>(v); });
    std::transform(dx.begin(), dx.end(), g.input.data(), [](double v) { return static_cast<float>(v); });
    std::transform(db.begin(), db.end(), g.filter.bias.begin(), [](double v) { return static_cast<float>(v); });
    return g;
}

ops::PoolResult maxpool2x2(const Tensor& input) {
    if (input.h() % 2 || input.w() % 2) throw std::invalid_argument("reference::maxpool2x2: odd dims");
    ops::PoolResult r;
    r.output = Tensor({input.n(), input.c(), input.h() / 2, input.w() / 2});
    r.argmax.assign(r.output.size(), 0);
    for (int b = 0; b < input.n(); ++b)
        for (int c = 0; c < input.c(); ++c)
            for (int i = 0; i < r.output.h(); ++i)
                for (int j = 0; j < r.output.w(); ++j) {
                    int best = 0;
                    float best_v = input.at(b, c, 2 * i, 2 * j);
                    for (int q = 1; q < 4; ++q) {
                        const float v = input.at(b, c, 2 * i + q / 2, 2 * j + q % 2);
                        if (v > best_v) {
                            best_v = v;
                            best = q;
                        }
                    }
                    const std::size_t o = r.output.index(b, c, i, j);
                    r.output.data()[o] = best_v;
                    r.argmax[o] = static_cast<std::uint8_t>(best);
                }
    return r;
}

namespace {

// (source index, weight) pairs for output index `o` of a length-`len` axis.
std::array<std::pair<int, float>, 2> taps(int o, int len) {
    const int i = o / 2;
    const int other = (o % 2 == 0) ? std::max(i - 1, 0) : std::min(i + 1, len - 1);
    return {{{i, 0.75f}, {other, 0.25f}}};
}

}  // namespace

Tensor upsample2x_bilinear(const Tensor& input) {
    Tensor out({input.n(), input.c(), 2 * input.h(), 2 * input.w()});
    for (int b = 0; b < input.n(); ++b)
        for (int c = 0; c < input.c(); ++c)
            for (int i = 0; i < out.h(); ++i)
                for (int j = 0; j < out.w(); ++j) {
                    double acc = 0.0;
                    for (auto [si, wi] : taps(i, input.h()))
                        for (auto [sj, wj] : taps(j, input.w())) acc += static_cast<double>(wi) * wj * input.at(b, c, si, sj);
                    out.at(b, c, i, j) = static_cast<float>(acc);
                }
    return out;
}

Tensor upsample2x_bilinear_backward(const Tensor& grad_output) {
    const int h = grad_output.h() / 2, w = grad_output.w() / 2;
    Tensor dx({grad_output.n(), grad_output.c(), h, w});
    std::vector<double> acc(dx.size(), 0.0);
    for (int b = 0; b < grad_output.n(); ++b)
        for (int c = 0; c < grad_output.c(); ++c)
            for (int i = 0; i < grad_output.h(); ++i)
                for (int j = 0; j < grad_output.w(); ++j)
                    for (auto [si, wi] : taps(i, h))
                        for (auto [sj, wj] : taps(j, w))
                            acc[dx.index(b, c, si, sj)] += static_cast<double>(wi) * wj * grad_output.at(b, c, i, j);
    std::transform(acc.begin(), acc.end(), dx.data(), [](double v) { return static_cast<float>(v); });
    return dx;
}

}  // namespace dsdr::reference
