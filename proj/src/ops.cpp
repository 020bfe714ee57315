#include "dsdr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace dsdr::ops {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using ConstMap = Eigen::Map<const RowMat>;

// Upper bound on the number of output positions lowered at once; keeps the
// im2col buffer bounded for large images.
constexpr int kMaxBandColumns = 8192;

int rows_per_band(int h, int w) { return std::clamp(kMaxBandColumns / std::max(w, 1), 1, std::max(h, 1)); }

// Lowers rows [i0, i1) of one item into a (C*k*k) x ((i1-i0)*W) matrix.
void im2col_band(const float* x, int channels, int h, int w, int k, int i0, int i1, float* cols) {
    const int pad = k / 2;
    const std::size_t band = static_cast<std::size_t>(i1 - i0) * w;
    for (int c = 0; c < channels; ++c) {
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                float* row = cols + ((static_cast<std::size_t>(c) * k + u) * k + v) * band;
                const int jlo = std::max(0, pad - v);
                const int jhi = std::min(w, w + pad - v);
                for (int i = i0; i < i1; ++i) {
                    float* dst = row + static_cast<std::size_t>(i - i0) * w;
                    const int ii = i + u - pad;
                    if (ii < 0 || ii >= h || jlo >= jhi) {
                        std::fill(dst, dst + w, 0.0f);
                        continue;
                    }
                    const float* src = x + (static_cast<std::size_t>(c) * h + ii) * w + (v - pad);
                    std::fill(dst, dst + jlo, 0.0f);
                    std::copy(src + jlo, src + jhi, dst + jlo);
                    std::fill(dst + jhi, dst + w, 0.0f);
                }
            }
        }
    }
}

// Adjoint of im2col_band: scatters-adds the lowered gradient back into dx.
void col2im_band(const float* cols, int channels, int h, int w, int k, int i0, int i1, float* dx) {
    const int pad = k / 2;
    const std::size_t band = static_cast<std::size_t>(i1 - i0) * w;
    for (int c = 0; c < channels; ++c) {
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                const float* row = cols + ((static_cast<std::size_t>(c) * k + u) * k + v) * band;
                const int jlo = std::max(0, pad - v);
                const int jhi = std::min(w, w + pad - v);
                for (int i = i0; i < i1; ++i) {
                    const int ii = i + u - pad;
                    if (ii < 0 || ii >= h) continue;
                    const float* src = row + static_cast<std::size_t>(i - i0) * w;
                    float* dst = dx + (static_cast<std::size_t>(c) * h + ii) * w + (v - pad);
                    for (int j = jlo; j < jhi; ++j) dst[j] += src[j];
                }
            }
        }
    }
}

void check_conv_args(const Tensor& input, const ConvFilter& filter) {
    if (filter.in_channels() != input.c()) {
        throw std::invalid_argument("conv2d: filter expects " + std::to_string(filter.in_channels()) +
                                    " input channels, got " + std::to_string(input.c()));
    }
    if (filter.kernel() % 2 == 0 || filter.weights.w() != filter.kernel()) {
        throw std::invalid_argument("conv2d: kernel must be square with odd size");
    }
    if (filter.bias.size() != static_cast<std::size_t>(filter.out_channels())) {
        throw std::invalid_argument("conv2d: bias length does not match out_channels");
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvFilter& filter) {
    check_conv_args(input, filter);
    const int batch = input.n(), channels = input.c(), h = input.h(), w = input.w();
    const int out_ch = filter.out_channels(), k = filter.kernel();
    const int lowered = channels * k * k;
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    Tensor out({batch, out_ch, h, w});
    if (out.empty()) return out;

    const ConstMap weights(filter.weights.data(), out_ch, lowered);
    const int band_rows = rows_per_band(h, w);

#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) {
        std::vector<float> cols;
        for (int i0 = 0; i0 < h; i0 += band_rows) {
            const int i1 = std::min(h, i0 + band_rows);
            const Eigen::Index band = static_cast<Eigen::Index>(i1 - i0) * w;
            StridedMap y(out.item(b) + static_cast<std::size_t>(i0) * w, out_ch, band, Eigen::OuterStride<>(plane));
            if (k == 1) {
                ConstStridedMap x(input.item(b) + static_cast<std::size_t>(i0) * w, channels, band,
                                  Eigen::OuterStride<>(plane));
                y.noalias() = weights * x;
            } else {
                cols.resize(static_cast<std::size_t>(lowered) * band);
                im2col_band(input.item(b), channels, h, w, k, i0, i1, cols.data());
                const ConstMap x(cols.data(), lowered, band);
                y.noalias() = weights * x;
            }
        }
        float* y = out.item(b);
        for (int o = 0; o < out_ch; ++o) {
            const float bias = filter.bias[static_cast<std::size_t>(o)];
            float* row = y + static_cast<std::size_t>(o) * plane;
            for (Eigen::Index p = 0; p < plane; ++p) row[p] += bias;
        }
    }
    return out;
}

ConvGradients conv2d_backward(const Tensor& input, const ConvFilter& filter, const Tensor& grad_output,
                              bool want_input_grad) {
    check_conv_args(input, filter);
    const int batch = input.n(), channels = input.c(), h = input.h(), w = input.w();
    const int out_ch = filter.out_channels(), k = filter.kernel();
    if (grad_output.shape() != Shape{batch, out_ch, h, w}) {
        throw std::invalid_argument("conv2d_backward: upstream gradient has shape " +
                                    to_string(grad_output.shape()));
    }
    const int lowered = channels * k * k;
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    const std::size_t wsize = static_cast<std::size_t>(out_ch) * lowered;

    ConvGradients grads;
    grads.filter = ConvFilter::zeros(out_ch, channels, k);
    if (want_input_grad) grads.input = Tensor(input.shape());
    if (input.empty()) return grads;

    // Per-item partial gradients, reduced in item order below.
    std::vector<float> item_dw(static_cast<std::size_t>(batch) * wsize);
    std::vector<double> item_db(static_cast<std::size_t>(batch) * out_ch);

    const ConstMap weights(filter.weights.data(), out_ch, lowered);
    const int band_rows = rows_per_band(h, w);

#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) {
        Eigen::Map<RowMat> dw(item_dw.data() + static_cast<std::size_t>(b) * wsize, out_ch, lowered);
        dw.setZero();
        std::vector<float> cols;
        std::vector<float> dcols;
        for (int i0 = 0; i0 < h; i0 += band_rows) {
            const int i1 = std::min(h, i0 + band_rows);
            const Eigen::Index band = static_cast<Eigen::Index>(i1 - i0) * w;
            ConstStridedMap dy(grad_output.item(b) + static_cast<std::size_t>(i0) * w, out_ch, band,
                               Eigen::OuterStride<>(plane));
            if (k == 1) {
                ConstStridedMap x(input.item(b) + static_cast<std::size_t>(i0) * w, channels, band,
                                  Eigen::OuterStride<>(plane));
                dw.noalias() += dy * x.transpose();
                if (want_input_grad) {
                    StridedMap dx(grads.input.item(b) + static_cast<std::size_t>(i0) * w, channels, band,
                                  Eigen::OuterStride<>(plane));
                    dx.noalias() = weights.transpose() * dy;
                }
            } else {
                cols.resize(static_cast<std::size_t>(lowered) * band);
                im2col_band(input.item(b), channels, h, w, k, i0, i1, cols.data());
                const ConstMap x(cols.data(), lowered, band);
                dw.noalias() += dy * x.transpose();
                if (want_input_grad) {
                    dcols.resize(cols.size());
                    Eigen::Map<RowMat> dc(dcols.data(), lowered, band);
                    dc.noalias() = weights.transpose() * dy;
                    col2im_band(dcols.data(), channels, h, w, k, i0, i1, grads.input.item(b));
                }
            }
        }
        const float* g = grad_output.item(b);
        for (int o = 0; o < out_ch; ++o) {
            double s = 0.0;
            const float* row = g + static_cast<std::size_t>(o) * plane;
            for (Eigen::Index p = 0; p < plane; ++p) s += row[p];
            item_db[static_cast<std::size_t>(b) * out_ch + o] = s;
        }
    }

    float* dw = grads.filter.weights.data();
    for (int b = 0; b < batch; ++b) {
        const float* src = item_dw.data() + static_cast<std::size_t>(b) * wsize;
        for (std::size_t i = 0; i < wsize; ++i) dw[i] += src[i];
    }
    for (int o = 0; o < out_ch; ++o) {
        double s = 0.0;
        for (int b = 0; b < batch; ++b) s += item_db[static_cast<std::size_t>(b) * out_ch + o];
        grads.filter.bias[static_cast<std::size_t>(o)] = static_cast<float>(s);
    }
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    const float* x = input.data();
    float* y = out.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(input.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& activation, const Tensor& grad_output) {
    if (activation.shape() != grad_output.shape()) {
        throw std::invalid_argument("relu_backward: shape mismatch");
    }
    Tensor out(activation.shape());
    const float* a = activation.data();
    const float* g = grad_output.data();
    float* d = out.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(activation.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = a[i] > 0.0f ? g[i] : 0.0f;
    return out;
}

PoolResult maxpool2x2(const Tensor& input) {
    if (input.h() % 2 != 0 || input.w() % 2 != 0) {
        throw std::invalid_argument("maxpool2x2: spatial dims must be even, got " + to_string(input.shape()));
    }
    const int oh = input.h() / 2, ow = input.w() / 2, w = input.w();
    PoolResult r;
    r.output = Tensor({input.n(), input.c(), oh, ow});
    r.argmax.assign(r.output.size(), 0);
    const int planes = input.n() * input.c();
    const std::size_t in_plane = input.shape().plane();
    const std::size_t out_plane = r.output.shape().plane();

#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const float* x = input.data() + p * in_plane;
        float* y = r.output.data() + p * out_plane;
        std::uint8_t* arg = r.argmax.data() + p * out_plane;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                const float* top = x + static_cast<std::size_t>(2 * i) * w + 2 * j;
                const float window[4] = {top[0], top[1], top[w], top[w + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t q = 1; q < 4; ++q) {
                    if (window[q] > window[best]) best = q;
                }
                y[static_cast<std::size_t>(i) * ow + j] = window[best];
                arg[static_cast<std::size_t>(i) * ow + j] = best;
            }
        }
    }
    return r;
}

Tensor maxpool2x2_backward(const PoolResult& pooled, const Tensor& grad_output) {
    const Shape& os = pooled.output.shape();
    if (grad_output.shape() != os) throw std::invalid_argument("maxpool2x2_backward: shape mismatch");
    Tensor dx({os.n, os.c, os.h * 2, os.w * 2});
    const int planes = os.n * os.c;
    const int w = os.w * 2;
    const std::size_t in_plane = dx.shape().plane();
    const std::size_t out_plane = os.plane();

#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        float* d = dx.data() + p * in_plane;
        const float* g = grad_output.data() + p * out_plane;
        const std::uint8_t* arg = pooled.argmax.data() + p * out_plane;
        for (int i = 0; i < os.h; ++i) {
            for (int j = 0; j < os.w; ++j) {
                const std::size_t o = static_cast<std::size_t>(i) * os.w + j;
                const int q = arg[o];
                d[static_cast<std::size_t>(2 * i + q / 2) * w + 2 * j + q % 2] = g[o];
            }
        }
    }
    return dx;
}

namespace {

// One axis of the x2 bilinear map on a strided line.
inline void upsample_line(const float* in, std::size_t in_stride, int len, float* out, std::size_t out_stride) {
    for (int i = 0; i < len; ++i) {
        const float c = in[i * in_stride];
        const float prev = in[std::max(i - 1, 0) * in_stride];
        const float next = in[std::min(i + 1, len - 1) * in_stride];
        out[(2 * i) * out_stride] = 0.75f * c + 0.25f * prev;
        out[(2 * i + 1) * out_stride] = 0.75f * c + 0.25f * next;
    }
}

inline void upsample_line_adjoint(const float* g, std::size_t g_stride, int len, float* d, std::size_t d_stride) {
    for (int i = 0; i < len; ++i) {
        const float ge = g[(2 * i) * g_stride];
        const float go = g[(2 * i + 1) * g_stride];
        d[i * d_stride] += 0.75f * ge + 0.75f * go;
        d[std::max(i - 1, 0) * d_stride] += 0.25f * ge;
        d[std::min(i + 1, len - 1) * d_stride] += 0.25f * go;
    }
}

}  // namespace

Tensor upsample2x_bilinear(const Tensor& input) {
    const int h = input.h(), w = input.w();
    Tensor out({input.n(), input.c(), 2 * h, 2 * w});
    const int planes = input.n() * input.c();
    const std::size_t in_plane = input.shape().plane();
    const std::size_t out_plane = out.shape().plane();
    const std::size_t ow = static_cast<std::size_t>(2 * w);

#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const float* x = input.data() + p * in_plane;
        float* y = out.data() + p * out_plane;
        std::vector<float> wide(static_cast<std::size_t>(h) * ow);
        for (int i = 0; i < h; ++i) upsample_line(x + static_cast<std::size_t>(i) * w, 1, w, wide.data() + i * ow, 1);
        for (std::size_t j = 0; j < ow; ++j) upsample_line(wide.data() + j, ow, h, y + j, ow);
    }
    return out;
}

Tensor upsample2x_bilinear_backward(const Tensor& grad_output) {
    if (grad_output.h() % 2 != 0 || grad_output.w() % 2 != 0) {
        throw std::invalid_argument("upsample2x_bilinear_backward: gradient dims must be even");
    }
    const int h = grad_output.h() / 2, w = grad_output.w() / 2;
    Tensor dx({grad_output.n(), grad_output.c(), h, w});
    const int planes = grad_output.n() * grad_output.c();
    const std::size_t in_plane = dx.shape().plane();
    const std::size_t out_plane = grad_output.shape().plane();
    const std::size_t ow = static_cast<std::size_t>(2 * w);

#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const float* g = grad_output.data() + p * out_plane;
        float* d = dx.data() + p * in_plane;
        std::vector<float> wide(static_cast<std::size_t>(h) * ow, 0.0f);
        for (std::size_t j = 0; j < ow; ++j) upsample_line_adjoint(g + j, ow, h, wide.data() + j, ow);
        for (int i = 0; i < h; ++i) {
            upsample_line_adjoint(wide.data() + i * ow, 1, w, d + static_cast<std::size_t>(i) * w, 1);
        }
    }
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw std::invalid_argument("concat_channels: cannot join " + to_string(a.shape()) + " and " +
                                    to_string(b.shape()));
    }
    Tensor out({a.n(), a.c() + b.c(), a.h(), a.w()});
    const std::size_t as = static_cast<std::size_t>(a.c()) * a.shape().plane();
    const std::size_t bs = static_cast<std::size_t>(b.c()) * b.shape().plane();
    for (int i = 0; i < a.n(); ++i) {
        std::copy_n(a.item(i), as, out.item(i));
        std::copy_n(b.item(i), bs, out.item(i) + as);
    }
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& grad_output, int a_channels) {
    if (a_channels < 0 || a_channels > grad_output.c()) {
        throw std::invalid_argument("split_channels: split point out of range");
    }
    const Shape& s = grad_output.shape();
    Tensor a({s.n, a_channels, s.h, s.w});
    Tensor b({s.n, s.c - a_channels, s.h, s.w});
    const std::size_t as = a.size() / std::max(s.n, 1);
    const std::size_t bs = b.size() / std::max(s.n, 1);
    for (int i = 0; i < s.n; ++i) {
        std::copy_n(grad_output.item(i), as, a.item(i));
        std::copy_n(grad_output.item(i) + as, bs, b.item(i));
    }
    return {std::move(a), std::move(b)};
}

}  // namespace dsdr::ops
