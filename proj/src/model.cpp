#include "dsdr/model.hpp"

#include <stdexcept>

namespace dsdr {

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::fcrn: return "fcrn";
        case Variant::pricnn_only: return "pricnn";
        case Variant::pricnn_aux: return "pricnn-aux";
    }
    return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
    if (name == "fcrn") return Variant::fcrn;
    if (name == "pricnn" || name == "pricnn-only") return Variant::pricnn_only;
    if (name == "pricnn-aux") return Variant::pricnn_aux;
    return std::nullopt;
}

bool has_skips(Variant v) { return v != Variant::fcrn; }
bool has_aux_heads(Variant v) { return v == Variant::pricnn_aux; }

std::string_view group_name(Group g) {
    static constexpr std::string_view names[kGroupCount] = {"Theta1", "Theta2", "Theta3", "Theta4",
                                                            "theta1", "theta2", "theta3"};
    return names[static_cast<int>(g)];
}

// Encoder block b (1-3) emits its activation at 1/2^(b-1) resolution before
// pooling; block 4 sits after three pools, and blocks 5/6 after one/two
// upsamplings, which is where the heads are attached.
static_assert(kAuxFactors[0] == 8 && kAuxFactors[1] == 4 && kAuxFactors[2] == 2);

std::vector<LayerSpec> layer_table(Variant v) {
    const auto& ch = kBlockChannels;
    const bool skips = has_skips(v);
    std::vector<LayerSpec> t = {
        {"block1", Group::primary1, ch[0], 1, 3},
        {"block2", Group::primary1, ch[1], ch[0], 3},
        {"block3", Group::primary1, ch[2], ch[1], 3},
        {"block4", Group::primary1, ch[3], ch[2], 3},
        {"block5", Group::primary2, ch[4], ch[3] + (skips ? ch[2] : 0), 3},
        {"block6", Group::primary3, ch[5], ch[4] + (skips ? ch[1] : 0), 3},
        {"block7", Group::primary4, ch[6], ch[5] + (skips ? ch[0] : 0), 3},
        {"block8", Group::primary4, ch[7], ch[6], 1},
    };
    if (has_aux_heads(v)) {
        const std::array<int, 3> taps = {ch[3], ch[4], ch[5]};
        const std::array<Group, 3> groups = {Group::aux1, Group::aux2, Group::aux3};
        for (int k = 0; k < 3; ++k) {
            const std::string head = "aux" + std::to_string(k + 1);
            t.push_back({head + ".conv1", groups[k], kAuxHiddenChannels, taps[k], 3});
            t.push_back({head + ".conv2", groups[k], 1, kAuxHiddenChannels, 1});
        }
    }
    return t;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.filter.parameter_count();
    return n;
}

ParamGradients zero_gradients(const ModelParams& params) {
    ParamGradients g;
    g.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        g.push_back(ConvFilter::zeros(l.filter.out_channels(), l.filter.in_channels(), l.filter.kernel()));
    }
    return g;
}

ModelParams build_model(Variant variant, Rng& rng) {
    ModelParams p;
    p.variant = variant;
    for (const LayerSpec& spec : layer_table(variant)) {
        p.layers.push_back(
            {spec.name, spec.group,
             orthogonal_init({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}, 1.0, rng)});
    }
    return p;
}

void check_model_input(const Shape& s) {
    if (s.c != 1) throw std::invalid_argument("model input must have one channel, got " + to_string(s));
    if (s.h <= 0 || s.w <= 0 || s.h % 8 != 0 || s.w % 8 != 0) {
        throw std::invalid_argument("model input rows and cols must be positive multiples of 8, got " +
                                    std::to_string(s.h) + "x" + std::to_string(s.w));
    }
}

namespace {

Tensor conv_relu(const Tensor& x, const ConvFilter& f) { return ops::relu(ops::conv2d(x, f)); }

void add_into(Tensor& dst, const Tensor& src) {
    if (dst.shape() != src.shape()) throw std::logic_error("gradient shape mismatch in backward pass");
    float* d = dst.data();
    const float* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Backward through relu(conv(input)); returns the input gradient if requested.
Tensor conv_relu_backward(const ConvFilter& f, const Tensor& input, const Tensor& output, const Tensor& grad,
                          ConvFilter& grad_filter, bool want_input = true) {
    auto g = ops::conv2d_backward(input, f, ops::relu_backward(output, grad), want_input);
    grad_filter = std::move(g.filter);
    return std::move(g.input);
}

}  // namespace

ForwardOutputs forward(const ModelParams& params, const Tensor& x, Activations* cache) {
    check_model_input(x.shape());
    const bool skips = has_skips(params.variant);
    Activations local;
    Activations& a = cache ? *cache : local;
    a.input = x;

    const Tensor* current = &x;
    for (int b = 0; b < 3; ++b) {
        a.encoder[b] = conv_relu(*current, params.block(b + 1));
        a.pooled[b] = ops::maxpool2x2(a.encoder[b]);
        current = &a.pooled[b].output;
    }

    ForwardOutputs out;
    out.features[0] = conv_relu(*current, params.block(4));
    for (int d = 0; d < 3; ++d) {
        Tensor up = ops::upsample2x_bilinear(out.features[d]);
        a.decoder_input[d] = skips ? ops::concat_channels(up, a.encoder[2 - d]) : std::move(up);
        Tensor act = conv_relu(a.decoder_input[d], params.block(5 + d));
        if (d < 2) {
            out.features[d + 1] = std::move(act);
        } else {
            a.block7 = std::move(act);
        }
    }
    out.y_hat = conv_relu(a.block7, params.block(8));

    if (has_aux_heads(params.variant)) {
        for (int k = 0; k < 3; ++k) {
            a.aux_hidden[k] = conv_relu(out.features[k], params.aux(k + 1, 1));
            out.aux[k] = conv_relu(a.aux_hidden[k], params.aux(k + 1, 2));
        }
    }
    return out;
}

namespace {

class PatternHash {
public:
    void mask(const Tensor& t) {
        for (float v : t.values()) bit(v > 0.0f);
    }
    void winners(const std::vector<std::uint8_t>& arg) {
        for (std::uint8_t a : arg) byte(a);
    }
    std::uint64_t value() const { return h_; }

private:
    void bit(bool b) { byte(b ? 1 : 0); }
    void byte(std::uint8_t b) {
        h_ ^= b;
        h_ *= 0x100000001b3ULL;  // FNV-1a
    }
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t activation_pattern(const ForwardOutputs& out, const Activations& a) {
    PatternHash h;
    for (int b = 0; b < 3; ++b) {
        h.mask(a.encoder[b]);
        h.winners(a.pooled[b].argmax);
    }
    for (const Tensor& f : out.features) h.mask(f);
    h.mask(a.block7);
    h.mask(out.y_hat);
    for (int k = 0; k < 3; ++k) {
        h.mask(a.aux_hidden[k]);
        h.mask(out.aux[k]);
    }
    return h.value();
}

ParamGradients backward(const ModelParams& params, const ForwardOutputs& out, const Activations& a,
                        const OutputGradients& grads) {
    if (grads.y_hat.shape() != out.y_hat.shape()) {
        throw std::invalid_argument("backward: output gradient has shape " + to_string(grads.y_hat.shape()));
    }
    const bool skips = has_skips(params.variant);
    ParamGradients g = zero_gradients(params);
    auto slot = [&](int block) -> ConvFilter& { return g[static_cast<std::size_t>(block - 1)]; };

    // Head contributions to the tapped features.
    std::array<Tensor, 3> feature_grad;
    for (int k = 0; k < 3; ++k) {
        feature_grad[k] = Tensor(out.features[k].shape());
        if (!has_aux_heads(params.variant) || grads.aux[k].empty()) continue;
        if (grads.aux[k].shape() != out.aux[k].shape()) {
            throw std::invalid_argument("backward: aux gradient " + std::to_string(k + 1) + " has wrong shape");
        }
        const std::size_t base = 8 + 2 * static_cast<std::size_t>(k);
        Tensor d_hidden =
            conv_relu_backward(params.aux(k + 1, 2), a.aux_hidden[k], out.aux[k], grads.aux[k], g[base + 1]);
        feature_grad[k] = conv_relu_backward(params.aux(k + 1, 1), out.features[k], a.aux_hidden[k], d_hidden, g[base]);
    }

    Tensor d = conv_relu_backward(params.block(8), a.block7, out.y_hat, grads.y_hat, slot(8));

    std::array<Tensor, 3> skip_grad;
    for (int dd = 2; dd >= 0; --dd) {
        const Tensor& act = dd == 2 ? a.block7 : out.features[dd + 1];
        Tensor d_in = conv_relu_backward(params.block(5 + dd), a.decoder_input[dd], act, d, slot(5 + dd));
        Tensor d_up;
        if (skips) {
            const int up_channels = out.features[dd].c();
            auto [du, ds] = ops::split_channels(d_in, up_channels);
            d_up = std::move(du);
            skip_grad[2 - dd] = std::move(ds);
        } else {
            d_up = std::move(d_in);
        }
        d = ops::upsample2x_bilinear_backward(d_up);
        add_into(d, feature_grad[dd]);
    }

    d = conv_relu_backward(params.block(4), a.pooled[2].output, out.features[0], d, slot(4));
    for (int b = 2; b >= 0; --b) {
        Tensor d_enc = ops::maxpool2x2_backward(a.pooled[b], d);
        if (skips) add_into(d_enc, skip_grad[b]);
        const Tensor& input = b == 0 ? a.input : a.pooled[b - 1].output;
        d = conv_relu_backward(params.block(b + 1), input, a.encoder[b], d_enc, slot(b + 1), b > 0);
    }
    return g;
}

}  // namespace dsdr
