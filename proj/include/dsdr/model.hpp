#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsdr/init.hpp"
#include "dsdr/ops.hpp"

namespace dsdr {

// The three networks compared in the experiments. The numeric values are the
// checkpoint variant ids.
enum class Variant : std::uint8_t {
    fcrn = 0,         // 8 chained blocks, no skips, no auxiliary heads
    pricnn_only = 1,  // with the three encoder->decoder concatenations
    pricnn_aux = 2,   // with skips and three auxiliary density heads
};

std::string_view variant_name(Variant v);  // "fcrn", "pricnn", "pricnn-aux"
std::optional<Variant> parse_variant(std::string_view name);
bool has_skips(Variant v);
bool has_aux_heads(Variant v);

// Parameter groups. Primary1 holds blocks 1-4, Primary2 block 5, Primary3
// block 6, Primary4 blocks 7-8; AuxK holds auxiliary head K.
enum class Group : std::uint8_t { primary1, primary2, primary3, primary4, aux1, aux2, aux3 };
inline constexpr int kGroupCount = 7;
std::string_view group_name(Group g);  // "Theta1".."Theta4", "theta1".."theta3"

// Down-sampling factor of each auxiliary head relative to the input.
inline constexpr std::array<int, 3> kAuxFactors = {8, 4, 2};
// Output channels of blocks 1..8.
inline constexpr std::array<int, 8> kBlockChannels = {32, 64, 128, 512, 128, 64, 32, 1};
inline constexpr int kAuxHiddenChannels = 32;

struct LayerSpec {
    std::string name;
    Group group;
    int out_channels;
    int in_channels;
    int kernel;
};

// Every trainable layer of a variant in checkpoint order: block1..block8, then
// aux1.conv1, aux1.conv2, ..., aux3.conv2.
std::vector<LayerSpec> layer_table(Variant v);

struct NamedFilter {
    std::string name;
    Group group;
    ConvFilter filter;
};

struct ModelParams {
    Variant variant = Variant::pricnn_aux;
    std::vector<NamedFilter> layers;

    const ConvFilter& block(int index) const { return layers[static_cast<std::size_t>(index - 1)].filter; }
    const ConvFilter& aux(int head, int conv) const {
        return layers[static_cast<std::size_t>(8 + 2 * (head - 1) + (conv - 1))].filter;
    }
    std::size_t parameter_count() const;
};

// Gradient storage shaped like ModelParams::layers.
using ParamGradients = std::vector<ConvFilter>;
ParamGradients zero_gradients(const ModelParams& params);

ModelParams build_model(Variant variant, Rng& rng);

struct ForwardOutputs {
    Tensor y_hat;                   // (B,1,H,W)
    std::array<Tensor, 3> aux;      // (B,1,H/8,W/8), (B,1,H/4,W/4), (B,1,H/2,W/2); empty without heads
    std::array<Tensor, 3> features; // outputs of blocks 4, 5, 6
};

// Intermediate values kept by the forward pass for the backward pass.
struct Activations {
    Tensor input;
    std::array<Tensor, 3> encoder;  // pre-pool outputs of blocks 1-3
    std::array<ops::PoolResult, 3> pooled;
    std::array<Tensor, 3> decoder_input;  // conv inputs of blocks 5-7 (upsampled, maybe concatenated)
    Tensor block7;
    std::array<Tensor, 3> aux_hidden;
};

// Validates x: one channel, spatial dims positive and divisible by 8.
void check_model_input(const Shape& s);

ForwardOutputs forward(const ModelParams& params, const Tensor& x, Activations* cache = nullptr);

// Hash of every ReLU on/off state and max-pool winner of a forward pass. The
// network is piecewise linear in its parameters; the hash identifies the piece.
std::uint64_t activation_pattern(const ForwardOutputs& out, const Activations& cache);

struct OutputGradients {
    Tensor y_hat;
    std::array<Tensor, 3> aux;  // an empty tensor means the head receives no gradient
};

ParamGradients backward(const ModelParams& params, const ForwardOutputs& out, const Activations& cache,
                        const OutputGradients& grads);

}  // namespace dsdr
