#pragma once

// Independent writers for the binary formats, used as golden references.

#include <cstdint>
#include <string>

#include "dsdr/dataio.hpp"
#include "dsdr/model.hpp"

namespace dsdr::testing {

// Independent DRMW writer, straight from the format definition.
inline Bytes drmw_oracle(const ModelParams& p, float gamma) {
    Bytes out;
    auto put = [&](const void* src, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(src);
        out.insert(out.end(), b, b + n);  // little-endian host
    };
    auto u32 = [&](std::uint32_t v) { put(&v, 4); };
    put("DRMW", 4);
    u32(1);
    const std::uint8_t id = static_cast<std::uint8_t>(p.variant);
    put(&id, 1);
    put(&gamma, 4);
    u32(static_cast<std::uint32_t>(2 * p.layers.size()));
    for (const auto& l : p.layers) {
        for (int part = 0; part < 2; ++part) {
            const std::string name = l.name + (part == 0 ? ".weight" : ".bias");
            const std::uint16_t len = static_cast<std::uint16_t>(name.size());
            put(&len, 2);
            put(name.data(), name.size());
            const Shape& s = l.filter.weights.shape();
            const std::uint8_t ndim = part == 0 ? 4 : 1;
            put(&ndim, 1);
            if (part == 0) {
                for (int d : {s.n, s.c, s.h, s.w}) u32(static_cast<std::uint32_t>(d));
                put(l.filter.weights.data(), 4 * l.filter.weights.size());
            } else {
                u32(static_cast<std::uint32_t>(s.n));
                put(l.filter.bias.data(), 4 * l.filter.bias.size());
            }
        }
    }
    return out;
}

// Deterministic non-random weights, so the encoding can be pinned by a digest.
inline ModelParams pattern_params(Variant v) {
    Rng rng(0);
    ModelParams p = build_model(v, rng);
    std::uint32_t i = 0;
    for (auto& l : p.layers) {
        // Multiples of 2^-7: exact in float whether or not the compiler fuses the multiply-add.
        for (float& w : l.filter.weights.values()) w = static_cast<float>(i++ % 251) * 0.0078125f - 1.0f;
        for (float& b : l.filter.bias) b = static_cast<float>(i++ % 17) * 0.5f;
    }
    return p;
}

inline std::uint64_t fnv1a(const Bytes& b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t c : b) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Size and FNV-1a digest of drmw_oracle(pattern_params(Variant::fcrn), 2.5f).
inline constexpr std::size_t kGoldenDrmwSize = 5461413;
inline constexpr std::uint64_t kGoldenDrmwDigest = 0xf83e13598be3fc24ULL;

}  // namespace dsdr::testing
