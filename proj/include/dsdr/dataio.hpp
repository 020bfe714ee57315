#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dsdr/density.hpp"
#include "dsdr/image.hpp"
#include "dsdr/model.hpp"

namespace dsdr {

// Malformed file contents. Carries the byte offset (binary formats) or the
// 1-based line number (CSV) where parsing stopped, when known.
class FormatError : public std::runtime_error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    FormatError(const std::string& what, std::size_t offset = npos, int line = 0);

    std::size_t offset() const { return offset_; }
    int line() const { return line_; }

private:
    std::size_t offset_;
    int line_;
};

// The file system refused a read or write.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Binary PGM ("P5"), maxval 255.
Bytes encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Centroid CSV: header `x,y`, then one `<x>,<y>` line per cell.
std::string encode_centroids(const CentroidSet& centroids);
CentroidSet decode_centroids(std::string_view text);
CentroidSet read_centroids(const std::filesystem::path& path);
void write_centroids(const std::filesystem::path& path, const CentroidSet& centroids);

// DMAP: "DMAP", u32 version (1), u32 rows, u32 cols, rows*cols f32, little endian.
Bytes encode_dmap(const DensityMap& map);
DensityMap decode_dmap(std::span<const std::uint8_t> bytes);
DensityMap read_dmap(const std::filesystem::path& path);
void write_dmap(const std::filesystem::path& path, const DensityMap& map);

// DRMW checkpoint: "DRMW", u32 version (1), u8 variant id, f32 density scale,
// u32 tensor count, then per tensor: u16 name length, name, u8 ndim,
// u32 dims[ndim], f32 payload. Tensors follow layer_table() order with each
// layer's weight before its bias.
struct Checkpoint {
    ModelParams params;
    float density_scale = 1.0f;
};

Bytes encode_checkpoint(const ModelParams& params, float density_scale);
// With `expected`, a checkpoint for a different variant is rejected and the
// message names the first tensor whose shape differs.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::optional<Variant> expected = std::nullopt);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, float density_scale);
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<Variant> expected = std::nullopt);

// Dataset directory layout:
//   <root>/images/<id>.pgm, <root>/annotations/<id>.csv, <root>/density/<id>.dmap (optional)
struct DatasetLayout {
    std::filesystem::path root;

    std::filesystem::path image(const std::string& id) const { return root / "images" / (id + ".pgm"); }
    std::filesystem::path annotation(const std::string& id) const { return root / "annotations" / (id + ".csv"); }
    std::filesystem::path density(const std::string& id) const { return root / "density" / (id + ".dmap"); }
};

// Ids of every images/*.pgm, sorted.
std::vector<std::string> list_dataset_ids(const std::filesystem::path& root);
std::vector<AnnotatedImage> load_dataset(const std::filesystem::path& root);
void save_dataset(const std::filesystem::path& root, const std::vector<AnnotatedImage>& dataset);

}  // namespace dsdr
