#include "dsdr/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;

namespace dsdr {

FormatError::FormatError(const std::string& what, std::size_t offset, int line)
    : std::runtime_error(what), offset_(offset), line_(line) {}

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error while reading " + path.string());
    return data;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error while writing " + path.string());
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
public:
    void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::string format) : data_(data), format_(std::move(format)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(format_ + ": " + what + " at byte " + std::to_string(pos_), pos_);
    }
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) fail(std::string("truncated ") + what);
    }
    std::string_view raw(std::size_t n, const char* what) {
        need(n, what);
        std::string_view s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    void f32_array(float* dst, std::size_t n, const char* what) {
        if (n > remaining() / 4) fail(std::string("truncated ") + what);
        for (std::size_t i = 0; i < n; ++i) dst[i] = f32(what);
    }

private:
    std::span<const std::uint8_t> data_;
    std::string format_;
    std::size_t pos_ = 0;
};

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

}  // namespace

// ---- PGM -------------------------------------------------------------------

Bytes encode_pgm(const GrayImage& image) {
    Writer w;
    w.raw("P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n");
    Bytes out = w.take();
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> void {
        throw FormatError("pgm: " + what + " at byte " + std::to_string(pos), pos);
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("missing P5 magic");
    pos = 2;

    auto header_int = [&](const char* name) {
        // Whitespace and '#' comments may precede each header field.
        bool saw_separator = false;
        while (pos < bytes.size()) {
            if (is_space(bytes[pos])) {
                ++pos;
                saw_separator = true;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                saw_separator = true;
            } else {
                break;
            }
        }
        if (!saw_separator) fail(std::string("expected whitespace before ") + name);
        const std::size_t start = pos;
        long long v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000) fail(std::string(name) + " too large");
            ++pos;
        }
        if (pos == start) fail(std::string("expected ") + name);
        return static_cast<int>(v);
    };

    const int width = header_int("width");
    const int height = header_int("height");
    const int maxval = header_int("maxval");
    if (width <= 0 || height <= 0) fail("image dimensions must be positive");
    if (maxval != 255) fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (pos >= bytes.size() || !is_space(bytes[pos])) fail("expected single whitespace after maxval");
    ++pos;

    const std::size_t payload = static_cast<std::size_t>(width) * height;
    if (bytes.size() - pos < payload) {
        pos = bytes.size();
        fail("truncated payload: expected " + std::to_string(payload) + " pixel bytes");
    }
    if (bytes.size() - pos > payload) {
        pos += payload;
        fail("trailing bytes after payload");
    }
    GrayImage img(height, width);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
    return img;
}

GrayImage read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

void write_pgm(const fs::path& path, const GrayImage& image) { write_file(path, encode_pgm(image)); }

// ---- centroid CSV ------------------------------------------------------------

std::string encode_centroids(const CentroidSet& centroids) {
    std::string out = "x,y\n";
    for (const Centroid& c : centroids) out += std::to_string(c.x) + "," + std::to_string(c.y) + "\n";
    return out;
}

CentroidSet decode_centroids(std::string_view text) {
    CentroidSet out;
    int line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        auto fail = [&](const std::string& what) {
            throw FormatError("centroid csv line " + std::to_string(line_no) + ": " + what, FormatError::npos,
                              line_no);
        };
        if (!header_seen) {
            if (line != "x,y") fail("expected header 'x,y'");
            header_seen = true;
            continue;
        }
        const std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) fail("expected '<x>,<y>'");
        auto parse = [&](std::string_view field, const char* name) {
            int v = 0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
                fail(std::string("non-integer ") + name + " field '" + std::string(field) + "'");
            }
            return v;
        };
        const int x = parse(line.substr(0, comma), "x");
        const int y = parse(line.substr(comma + 1), "y");
        out.push_back({x, y});
    }
    if (!header_seen) throw FormatError("centroid csv: missing header 'x,y'", FormatError::npos, 1);
    return out;
}

CentroidSet read_centroids(const fs::path& path) {
    const Bytes b = read_file(path);
    return decode_centroids(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

void write_centroids(const fs::path& path, const CentroidSet& centroids) {
    const std::string s = encode_centroids(centroids);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---- DMAP --------------------------------------------------------------------

Bytes encode_dmap(const DensityMap& map) {
    Writer w;
    w.raw("DMAP");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(map.rows));
    w.u32(static_cast<std::uint32_t>(map.cols));
    for (float v : map.values) w.f32(v);
    return w.take();
}

DensityMap decode_dmap(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "dmap");
    if (r.raw(4, "magic") != "DMAP") {
        throw FormatError("dmap: bad magic at byte 0", 0);
    }
    if (const std::uint32_t version = r.u32("version"); version != 1) {
        throw FormatError("dmap: unsupported version " + std::to_string(version) + " at byte 4", 4);
    }
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    if (count * 4 != r.remaining()) {
        r.fail("payload length " + std::to_string(r.remaining()) + " does not match " + std::to_string(rows) +
               "x" + std::to_string(cols));
    }
    DensityMap map(static_cast<int>(rows), static_cast<int>(cols));
    r.f32_array(map.values.data(), map.values.size(), "payload");
    return map;
}

DensityMap read_dmap(const fs::path& path) { return decode_dmap(read_file(path)); }

void write_dmap(const fs::path& path, const DensityMap& map) { write_file(path, encode_dmap(map)); }

// ---- DRMW checkpoints -----------------------------------------------------------

namespace {

struct TensorEntry {
    std::string name;
    std::vector<std::uint32_t> dims;
};

std::vector<TensorEntry> expected_tensors(Variant v) {
    std::vector<TensorEntry> out;
    for (const LayerSpec& l : layer_table(v)) {
        out.push_back({l.name + ".weight",
                       {static_cast<std::uint32_t>(l.out_channels), static_cast<std::uint32_t>(l.in_channels),
                        static_cast<std::uint32_t>(l.kernel), static_cast<std::uint32_t>(l.kernel)}});
        out.push_back({l.name + ".bias", {static_cast<std::uint32_t>(l.out_channels)}});
    }
    return out;
}

std::string dims_string(const std::vector<std::uint32_t>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
    return s + ")";
}

}  // namespace

Bytes encode_checkpoint(const ModelParams& params, float density_scale) {
    Writer w;
    w.raw("DRMW");
    w.u32(1);
    w.u8(static_cast<std::uint8_t>(params.variant));
    w.f32(density_scale);
    w.u32(static_cast<std::uint32_t>(2 * params.layers.size()));
    for (const NamedFilter& l : params.layers) {
        const Shape& s = l.filter.weights.shape();
        const std::string wname = l.name + ".weight";
        w.u16(static_cast<std::uint16_t>(wname.size()));
        w.raw(wname);
        w.u8(4);
        for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
        for (float v : l.filter.weights.values()) w.f32(v);

        const std::string bname = l.name + ".bias";
        w.u16(static_cast<std::uint16_t>(bname.size()));
        w.raw(bname);
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(l.filter.bias.size()));
        for (float v : l.filter.bias) w.f32(v);
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::optional<Variant> expected) {
    Reader r(bytes, "checkpoint");
    if (r.raw(4, "magic") != "DRMW") throw FormatError("checkpoint: bad magic at byte 0", 0);
    if (const std::uint32_t version = r.u32("version"); version != 1) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " at byte 4", 4);
    }
    const std::uint8_t id = r.u8("variant id");
    if (id > static_cast<std::uint8_t>(Variant::pricnn_aux)) {
        throw FormatError("checkpoint: unknown variant id " + std::to_string(id) + " at byte 8", 8);
    }
    const Variant variant = static_cast<Variant>(id);
    const auto table = expected_tensors(variant);

    if (expected && *expected != variant) {
        const auto want = expected_tensors(*expected);
        std::string first = "(tensor count)";
        for (std::size_t i = 0; i < std::min(want.size(), table.size()); ++i) {
            if (want[i].name != table[i].name || want[i].dims != table[i].dims) {
                first = want[i].name;
                break;
            }
        }
        if (first == "(tensor count)" && want.size() > table.size()) first = want[table.size()].name;
        throw FormatError("checkpoint: variant " + std::string(variant_name(variant)) + " does not match expected " +
                              std::string(variant_name(*expected)) + "; first mismatched tensor: " + first,
                          8);
    }

    Checkpoint ck;
    ck.density_scale = r.f32("density scale");
    const std::uint32_t count = r.u32("tensor count");
    if (count != table.size()) {
        r.fail("tensor count " + std::to_string(count) + " but variant " + std::string(variant_name(variant)) +
               " has " + std::to_string(table.size()));
    }

    ck.params.variant = variant;
    const auto specs = layer_table(variant);
    for (std::size_t t = 0; t < table.size(); ++t) {
        const std::size_t at = r.offset();
        const std::uint16_t len = r.u16("name length");
        const std::string name(r.raw(len, "tensor name"));
        if (name != table[t].name) {
            throw FormatError("checkpoint: expected tensor " + table[t].name + " but found '" + name + "' at byte " +
                                  std::to_string(at),
                              at);
        }
        const std::uint8_t ndim = r.u8("ndim");
        std::vector<std::uint32_t> dims(ndim);
        for (auto& d : dims) d = r.u32("dims");
        if (dims != table[t].dims) {
            throw FormatError("checkpoint: tensor " + name + " has dims " + dims_string(dims) + ", expected " +
                                  dims_string(table[t].dims),
                              at);
        }
        const LayerSpec& spec = specs[t / 2];
        if (t % 2 == 0) {
            ck.params.layers.push_back(
                {spec.name, spec.group, ConvFilter::zeros(spec.out_channels, spec.in_channels, spec.kernel)});
            ConvFilter& f = ck.params.layers.back().filter;
            r.f32_array(f.weights.data(), f.weights.size(), ("payload of " + name).c_str());
        } else {
            ConvFilter& f = ck.params.layers.back().filter;
            r.f32_array(f.bias.data(), f.bias.size(), ("payload of " + name).c_str());
        }
    }
    if (r.remaining() != 0) r.fail("trailing bytes after last tensor");
    return ck;
}

void save_checkpoint(const fs::path& path, const ModelParams& params, float density_scale) {
    write_file(path, encode_checkpoint(params, density_scale));
}

Checkpoint load_checkpoint(const fs::path& path, std::optional<Variant> expected) {
    return decode_checkpoint(read_file(path), expected);
}

// ---- dataset directories ---------------------------------------------------------

std::vector<std::string> list_dataset_ids(const fs::path& root) {
    const fs::path dir = root / "images";
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("missing image directory " + dir.string());
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<AnnotatedImage> load_dataset(const fs::path& root) {
    const DatasetLayout layout{root};
    std::vector<AnnotatedImage> out;
    for (const std::string& id : list_dataset_ids(root)) {
        AnnotatedImage item;
        item.id = id;
        item.image = read_pgm(layout.image(id));
        if (!fs::exists(layout.annotation(id))) throw IoError("missing annotation for image " + id);
        item.centroids = read_centroids(layout.annotation(id));
        for (const Centroid& c : item.centroids) {
            if (c.x < 0 || c.x >= item.image.cols || c.y < 0 || c.y >= item.image.rows) {
                throw FormatError("annotation for " + id + " has centroid (" + std::to_string(c.x) + "," +
                                  std::to_string(c.y) + ") outside the image");
            }
        }
        out.push_back(std::move(item));
    }
    return out;
}

void save_dataset(const fs::path& root, const std::vector<AnnotatedImage>& dataset) {
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    if (!ec) fs::create_directories(root / "annotations", ec);
    if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());
    const DatasetLayout layout{root};
    for (const auto& item : dataset) {
        write_pgm(layout.image(item.id), item.image);
        write_centroids(layout.annotation(item.id), item.centroids);
    }
}

}  // namespace dsdr
