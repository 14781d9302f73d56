#include "hpc/imagery.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hpc {

namespace {

static_assert(std::endian::native == std::endian::little, "FSTK IO assumes a little-endian host");

constexpr std::array<char, 4> kFstkMagic = {'F', 'S', 'T', 'K'};
constexpr std::uint32_t kFstkVersion = 1;

struct RawRaster {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<std::uint8_t> bytes;
};

std::string describe(const std::filesystem::path& path, const std::string& what) {
    return path.string() + ": " + what;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(describe(path, "cannot open file"));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
    for (;;) {
        while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
        if (pos < buf.size() && buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
    return tok;
}

std::size_t parse_dim(const std::string& tok, const std::filesystem::path& path, const char* what) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw FormatError(describe(path, std::string("malformed PPM header (") + what + ")"));
    const unsigned long long v = std::stoull(tok);
    if (v == 0 || v > (1ull << 20)) throw FormatError(describe(path, std::string("invalid PPM ") + what));
    return static_cast<std::size_t>(v);
}

RawRaster read_pnm(const std::vector<std::uint8_t>& buf, const std::filesystem::path& path) {
    std::size_t pos = 0;
    const std::string magic = pnm_token(buf, pos);
    std::size_t channels = 0;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw FormatError(describe(path, "malformed PPM header (expected P6 or P5)"));

    RawRaster r;
    r.channels = channels;
    r.width = parse_dim(pnm_token(buf, pos), path, "width");
    r.height = parse_dim(pnm_token(buf, pos), path, "height");
    const std::size_t maxval = parse_dim(pnm_token(buf, pos), path, "maxval");
    if (maxval != 255) throw FormatError(describe(path, "unsupported bit depth (maxval " + std::to_string(maxval) + ")"));
    if (pos >= buf.size() || !std::isspace(buf[pos])) throw FormatError(describe(path, "malformed PPM header"));
    ++pos;
    const std::size_t n = r.width * r.height * channels;
    if (buf.size() - pos < n) throw FormatError(describe(path, "truncated PPM payload"));
    r.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return r;
}

RawRaster read_png(const std::vector<std::uint8_t>& buf, const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, buf.data(), buf.size()))
        throw FormatError(describe(path, std::string("malformed PNG: ") + img.message));
    if (img.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&img);
        throw FormatError(describe(path, "unsupported bit depth (16-bit PNG)"));
    }
    RawRaster r;
    r.height = img.height;
    r.width = img.width;
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    r.channels = color ? 3 : 1;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    r.bytes.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, r.bytes.data(), 0, nullptr))
        throw FormatError(describe(path, std::string("malformed PNG: ") + img.message));
    return r;
}

RawRaster read_raster(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError(describe(path, "file not found"));
    const auto buf = read_file(path);
    static constexpr std::array<std::uint8_t, 8> png_sig = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (buf.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), buf.begin())) return read_png(buf, path);
    if (buf.size() >= 2 && buf[0] == 'P') return read_pnm(buf, path);
    throw FormatError(describe(path, "unsupported raster format"));
}

void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width, bool color,
               const std::vector<std::uint8_t>& bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, bytes.data(), 0, nullptr))
        throw IoError(describe(path, std::string("cannot write PNG: ") + img.message));
}

template <typename T>
void put_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width * 3, fill) {}

PixelMask::PixelMask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), data_(height * width, fill) {}

std::size_t PixelMask::static_count() const {
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](std::uint8_t v) { return v != 0; }));
}

std::uint8_t quantize_sample(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

Image load_image(const std::filesystem::path& path) {
    const RawRaster r = read_raster(path);
    Image img(r.height, r.width);
    auto out = img.samples();
    for (std::size_t p = 0; p < r.height * r.width; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::uint8_t b = r.channels == 3 ? r.bytes[p * 3 + c] : r.bytes[p];
            out[p * 3 + c] = static_cast<double>(b) / 255.0;
        }
    }
    return img;
}

void save_image(const Image& image, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(image.samples().size());
    std::transform(image.samples().begin(), image.samples().end(), bytes.begin(), quantize_sample);
    write_png(path, image.height(), image.width(), true, bytes);
}

PixelMask load_mask(const std::filesystem::path& path) {
    const RawRaster r = read_raster(path);
    PixelMask mask(r.height, r.width);
    auto out = mask.values();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = r.bytes[p * r.channels] != 0 ? 1 : 0;
    return mask;
}

void save_mask(const PixelMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes(mask.pixel_count());
    std::transform(mask.values().begin(), mask.values().end(), bytes.begin(),
                   [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
    write_png(path, mask.height(), mask.width(), false, bytes);
}

FeatureStack load_feature_stack(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError(describe(path, "file not found"));
    const auto buf = read_file(path);
    std::size_t pos = 0;
    auto take_u32 = [&](const char* what) {
        if (buf.size() - pos < 4) throw FormatError(describe(path, std::string("truncated FSTK (") + what + ")"));
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    };

    if (buf.size() < 4 || !std::equal(kFstkMagic.begin(), kFstkMagic.end(), buf.begin()))
        throw FormatError(describe(path, "bad FSTK magic"));
    pos = 4;
    const std::uint32_t version = take_u32("version");
    if (version != kFstkVersion) throw FormatError(describe(path, "unsupported FSTK version " + std::to_string(version)));
    const std::uint32_t layer_count = take_u32("layer count");
    if (layer_count == 0) throw FormatError(describe(path, "FSTK has zero layers"));

    FeatureStack stack;
    stack.source_tag = path.string();
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const std::size_t h = take_u32("layer height");
        const std::size_t w = take_u32("layer width");
        const std::size_t c = take_u32("layer channels");
        const std::size_t n = h * w * c;
        if (n == 0) throw FormatError(describe(path, "FSTK layer " + std::to_string(l) + " is empty"));
        if ((buf.size() - pos) / 4 < n) throw FormatError(describe(path, "truncated FSTK payload"));
        FeatureLayer layer(h, w, c);
        std::memcpy(layer.samples.data(), buf.data() + pos, n * 4);
        pos += n * 4;
        if (!std::all_of(layer.samples.begin(), layer.samples.end(), [](float v) { return std::isfinite(v); }))
            throw FormatError(describe(path, "non-finite sample in FSTK layer " + std::to_string(l)));
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

void save_feature_stack(const FeatureStack& stack, const std::filesystem::path& path) {
    if (stack.layers.empty()) throw std::invalid_argument("save_feature_stack: stack has no layers");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(describe(path, "cannot open for writing"));
    out.write(kFstkMagic.data(), kFstkMagic.size());
    put_le<std::uint32_t>(out, kFstkVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stack.layers.size()));
    for (const auto& layer : stack.layers) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.height));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.width));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.channels));
        out.write(reinterpret_cast<const char*>(layer.samples.data()),
                  static_cast<std::streamsize>(layer.samples.size() * sizeof(float)));
    }
    if (!out) throw IoError(describe(path, "write failed"));
}

}  // namespace hpc
