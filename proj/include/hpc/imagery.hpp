#pragma once

#include "hpc/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hpc {

/// H x W x 3 raster, RGB interleaved, row-major with top-left origin.
/// Samples are nominally in [0,1] but may leave that range during optimization.
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width, double fill = 0.0);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t pixel_count() const { return height_ * width_; }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * 3 + c]; }

    std::span<double> samples() { return data_; }
    std::span<const double> samples() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// One binary value per pixel: 1 = static, 0 = transient.
class PixelMask {
public:
    PixelMask() = default;
    PixelMask(std::size_t height, std::size_t width, std::uint8_t fill = 1);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t pixel_count() const { return height_ * width_; }

    std::uint8_t& at(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

    std::span<std::uint8_t> values() { return data_; }
    std::span<const std::uint8_t> values() const { return data_; }

    std::size_t static_count() const;
    bool all_static() const { return static_count() == data_.size(); }

    friend bool operator==(const PixelMask&, const PixelMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> data_;
};

/// A single feature map, channel-fastest within each pixel.
struct FeatureLayer {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> samples;

    FeatureLayer() = default;
    FeatureLayer(std::size_t h, std::size_t w, std::size_t c)
        : height(h), width(w), channels(c), samples(h * w * c, 0.0f) {}

    float& at(std::size_t y, std::size_t x, std::size_t c) { return samples[(y * width + x) * channels + c]; }
    float at(std::size_t y, std::size_t x, std::size_t c) const { return samples[(y * width + x) * channels + c]; }

    friend bool operator==(const FeatureLayer&, const FeatureLayer&) = default;
};

struct FeatureStack {
    std::vector<FeatureLayer> layers;
    std::string source_tag;
};

Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Samples are clamped to [0,1] and quantized round-half-up.
void save_image(const Image& image, const std::filesystem::path& path);

std::uint8_t quantize_sample(double v);

/// Reads a single-channel (or RGB, first channel used) PNG/PPM; nonzero bytes are static.
PixelMask load_mask(const std::filesystem::path& path);
void save_mask(const PixelMask& mask, const std::filesystem::path& path);

FeatureStack load_feature_stack(const std::filesystem::path& path);
void save_feature_stack(const FeatureStack& stack, const std::filesystem::path& path);

}  // namespace hpc
