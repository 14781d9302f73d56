#pragma once

#include "hpc/imagery.hpp"
#include "hpc/metrics.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hpc {

inline constexpr std::size_t kDefaultPatchSize = 16;

/// Regular P x P partition; edge patches are partial when P does not divide the image.
struct PatchGrid {
    std::size_t patch_size = 1;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t image_height = 0;
    std::size_t image_width = 0;

    static PatchGrid for_image(std::size_t height, std::size_t width, std::size_t patch_size);

    std::size_t patch_count() const { return rows * cols; }
    std::size_t patch_of(std::size_t y, std::size_t x) const { return (y / patch_size) * cols + x / patch_size; }
    /// Number of image pixels covered by patch `index`.
    std::size_t covered_pixels(std::size_t index) const;

    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

struct PatchErrors {
    PatchGrid grid;
    std::vector<double> values;
};

struct PatchMask {
    PatchGrid grid;
    std::vector<std::uint8_t> values;

    std::size_t static_count() const;
};

PatchErrors patch_mean(const ErrorMap& errors, std::size_t patch_size);

PixelMask mask_to_pixels(const PatchMask& mask);

}  // namespace hpc
