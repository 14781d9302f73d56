#include "hpc/patching.hpp"

#include <algorithm>
#include <stdexcept>

namespace hpc {

PatchGrid PatchGrid::for_image(std::size_t height, std::size_t width, std::size_t patch_size) {
    if (patch_size == 0) throw std::invalid_argument("patch size must be >= 1");
    PatchGrid g;
    g.patch_size = patch_size;
    g.image_height = height;
    g.image_width = width;
    g.rows = (height + patch_size - 1) / patch_size;
    g.cols = (width + patch_size - 1) / patch_size;
    return g;
}

std::size_t PatchGrid::covered_pixels(std::size_t index) const {
    const std::size_t r = index / cols;
    const std::size_t c = index % cols;
    const std::size_t h = std::min(patch_size, image_height - r * patch_size);
    const std::size_t w = std::min(patch_size, image_width - c * patch_size);
    return h * w;
}

std::size_t PatchMask::static_count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

PatchErrors patch_mean(const ErrorMap& errors, std::size_t patch_size) {
    PatchErrors out;
    out.grid = PatchGrid::for_image(errors.height(), errors.width(), patch_size);
    out.values.assign(out.grid.patch_count(), 0.0);
    for (std::size_t y = 0; y < errors.height(); ++y)
        for (std::size_t x = 0; x < errors.width(); ++x) out.values[out.grid.patch_of(y, x)] += errors.at(y, x);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] /= static_cast<double>(out.grid.covered_pixels(i));
    return out;
}

PixelMask mask_to_pixels(const PatchMask& mask) {
    const auto& g = mask.grid;
    if (mask.values.size() != g.patch_count()) throw std::invalid_argument("mask_to_pixels: mask/grid size mismatch");
    PixelMask out(g.image_height, g.image_width);
    for (std::size_t y = 0; y < g.image_height; ++y)
        for (std::size_t x = 0; x < g.image_width; ++x) out.at(y, x) = mask.values[g.patch_of(y, x)] ? 1 : 0;
    return out;
}

}  // namespace hpc
