#pragma once

#include "hpc/imagery.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hpc {

struct SceneConfig {
    std::size_t height = 128;
    std::size_t width = 128;
    std::size_t num_views = 20;
    double distractor_view_fraction = 0.6;
    std::size_t distractors_min = 1;
    std::size_t distractors_max = 3;
    /// Side lengths of each distractor's bounding box, in pixels.
    std::size_t distractor_size_min = 24;
    std::size_t distractor_size_max = 56;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
    /// Low-contrast distractors and flat, texture-free background regions.
    bool hard_mode = false;
};

/// Throws ConfigError when the configuration cannot be realized.
void validate(const SceneConfig& config);

struct SyntheticScene {
    Image clean;
    std::vector<Image> views;
    std::vector<PixelMask> gt_static_masks;
    /// Indices of views that received distractors, ascending.
    std::vector<std::size_t> corrupted_views;
};

Image generate_clean_image(const SceneConfig& config);

SyntheticScene generate_scene(const SceneConfig& config);

}  // namespace hpc
