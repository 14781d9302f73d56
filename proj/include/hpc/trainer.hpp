#pragma once

#include "hpc/classify.hpp"
#include "hpc/imagery.hpp"
#include "hpc/metrics.hpp"
#include "hpc/patching.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hpc {

/// The static-scene hypothesis. Views are aligned, so rendering any view is the identity.
struct PixelModel {
    Image estimate;
};

enum class FeatureSource { Builtin, Fstk };

std::string_view to_string(FeatureSource source);
std::optional<FeatureSource> parse_feature_source(std::string_view text);

struct TrainConfig {
    std::size_t steps = 2000;
    double learning_rate = 100.0;
    double lambda = kDefaultLambda;
    std::size_t patch_size = kDefaultPatchSize;
    std::size_t warmup_steps = 500;
    std::size_t mask_update_interval = 100;
    MetricMode metric_mode = MetricMode::Hybrid;
    FeatureSource feature_source = FeatureSource::Builtin;
    std::size_t feature_levels = 3;
    double percentile_level = 0.8;
    EmSettings em;
    std::size_t log_interval = 10;
    std::uint64_t seed = 0;
};

/// Throws ConfigError for values outside their documented ranges.
void validate(const TrainConfig& config);

struct HistoryRow {
    std::size_t step = 0;
    double loss = 0.0;
    /// NaN when no clean reference was supplied.
    double psnr = 0.0;
    double static_fraction = 1.0;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
    /// Every step at which masks were regenerated, ascending.
    std::vector<std::size_t> mask_update_steps;
};

struct MaskSet {
    std::vector<PatchMask> patches;
    std::vector<PixelMask> pixels;

    /// Fraction of static pixels over all views.
    double static_fraction() const;
};

struct TrainResult {
    PixelModel model;
    std::vector<PixelMask> masks;
    TrainHistory history;
};

PixelModel init_model(std::span<const Image> views);

const Image& render(const PixelModel& model, std::size_t view_index, std::size_t view_count);

/// Classifies every (render, reference) pair under the configured mode. Reference feature
/// stacks, when given, replace the builtin extractor on the reference side; render stacks
/// likewise on the render side.
MaskSet compute_masks(std::span<const Image> renders, std::span<const Image> references, const TrainConfig& config,
                      std::span<const FeatureStack> reference_stacks = {},
                      std::span<const FeatureStack> render_stacks = {});

/// Renders every view from the model and classifies it.
MaskSet update_masks(const PixelModel& model, std::span<const Image> views, const TrainConfig& config,
                     std::span<const FeatureStack> reference_stacks = {});

/// One plain gradient-descent step of the masked loss on one view; returns the loss report.
LossReport gradient_step(PixelModel& model, const Image& view, const PixelMask& mask, const TrainConfig& config);

TrainResult train(std::span<const Image> views, const TrainConfig& config,
                  const std::optional<Image>& clean_reference = std::nullopt,
                  std::span<const FeatureStack> reference_stacks = {});

struct EvalMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
    double mask_iou = 0.0;
    double static_fraction = 1.0;
};

/// IoU of transient (0) regions; a view with no transient pixels in either mask scores 1.
double transient_iou(const PixelMask& predicted, const PixelMask& truth);

EvalMetrics evaluate(const PixelModel& model, const Image& clean, std::span<const PixelMask> masks,
                     std::span<const PixelMask> gt_masks);

}  // namespace hpc
