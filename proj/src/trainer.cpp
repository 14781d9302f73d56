#include "hpc/trainer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hpc {

namespace {

std::vector<PatchErrors> patch_errors_of(const std::vector<ErrorMap>& maps, std::size_t patch_size) {
    std::vector<PatchErrors> out;
    out.reserve(maps.size());
    for (const auto& m : maps) out.push_back(patch_mean(m, patch_size));
    return out;
}

}  // namespace

std::string_view to_string(FeatureSource source) {
    return source == FeatureSource::Builtin ? "builtin" : "fstk";
}

std::optional<FeatureSource> parse_feature_source(std::string_view text) {
    if (text == "builtin") return FeatureSource::Builtin;
    if (text == "fstk") return FeatureSource::Fstk;
    return std::nullopt;
}

void validate(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) throw ConfigError("train: learning_rate must be > 0");
    if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("train: lambda must lie in [0,1]");
    if (c.patch_size == 0) throw ConfigError("train: patch_size must be >= 1");
    if (c.mask_update_interval == 0) throw ConfigError("train: mask_update_interval must be >= 1");
    if (c.feature_levels == 0) throw ConfigError("train: feature_levels must be >= 1");
    if (!(c.percentile_level >= 0.0 && c.percentile_level <= 1.0))
        throw ConfigError("train: percentile_level must lie in [0,1]");
    if (c.log_interval == 0) throw ConfigError("train: log_interval must be >= 1");
    if (!(c.em.tolerance >= 0.0)) throw ConfigError("train: em_tolerance must be >= 0");
    if (c.em.max_iterations == 0) throw ConfigError("train: em_max_iterations must be >= 1");
    if (!(c.em.variance_floor > 0.0)) throw ConfigError("train: em_variance_floor must be > 0");
}

double MaskSet::static_fraction() const {
    std::size_t stat = 0, total = 0;
    for (const auto& m : pixels) {
        stat += m.static_count();
        total += m.pixel_count();
    }
    return total == 0 ? 1.0 : static_cast<double>(stat) / static_cast<double>(total);
}

PixelModel init_model(std::span<const Image> views) {
    if (views.empty()) throw std::invalid_argument("init_model: no views");
    PixelModel model{Image(views[0].height(), views[0].width())};
    auto acc = model.estimate.samples();
    for (const auto& v : views) {
        if (!v.same_shape(views[0])) throw std::invalid_argument("init_model: view dimension mismatch");
        const auto s = v.samples();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
    }
    const double inv = 1.0 / static_cast<double>(views.size());
    for (auto& a : acc) a *= inv;
    return model;
}

const Image& render(const PixelModel& model, std::size_t view_index, std::size_t view_count) {
    if (view_index >= view_count)
        throw std::out_of_range("render: view index " + std::to_string(view_index) + " out of range");
    return model.estimate;
}

MaskSet compute_masks(std::span<const Image> renders, std::span<const Image> references, const TrainConfig& config,
                      std::span<const FeatureStack> reference_stacks, std::span<const FeatureStack> render_stacks) {
    if (renders.size() != references.size() || renders.empty())
        throw std::invalid_argument("compute_masks: need one render per reference");
    for (std::size_t i = 0; i < renders.size(); ++i)
        if (!renders[i].same_shape(references[i]))
            throw std::invalid_argument("compute_masks: render/reference dimension mismatch at view " + std::to_string(i));
    if (!reference_stacks.empty() && reference_stacks.size() != references.size())
        throw std::invalid_argument("compute_masks: reference feature stack count mismatch");
    if (!render_stacks.empty() && render_stacks.size() != renders.size())
        throw std::invalid_argument("compute_masks: render feature stack count mismatch");

    std::vector<PatchErrors> photo, percep;
    if (needs_photometric(config.metric_mode)) {
        std::vector<ErrorMap> maps;
        for (std::size_t i = 0; i < renders.size(); ++i) maps.push_back(photometric_error(renders[i], references[i]));
        photo = patch_errors_of(maps, config.patch_size);
    }
    if (needs_perceptual(config.metric_mode)) {
        std::vector<ErrorMap> maps;
        const Image* cached_render = nullptr;
        FeatureStack cached_feats;
        for (std::size_t i = 0; i < renders.size(); ++i) {
            const FeatureStack* rf = nullptr;
            if (!render_stacks.empty()) {
                rf = &render_stacks[i];
            } else {
                // Identical renders (the aligned-view case) share one feature extraction.
                if (cached_render == nullptr || !(*cached_render == renders[i])) {
                    cached_feats = extract_builtin_features(renders[i], config.feature_levels);
                    cached_render = &renders[i];
                }
                rf = &cached_feats;
            }
            const FeatureStack ref_feats = reference_stacks.empty()
                                               ? extract_builtin_features(references[i], config.feature_levels)
                                               : reference_stacks[i];
            maps.push_back(perceptual_error(*rf, ref_feats, references[i].height(), references[i].width()));
        }
        percep = patch_errors_of(maps, config.patch_size);
    }

    ClassifyOptions options;
    options.mode = config.metric_mode;
    options.em = config.em;
    options.percentile_level = config.percentile_level;

    MaskSet out;
    out.patches = classify_patches(photo, percep, options);
    for (const auto& m : out.patches) out.pixels.push_back(mask_to_pixels(m));
    return out;
}

MaskSet update_masks(const PixelModel& model, std::span<const Image> views, const TrainConfig& config,
                     std::span<const FeatureStack> reference_stacks) {
    std::vector<Image> renders;
    renders.reserve(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) renders.push_back(render(model, i, views.size()));
    return compute_masks(renders, views, config, reference_stacks);
}

LossReport gradient_step(PixelModel& model, const Image& view, const PixelMask& mask, const TrainConfig& config) {
    LossReport report = masked_loss(model.estimate, view, mask, config.lambda);
    auto est = model.estimate.samples();
    for (std::size_t i = 0; i < est.size(); ++i) est[i] -= config.learning_rate * report.gradient[i];
    return report;
}

TrainResult train(std::span<const Image> views, const TrainConfig& config, const std::optional<Image>& clean_reference,
                  std::span<const FeatureStack> reference_stacks) {
    validate(config);
    if (views.size() < 2) throw std::invalid_argument("train: need at least 2 views");
    if (config.feature_source == FeatureSource::Fstk && needs_perceptual(config.metric_mode) &&
        reference_stacks.size() != views.size())
        throw std::invalid_argument("train: fstk feature source needs one reference stack per view");
    if (clean_reference && !clean_reference->same_shape(views[0]))
        throw std::invalid_argument("train: clean reference dimension mismatch");

    const std::span<const FeatureStack> ref_stacks =
        config.feature_source == FeatureSource::Fstk ? reference_stacks : std::span<const FeatureStack>{};

    TrainResult result;
    result.model = init_model(views);
    const std::size_t H = views[0].height();
    const std::size_t W = views[0].width();
    result.masks.assign(views.size(), PixelMask(H, W, 1));
    double static_fraction = 1.0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        if (step >= config.warmup_steps && (step - config.warmup_steps) % config.mask_update_interval == 0) {
            MaskSet set = update_masks(result.model, views, config, ref_stacks);
            static_fraction = set.static_fraction();
            result.masks = std::move(set.pixels);
            result.history.mask_update_steps.push_back(step);
        }
        const std::size_t v = step % views.size();
        const LossReport report = gradient_step(result.model, views[v], result.masks[v], config);

        if (step % config.log_interval == 0) {
            HistoryRow row;
            row.step = step;
            row.loss = report.total;
            row.psnr = clean_reference ? psnr(result.model.estimate, *clean_reference)
                                       : std::numeric_limits<double>::quiet_NaN();
            row.static_fraction = static_fraction;
            result.history.rows.push_back(row);
        }
    }
    return result;
}

double transient_iou(const PixelMask& predicted, const PixelMask& truth) {
    if (predicted.height() != truth.height() || predicted.width() != truth.width())
        throw std::invalid_argument("transient_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    const auto p = predicted.values();
    const auto t = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pt = p[i] == 0;
        const bool tt = t[i] == 0;
        inter += pt && tt;
        uni += pt || tt;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

EvalMetrics evaluate(const PixelModel& model, const Image& clean, std::span<const PixelMask> masks,
                     std::span<const PixelMask> gt_masks) {
    if (masks.size() != gt_masks.size() || masks.empty())
        throw std::invalid_argument("evaluate: predicted and ground-truth mask counts differ");
    EvalMetrics m;
    m.psnr = psnr(model.estimate, clean);
    m.ssim = ssim(model.estimate, clean);
    double iou = 0.0;
    std::size_t stat = 0, total = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        iou += transient_iou(masks[i], gt_masks[i]);
        stat += masks[i].static_count();
        total += masks[i].pixel_count();
    }
    m.mask_iou = iou / static_cast<double>(masks.size());
    m.static_fraction = static_cast<double>(stat) / static_cast<double>(total);
    return m;
}

}  // namespace hpc
