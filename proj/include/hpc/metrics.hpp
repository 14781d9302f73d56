#pragma once

#include "hpc/imagery.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace hpc {

/// Per-pixel nonnegative error field.
class ErrorMap {
public:
    ErrorMap() = default;
    ErrorMap(std::size_t height, std::size_t width, double fill = 0.0)
        : height_(height), width_(width), data_(height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }

    double& at(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    double at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

struct LossReport {
    double total = 0.0;
    double l1_part = 0.0;
    double ssim_part = 0.0;
    /// d(total)/d(rendered), same layout as Image samples.
    std::vector<double> gradient;
};

inline constexpr double kDefaultLambda = 0.2;
inline constexpr double kPsnrCap = 99.0;
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Channel-mean absolute difference per pixel.
ErrorMap photometric_error(const Image& rendered, const Image& reference);

/// 1 - cosine similarity across channels, per layer, bilinearly resampled to the output
/// size (half-pixel centers) and averaged over layers. A zero feature vector on either
/// side counts as similarity 1.
ErrorMap perceptual_error(const FeatureStack& rendered_feats, const FeatureStack& reference_feats,
                          std::size_t out_height, std::size_t out_width);

/// Deterministic 7-channel pyramid features (smoothed RGB, luminance gradients,
/// gradient magnitude, 3x3 luminance contrast), one layer per octave.
FeatureStack extract_builtin_features(const Image& image, std::size_t levels);

inline constexpr std::size_t kBuiltinFeatureChannels = 7;

/// Rec.601 luma.
std::vector<double> luminance(const Image& image);

/// Mean SSIM over valid 11x11 Gaussian windows on luminance.
double ssim(const Image& a, const Image& b);

/// SSIM plus its gradient with respect to every sample of `a` (Image sample layout).
double ssim_with_gradient(const Image& a, const Image& b, std::vector<double>& grad_a);

/// (1 - lambda) * L1 + lambda * (1 - SSIM), with gradient w.r.t. rendered.
LossReport mixed_loss(const Image& rendered, const Image& reference, double lambda);

/// mixed_loss applied to mask-multiplied inputs.
LossReport masked_loss(const Image& rendered, const Image& reference, const PixelMask& mask, double lambda);

/// Peak 1; identical inputs return kPsnrCap.
double psnr(const Image& a, const Image& b);

}  // namespace hpc
