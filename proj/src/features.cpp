#include "hpc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hpc {

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Separable 5-tap binomial blur on a planar (h, w, 3) buffer with replicated borders.
Image binomial_smooth(const Image& in) {
    const std::size_t h = in.height();
    const std::size_t w = in.width();
    Image tmp(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 5; ++k)
                    acc += kBinomial[k] * in.at(y, clamp_index(static_cast<std::ptrdiff_t>(x + k) - 2, w), c);
                tmp.at(y, x, c) = acc;
            }
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 5; ++k)
                    acc += kBinomial[k] * tmp.at(clamp_index(static_cast<std::ptrdiff_t>(y + k) - 2, h), x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

Image decimate(const Image& in) {
    const std::size_t h = (in.height() + 1) / 2;
    const std::size_t w = (in.width() + 1) / 2;
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = in.at(2 * y, 2 * x, c);
    return out;
}

FeatureLayer describe_level(const Image& smoothed) {
    const std::size_t h = smoothed.height();
    const std::size_t w = smoothed.width();
    const auto lum = luminance(smoothed);
    auto L = [&](std::ptrdiff_t y, std::ptrdiff_t x) { return lum[clamp_index(y, h) * w + clamp_index(x, w)]; };

    FeatureLayer layer(h, w, kBuiltinFeatureChannels);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto yi = static_cast<std::ptrdiff_t>(y);
            const auto xi = static_cast<std::ptrdiff_t>(x);
            const double gx = 0.5 * (L(yi, xi + 1) - L(yi, xi - 1));
            const double gy = 0.5 * (L(yi + 1, xi) - L(yi - 1, xi));

            // Variance of the 3x3 neighbourhood, shifted by the centre value so flat
            // regions yield exactly zero.
            const double center = L(yi, xi);
            double s = 0.0, ss = 0.0;
            for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
                for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                    const double d = L(yi + dy, xi + dx) - center;
                    s += d;
                    ss += d * d;
                }
            const double var = std::max(0.0, ss / 9.0 - (s / 9.0) * (s / 9.0));

            for (std::size_t c = 0; c < 3; ++c) layer.at(y, x, c) = static_cast<float>(smoothed.at(y, x, c));
            layer.at(y, x, 3) = static_cast<float>(gx);
            layer.at(y, x, 4) = static_cast<float>(gy);
            layer.at(y, x, 5) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
            layer.at(y, x, 6) = static_cast<float>(std::sqrt(var));
        }
    }
    return layer;
}

std::vector<double> cosine_error(const FeatureLayer& a, const FeatureLayer& b) {
    std::vector<double> out(a.height * a.width);
    for (std::size_t p = 0; p < out.size(); ++p) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t c = 0; c < a.channels; ++c) {
            const double u = a.samples[p * a.channels + c];
            const double v = b.samples[p * b.channels + c];
            dot += u * v;
            na += u * u;
            nb += v * v;
        }
        if (na == 0.0 || nb == 0.0) {
            out[p] = 0.0;
            continue;
        }
        const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
        out[p] = 1.0 - cos;
    }
    return out;
}

// Bilinear resampling with half-pixel centres (edge samples replicated).
void accumulate_resampled(const std::vector<double>& src, std::size_t sh, std::size_t sw, ErrorMap& dst) {
    const std::size_t oh = dst.height();
    const std::size_t ow = dst.width();
    const double sy = static_cast<double>(sh) / static_cast<double>(oh);
    const double sx = static_cast<double>(sw) / static_cast<double>(ow);
    for (std::size_t y = 0; y < oh; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(sh - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, sh - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < ow; ++x) {
            const double fx =
                std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(sw - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, sw - 1);
            const double tx = fx - static_cast<double>(x0);
            const double top = (1.0 - tx) * src[y0 * sw + x0] + tx * src[y0 * sw + x1];
            const double bot = (1.0 - tx) * src[y1 * sw + x0] + tx * src[y1 * sw + x1];
            dst.at(y, x) += (1.0 - ty) * top + ty * bot;
        }
    }
}

}  // namespace

FeatureStack extract_builtin_features(const Image& image, std::size_t levels) {
    if (levels == 0) throw std::invalid_argument("extract_builtin_features: levels must be >= 1");
    if (levels > 30 || image.height() < (std::size_t{1} << (levels - 1)) ||
        image.width() < (std::size_t{1} << (levels - 1)))
        throw std::invalid_argument("extract_builtin_features: image too small for " + std::to_string(levels) +
                                    " levels");
    FeatureStack stack;
    stack.source_tag = "builtin:" + std::to_string(levels);
    Image level = image;
    for (std::size_t l = 0; l < levels; ++l) {
        const Image smoothed = binomial_smooth(level);
        stack.layers.push_back(describe_level(smoothed));
        if (l + 1 < levels) level = decimate(smoothed);
    }
    return stack;
}

ErrorMap perceptual_error(const FeatureStack& rendered_feats, const FeatureStack& reference_feats,
                          std::size_t out_height, std::size_t out_width) {
    if (out_height == 0 || out_width == 0) throw std::invalid_argument("perceptual_error: zero output dimension");
    if (rendered_feats.layers.empty() || rendered_feats.layers.size() != reference_feats.layers.size())
        throw std::invalid_argument("perceptual_error: layer count mismatch");
    for (std::size_t l = 0; l < rendered_feats.layers.size(); ++l) {
        const auto& a = rendered_feats.layers[l];
        const auto& b = reference_feats.layers[l];
        if (a.height != b.height || a.width != b.width || a.channels != b.channels || a.height == 0 || a.width == 0)
            throw std::invalid_argument("perceptual_error: layer " + std::to_string(l) + " dimension mismatch");
    }

    ErrorMap out(out_height, out_width);
    for (std::size_t l = 0; l < rendered_feats.layers.size(); ++l) {
        const auto& a = rendered_feats.layers[l];
        accumulate_resampled(cosine_error(a, reference_feats.layers[l]), a.height, a.width, out);
    }
    const double inv = 1.0 / static_cast<double>(rendered_feats.layers.size());
    for (auto& v : out.values()) v = std::clamp(v * inv, 0.0, 2.0);
    return out;
}

}  // namespace hpc
