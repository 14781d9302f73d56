#include "hpc/synth.hpp"

#include "hpc/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace hpc {

namespace {

using Rgb = std::array<double, 3>;

// Stream ids keep every random decision independent of the others.
constexpr std::uint64_t kCleanStream = 1;
constexpr std::uint64_t kSelectionStream = 2;
constexpr std::uint64_t kViewStreamBase = 1000;
constexpr std::uint64_t kNoiseStreamBase = 1'000'000;

constexpr double kMinDistractorContrast = 0.35;

struct Box {
    std::size_t y0, x0, h, w;
    bool ellipse;

    bool contains(std::size_t y, std::size_t x) const {
        if (y < y0 || y >= y0 + h || x < x0 || x >= x0 + w) return false;
        if (!ellipse) return true;
        const double ry = 0.5 * static_cast<double>(h);
        const double rx = 0.5 * static_cast<double>(w);
        const double dy = (static_cast<double>(y - y0) + 0.5 - ry) / ry;
        const double dx = (static_cast<double>(x - x0) + 0.5 - rx) / rx;
        return dx * dx + dy * dy <= 1.0;
    }
};

Rgb random_rgb(CounterRng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

Rgb box_mean(const Image& img, const Box& b) {
    Rgb m{0, 0, 0};
    std::size_t n = 0;
    for (std::size_t y = b.y0; y < b.y0 + b.h; ++y)
        for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) {
            if (!b.contains(y, x)) continue;
            for (std::size_t c = 0; c < 3; ++c) m[c] += img.at(y, x, c);
            ++n;
        }
    for (auto& v : m) v /= static_cast<double>(std::max<std::size_t>(n, 1));
    return m;
}

Box random_box(CounterRng& rng, std::size_t height, std::size_t width, std::size_t smin, std::size_t smax) {
    Box b{};
    b.h = rng.uniform_int(smin, smax);
    b.w = rng.uniform_int(smin, smax);
    b.y0 = rng.uniform_int(0, height - b.h);
    b.x0 = rng.uniform_int(0, width - b.w);
    b.ellipse = rng.uniform() < 0.5;
    return b;
}

Rgb distractor_color(CounterRng& rng, const Rgb& background, bool hard) {
    if (hard) {
        Rgb c{};
        for (std::size_t k = 0; k < 3; ++k) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            c[k] = std::clamp(background[k] + sign * rng.uniform(0.04, 0.08), 0.0, 1.0);
        }
        return c;
    }
    for (int attempt = 0; attempt < 100; ++attempt) {
        const Rgb c = random_rgb(rng, 0.0, 1.0);
        const double d = (std::abs(c[0] - background[0]) + std::abs(c[1] - background[1]) +
                          std::abs(c[2] - background[2])) / 3.0;
        if (d >= kMinDistractorContrast) return c;
    }
    return {1.0 - background[0], 1.0 - background[1], 1.0 - background[2]};
}

}  // namespace

void validate(const SceneConfig& c) {
    if (c.height == 0 || c.width == 0) throw ConfigError("scene: height and width must be >= 1");
    if (c.num_views < 2) throw ConfigError("scene: num_views must be >= 2");
    if (!(c.distractor_view_fraction >= 0.0 && c.distractor_view_fraction <= 1.0))
        throw ConfigError("scene: distractor_view_fraction must lie in [0,1]");
    if (c.distractors_min > c.distractors_max) throw ConfigError("scene: distractors_min exceeds distractors_max");
    if (c.distractor_size_min == 0 || c.distractor_size_min > c.distractor_size_max)
        throw ConfigError("scene: distractor size range must satisfy 1 <= min <= max");
    if (c.distractor_size_max > std::min(c.height, c.width))
        throw ConfigError("scene: distractor size " + std::to_string(c.distractor_size_max) + " exceeds image bounds");
    if (!(c.noise_sigma >= 0.0) || !std::isfinite(c.noise_sigma)) throw ConfigError("scene: noise_sigma must be >= 0");
}

Image generate_clean_image(const SceneConfig& config) {
    validate(config);
    const std::size_t H = config.height;
    const std::size_t W = config.width;
    CounterRng rng(config.seed, kCleanStream);

    std::array<Rgb, 4> corners{};
    for (auto& c : corners) c = random_rgb(rng, 0.25, 0.75);

    struct Wave {
        double fy, fx, phase, amp;
        Rgb weight;
    };
    std::array<Wave, 5> waves{};
    const double scale = static_cast<double>(std::max(H, W));
    for (auto& w : waves) {
        const double cycles = rng.uniform(2.0, 7.0);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        w.fy = 2.0 * std::numbers::pi * cycles * std::sin(theta) / scale;
        w.fx = 2.0 * std::numbers::pi * cycles * std::cos(theta) / scale;
        w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        w.amp = 0.035;
        w.weight = random_rgb(rng, 0.5, 1.0);
    }

    Image img(H, W);
    for (std::size_t y = 0; y < H; ++y) {
        const double v = H > 1 ? static_cast<double>(y) / static_cast<double>(H - 1) : 0.0;
        for (std::size_t x = 0; x < W; ++x) {
            const double u = W > 1 ? static_cast<double>(x) / static_cast<double>(W - 1) : 0.0;
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = corners[0][c] * (1 - u) * (1 - v) + corners[1][c] * u * (1 - v) +
                                  corners[2][c] * (1 - u) * v + corners[3][c] * u * v;
        }
    }

    // Opaque geometric shapes over the gradient.
    const double dim = static_cast<double>(std::min(H, W));
    for (int s = 0; s < 4; ++s) {
        Box b{};
        b.h = std::max<std::size_t>(1, static_cast<std::size_t>(rng.uniform(0.15, 0.35) * dim));
        b.w = std::max<std::size_t>(1, static_cast<std::size_t>(rng.uniform(0.15, 0.35) * dim));
        b.y0 = rng.uniform_int(0, H - std::min(b.h, H));
        b.x0 = rng.uniform_int(0, W - std::min(b.w, W));
        b.ellipse = rng.uniform() < 0.5;
        const Rgb color = random_rgb(rng, 0.1, 0.9);
        for (std::size_t y = b.y0; y < std::min(H, b.y0 + b.h); ++y)
            for (std::size_t x = b.x0; x < std::min(W, b.x0 + b.w); ++x)
                if (b.contains(y, x))
                    for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    }

    // Band-limited texture everywhere.
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (const auto& w : waves) {
                const double t = w.amp * std::sin(w.fy * static_cast<double>(y) + w.fx * static_cast<double>(x) + w.phase);
                for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) += t * w.weight[c];
            }

    if (config.hard_mode) {
        // Dark texture-free regions.
        for (int s = 0; s < 2; ++s) {
            Box b{};
            b.h = std::max<std::size_t>(1, static_cast<std::size_t>(rng.uniform(0.3, 0.45) * dim));
            b.w = std::max<std::size_t>(1, static_cast<std::size_t>(rng.uniform(0.3, 0.45) * dim));
            b.y0 = rng.uniform_int(0, H - std::min(b.h, H));
            b.x0 = rng.uniform_int(0, W - std::min(b.w, W));
            b.ellipse = false;
            const Rgb color = random_rgb(rng, 0.03, 0.08);
            for (std::size_t y = b.y0; y < std::min(H, b.y0 + b.h); ++y)
                for (std::size_t x = b.x0; x < std::min(W, b.x0 + b.w); ++x)
                    for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
    }

    for (auto& v : img.samples()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

SyntheticScene generate_scene(const SceneConfig& config) {
    validate(config);
    SyntheticScene scene;
    scene.clean = generate_clean_image(config);
    const std::size_t N = config.num_views;

    // Seeded partial Fisher-Yates picks the corrupted subset.
    const auto corrupted_count =
        static_cast<std::size_t>(std::floor(config.distractor_view_fraction * static_cast<double>(N) + 1e-9));
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    CounterRng pick(config.seed, kSelectionStream);
    for (std::size_t i = 0; i < corrupted_count; ++i) std::swap(order[i], order[pick.uniform_int(i, N - 1)]);
    scene.corrupted_views.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(corrupted_count));
    std::sort(scene.corrupted_views.begin(), scene.corrupted_views.end());

    for (std::size_t v = 0; v < N; ++v) {
        Image view = scene.clean;
        PixelMask mask(config.height, config.width, 1);
        if (std::binary_search(scene.corrupted_views.begin(), scene.corrupted_views.end(), v)) {
            CounterRng rng(config.seed, kViewStreamBase + v);
            const std::size_t k = rng.uniform_int(config.distractors_min, config.distractors_max);
            for (std::size_t d = 0; d < k; ++d) {
                const Box b = random_box(rng, config.height, config.width, config.distractor_size_min,
                                         config.distractor_size_max);
                const Rgb color = distractor_color(rng, box_mean(scene.clean, b), config.hard_mode);
                for (std::size_t y = b.y0; y < b.y0 + b.h; ++y)
                    for (std::size_t x = b.x0; x < b.x0 + b.w; ++x)
                        if (b.contains(y, x)) {
                            for (std::size_t c = 0; c < 3; ++c) view.at(y, x, c) = color[c];
                            mask.at(y, x) = 0;
                        }
            }
        }
        if (config.noise_sigma > 0.0) {
            CounterRng noise(config.seed, kNoiseStreamBase + v);
            for (auto& s : view.samples()) s = std::clamp(s + config.noise_sigma * noise.normal(), 0.0, 1.0);
        }
        scene.views.push_back(std::move(view));
        scene.gt_static_masks.push_back(std::move(mask));
    }
    return scene;
}

}  // namespace hpc
