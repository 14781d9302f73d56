#include "hpc/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace hpc;

namespace {

// Direct evaluation of the SSIM formula on every valid 11x11 window with a 2-D Gaussian.
double naive_ssim(const Image& a, const Image& b) {
    const std::size_t h = a.height(), w = a.width(), n = 11;
    double g[11][11];
    double gsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double di = static_cast<double>(i) - 5.0, dj = static_cast<double>(j) - 5.0;
            g[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            gsum += g[i][j];
        }
    auto lum = [](const Image& im, std::size_t y, std::size_t x) {
        return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
    };
    const double c1 = 0.0001, c2 = 0.0009;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + n <= h; ++y0)
        for (std::size_t x0 = 0; x0 + n <= w; ++x0) {
            double mx = 0, my = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    mx += g[i][j] / gsum * lum(a, y0 + i, x0 + j);
                    my += g[i][j] / gsum * lum(b, y0 + i, x0 + j);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double dx = lum(a, y0 + i, x0 + j) - mx;
                    const double dy = lum(b, y0 + i, x0 + j) - my;
                    vx += g[i][j] / gsum * dx * dx;
                    vy += g[i][j] / gsum * dy * dy;
                    cxy += g[i][j] / gsum * dx * dy;
                }
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

double loss_total(const Image& r, const Image& ref, const PixelMask& m, double lambda) {
    return masked_loss(r, ref, m, lambda).total;
}

// Reference offset by at least 1e-3 from the rendered sample so no FD step crosses an L1 kink.
Image offset_reference(const Image& rendered, CounterRng& rng) {
    Image ref = rendered;
    for (auto& s : ref.samples()) {
        const double mag = rng.uniform(1e-3, 0.3);
        s += rng.uniform() < 0.5 ? -mag : mag;
    }
    return ref;
}

FeatureStack stack_of(std::vector<FeatureLayer> layers) {
    FeatureStack s;
    s.layers = std::move(layers);
    return s;
}

}  // namespace

TEST_CASE("photometric error: identity, constant offset, scalar-loop oracle, symmetry") {
    CounterRng rng(1);
    const Image a = testing::random_image(4, 4, rng);
    const ErrorMap zero = photometric_error(a, a);
    for (double v : zero.values()) CHECK(v == 0.0);

    const ErrorMap c = photometric_error(Image(3, 5, 0.5), Image(3, 5, 0.25));
    for (double v : c.values()) CHECK(v == 0.25);

    const Image b = testing::random_image(4, 4, rng);
    const ErrorMap e = photometric_error(a, b);
    const ErrorMap r = photometric_error(b, a);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            double s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += std::abs(a.at(y, x, k) - b.at(y, x, k));
            CHECK(e.at(y, x) == doctest::Approx(s / 3.0).epsilon(1e-15));
            CHECK(e.at(y, x) == r.at(y, x));
            CHECK(e.at(y, x) > 0.0);
        }
    CHECK_THROWS_AS(photometric_error(Image(2, 2), Image(2, 3)), std::invalid_argument);
}

TEST_CASE("perceptual error: identical stacks give zero") {
    CounterRng rng(2);
    FeatureLayer l(4, 5, 3);
    for (auto& v : l.samples) v = static_cast<float>(rng.uniform(-1, 1));
    const auto s = stack_of({l});
    const ErrorMap e = perceptual_error(s, s, 8, 10);
    for (double v : e.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("perceptual error: orthogonal vectors at one location") {
    FeatureLayer a(3, 3, 2), b(3, 3, 2);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
            a.at(y, x, 0) = b.at(y, x, 0) = 0.3f;
            a.at(y, x, 1) = b.at(y, x, 1) = 0.7f;
        }
    a.at(1, 2, 0) = 1.f;
    a.at(1, 2, 1) = 0.f;
    b.at(1, 2, 0) = 0.f;
    b.at(1, 2, 1) = 1.f;
    const ErrorMap e = perceptual_error(stack_of({a}), stack_of({b}), 3, 3);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x)
            CHECK(e.at(y, x) == doctest::Approx(y == 1 && x == 2 ? 1.0 : 0.0).epsilon(1e-7));
}

TEST_CASE("perceptual error: mean over layers") {
    // cos = 0.8 -> error 0.2; cos = 0.4 -> error 0.6.
    auto pair_with_cos = [](double c) {
        FeatureLayer a(4, 4, 2), b(4, 4, 2);
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 4; ++x) {
                a.at(y, x, 0) = 1.f;
                b.at(y, x, 0) = static_cast<float>(c);
                b.at(y, x, 1) = static_cast<float>(std::sqrt(1 - c * c));
            }
        return std::pair{a, b};
    };
    auto [a1, b1] = pair_with_cos(0.8);
    auto [a2, b2] = pair_with_cos(0.4);
    const ErrorMap e = perceptual_error(stack_of({a1, a2}), stack_of({b1, b2}), 4, 4);
    for (double v : e.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("perceptual error: bilinear resampling uses pixel centres") {
    // A 1x2 error row [0, 1] stretched to 1x4 samples at source x = -0.25, 0.25, 0.75, 1.25.
    FeatureLayer a(1, 2, 2), b(1, 2, 2);
    a.at(0, 0, 0) = b.at(0, 0, 0) = 1.f;
    a.at(0, 1, 0) = 1.f;
    b.at(0, 1, 1) = 1.f;
    const ErrorMap e = perceptual_error(stack_of({a}), stack_of({b}), 1, 4);
    CHECK(e.at(0, 0) == doctest::Approx(0.0));
    CHECK(e.at(0, 1) == doctest::Approx(0.25));
    CHECK(e.at(0, 2) == doctest::Approx(0.75));
    CHECK(e.at(0, 3) == doctest::Approx(1.0));

    // Layers at different resolutions with constant error stay constant.
    FeatureLayer c(2, 2, 1), d(2, 2, 1), f(4, 4, 1), g(4, 4, 1);
    for (auto& v : c.samples) v = 1.f;
    for (auto& v : d.samples) v = -1.f;
    for (auto& v : f.samples) v = 2.f;
    for (auto& v : g.samples) v = 3.f;
    const ErrorMap m = perceptual_error(stack_of({c, f}), stack_of({d, g}), 4, 4);
    for (double v : m.values()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("perceptual error: zero vectors count as similar; values stay in [0,2]") {
    FeatureLayer a(2, 2, 3), b(2, 2, 3);
    b.at(0, 0, 0) = 5.f;
    const ErrorMap flat = perceptual_error(stack_of({a}), stack_of({b}), 2, 2);
    for (double v : flat.values()) CHECK(v == 0.0);

    CounterRng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        FeatureLayer x(3, 4, 4), y(3, 4, 4), x2(2, 2, 5), y2(2, 2, 5);
        for (auto* l : {&x, &y, &x2, &y2})
            for (auto& v : l->samples) v = static_cast<float>(rng.uniform(-1, 1));
        const ErrorMap e = perceptual_error(stack_of({x, x2}), stack_of({y, y2}), 7, 9);
        for (double v : e.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
    }
}

TEST_CASE("perceptual error: mismatches and empty outputs are rejected") {
    FeatureLayer a(2, 2, 3), b(2, 2, 4), c(2, 3, 3);
    CHECK_THROWS_AS(perceptual_error(stack_of({a}), stack_of({b}), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(perceptual_error(stack_of({a}), stack_of({c}), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(perceptual_error(stack_of({a}), stack_of({a, a}), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(perceptual_error(stack_of({a}), stack_of({a}), 0, 2), std::invalid_argument);
}

TEST_CASE("builtin features: constant image has no structure channels") {
    const FeatureStack s = extract_builtin_features(Image(16, 16, 0.4), 3);
    REQUIRE(s.layers.size() == 3);
    for (const auto& l : s.layers) {
        REQUIRE(l.channels == kBuiltinFeatureChannels);
        for (std::size_t y = 0; y < l.height; ++y)
            for (std::size_t x = 0; x < l.width; ++x) {
                for (std::size_t c = 0; c < 3; ++c) CHECK(l.at(y, x, c) == doctest::Approx(0.4));
                for (std::size_t c = 3; c < 7; ++c) CHECK(l.at(y, x, c) == 0.0f);
            }
    }
}

TEST_CASE("builtin features: pyramid sizes, purity, preconditions") {
    CounterRng rng(4);
    const Image img = testing::random_image(16, 16, rng);
    const FeatureStack s = extract_builtin_features(img, 3);
    REQUIRE(s.layers.size() == 3);
    CHECK(s.layers[0].height == 16);
    CHECK(s.layers[1].height == 8);
    CHECK(s.layers[2].height == 4);
    CHECK(s.layers[2].width == 4);
    const FeatureStack again = extract_builtin_features(img, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.layers[i] == s.layers[i]);

    CHECK(extract_builtin_features(testing::random_image(5, 7, rng), 3).layers[2].width == 2);
    CHECK_THROWS_AS(extract_builtin_features(img, 0), std::invalid_argument);
    CHECK_THROWS_AS(extract_builtin_features(Image(3, 16), 3), std::invalid_argument);
}

TEST_CASE("builtin features: horizontal ramp has a positive x-gradient only") {
    Image ramp(12, 12);
    for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x)
            for (std::size_t c = 0; c < 3; ++c) ramp.at(y, x, c) = 0.05 * static_cast<double>(x);
    const FeatureStack stack = extract_builtin_features(ramp, 1);
    const FeatureLayer& l = stack.layers[0];
    for (std::size_t y = 2; y < 10; ++y)
        for (std::size_t x = 2; x < 10; ++x) {
            CHECK(l.at(y, x, 3) > 0.0f);
            CHECK(l.at(y, x, 4) == doctest::Approx(0.0).epsilon(1e-6));
        }
}

TEST_CASE("ssim: identity and symmetry") {
    CounterRng rng(5);
    const Image a = testing::random_image(16, 16, rng);
    const Image b = testing::random_image(16, 16, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
}

TEST_CASE("ssim: constant images reduce to the luminance term") {
    const double c1 = 0.0001;
    const double expected = (2 * 0.8 * 0.2 + c1) / (0.8 * 0.8 + 0.2 * 0.2 + c1);
    CHECK(ssim(Image(12, 14, 0.8), Image(12, 14, 0.2)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ssim: matches direct windowed evaluation") {
    CounterRng rng(6);
    for (int t = 0; t < 5; ++t) {
        const Image a = testing::random_image(16, 16, rng);
        const Image b = testing::random_image(16, 16, rng);
        CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) < 1e-9);
    }
    const Image tall_a = testing::random_image(13, 20, rng);
    const Image tall_b = testing::random_image(13, 20, rng);
    CHECK(std::abs(ssim(tall_a, tall_b) - naive_ssim(tall_a, tall_b)) < 1e-9);
}

TEST_CASE("ssim: preconditions") {
    CHECK_THROWS_AS(ssim(Image(10, 20), Image(10, 20)), std::invalid_argument);
    CHECK_THROWS_AS(ssim(Image(12, 12), Image(12, 13)), std::invalid_argument);
}

TEST_CASE("masked loss: trivial cases") {
    CounterRng rng(8);
    const Image a = testing::random_image(16, 16, rng);
    const LossReport same = masked_loss(a, a, PixelMask(16, 16, 1), 0.2);
    CHECK(same.total == doctest::Approx(0.0).epsilon(1e-15));
    for (double g : same.gradient) CHECK(std::abs(g) < 1e-15);

    const Image b = testing::random_image(16, 16, rng);
    const LossReport none = masked_loss(a, b, PixelMask(16, 16, 0), 0.2);
    CHECK(none.l1_part == 0.0);
    CHECK(none.ssim_part == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(none.total == doctest::Approx(0.0).epsilon(1e-15));
    for (double g : none.gradient) CHECK(g == 0.0);
}

TEST_CASE("masked loss: all-ones mask equals the unmasked mixed loss") {
    CounterRng rng(10);
    for (int t = 0; t < 10; ++t) {
        const Image a = testing::random_image(16, 16, rng);
        const Image b = testing::random_image(16, 16, rng);
        const double lambda = rng.uniform();
        const LossReport m = masked_loss(a, b, PixelMask(16, 16, 1), lambda);
        const LossReport u = mixed_loss(a, b, lambda);
        CHECK(std::abs(m.total - u.total) <= 1e-12);

        double l1 = 0;
        for (std::size_t i = 0; i < a.samples().size(); ++i) l1 += std::abs(a.samples()[i] - b.samples()[i]);
        l1 /= static_cast<double>(a.samples().size());
        const double expected = (1 - lambda) * l1 + lambda * (1 - naive_ssim(a, b));
        CHECK(std::abs(u.total - expected) <= 1e-12);
        CHECK(u.total == (1 - lambda) * u.l1_part + lambda * u.ssim_part);
    }
}

TEST_CASE("masked loss: analytic gradient matches central differences") {
    CounterRng rng(12);
    const double h = 1e-4;
    for (int t = 0; t < 6; ++t) {
        const Image r = testing::random_image(16, 16, rng, 0.2, 0.8);
        const Image ref = offset_reference(r, rng);
        const PixelMask m = t == 0 ? PixelMask(16, 16, 1) : testing::random_mask(16, 16, rng, 0.7);
        const LossReport rep = masked_loss(r, ref, m, 0.2);
        double worst = 0.0;
        for (std::size_t i = 0; i < r.samples().size(); ++i) {
            Image up = r, down = r;
            up.samples()[i] += h;
            down.samples()[i] -= h;
            const double fd = (loss_total(up, ref, m, 0.2) - loss_total(down, ref, m, 0.2)) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(rep.gradient[i]), 1e-10});
            if (std::abs(fd) < 1e-14 && std::abs(rep.gradient[i]) < 1e-14) continue;
            worst = std::max(worst, std::abs(fd - rep.gradient[i]) / scale);
        }
        CHECK(worst < 1e-4);
        for (std::size_t p = 0; p < m.pixel_count(); ++p)
            if (!m.values()[p])
                for (std::size_t c = 0; c < 3; ++c) CHECK(rep.gradient[p * 3 + c] == 0.0);
    }
}

TEST_CASE("mixed loss rejects lambda outside [0,1] and shape mismatches") {
    CHECK_THROWS_AS(mixed_loss(Image(12, 12), Image(12, 12), 1.5), std::invalid_argument);
    CHECK_THROWS_AS(masked_loss(Image(12, 12), Image(12, 12), PixelMask(12, 11), 0.2), std::invalid_argument);
}

TEST_CASE("psnr: cap, closed form, direct MSE") {
    CounterRng rng(13);
    const Image a = testing::random_image(5, 6, rng);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(psnr(Image(4, 4, 0.3), Image(4, 4, 0.4)) == doctest::Approx(20.0).epsilon(1e-9));
    const Image b = testing::random_image(5, 6, rng);
    double se = 0;
    for (std::size_t i = 0; i < a.samples().size(); ++i) se += std::pow(a.samples()[i] - b.samples()[i], 2);
    CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1.0 / (se / 90.0))).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(Image(2, 2), Image(2, 3)), std::invalid_argument);
}
