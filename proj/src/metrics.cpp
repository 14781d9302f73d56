#include "hpc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hpc {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": dimension mismatch (" + std::to_string(a.height()) + "x" +
                                    std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                                    std::to_string(b.width()) + ")");
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    const double center = static_cast<double>(kSsimWindow / 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double d = static_cast<double>(i) - center;
        taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[i];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

// Valid-mode separable correlation of an h x w field with the normalized window.
// Output is (h - 10) x (w - 10).
std::vector<double> window_filter(std::span<const double> in, std::size_t h, std::size_t w,
                                  const std::array<double, kSsimWindow>& taps) {
    const std::size_t oh = h - kSsimWindow + 1;
    const std::size_t ow = w - kSsimWindow + 1;
    std::vector<double> rows(h * ow);
    for (std::size_t y = 0; y < h; ++y) {
        const double* src = in.data() + y * w;
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) acc += taps[k] * src[x + k];
            rows[y * ow + x] = acc;
        }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

// Adjoint of window_filter: scatters an (h-10) x (w-10) field back to h x w.
std::vector<double> window_scatter(std::span<const double> in, std::size_t h, std::size_t w,
                                   const std::array<double, kSsimWindow>& taps) {
    const std::size_t oh = h - kSsimWindow + 1;
    const std::size_t ow = w - kSsimWindow + 1;
    std::vector<double> cols(h * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t k = 0; k < kSsimWindow; ++k)
            for (std::size_t x = 0; x < ow; ++x) cols[(y + k) * ow + x] += taps[k] * in[y * ow + x];
    std::vector<double> out(h * w, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        double* dst = out.data() + y * w;
        for (std::size_t x = 0; x < ow; ++x) {
            const double v = cols[y * ow + x];
            for (std::size_t k = 0; k < kSsimWindow; ++k) dst[x + k] += taps[k] * v;
        }
    }
    return out;
}

struct SsimFields {
    std::size_t positions = 0;
    double mean = 0.0;
    // Per-window coefficients of dS/dx_k = w_k * (offset + beta * y_k - gamma * x_k).
    std::vector<double> offset, beta, gamma;
};

SsimFields ssim_fields(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                       bool want_gradient) {
    static const auto taps = gaussian_taps();
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = window_filter(x, h, w, taps);
    const auto my = window_filter(y, h, w, taps);
    const auto sxx = window_filter(xx, h, w, taps);
    const auto syy = window_filter(yy, h, w, taps);
    const auto sxy = window_filter(xy, h, w, taps);

    SsimFields f;
    f.positions = mx.size();
    if (want_gradient) {
        f.offset.resize(f.positions);
        f.beta.resize(f.positions);
        f.gamma.resize(f.positions);
    }
    double total = 0.0;
    for (std::size_t p = 0; p < f.positions; ++p) {
        const double vx = sxx[p] - mx[p] * mx[p];
        const double vy = syy[p] - my[p] * my[p];
        const double cxy = sxy[p] - mx[p] * my[p];
        const double a1 = 2.0 * mx[p] * my[p] + kSsimC1;
        const double a2 = 2.0 * cxy + kSsimC2;
        const double b1 = mx[p] * mx[p] + my[p] * my[p] + kSsimC1;
        const double b2 = vx + vy + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (want_gradient) {
            const double alpha = 2.0 * my[p] * a2 / (b1 * b2) - 2.0 * mx[p] * s / b1;
            const double beta = 2.0 * a1 / (b1 * b2);
            const double gamma = 2.0 * s / b2;
            f.offset[p] = alpha - beta * my[p] + gamma * mx[p];
            f.beta[p] = beta;
            f.gamma[p] = gamma;
        }
    }
    f.mean = total / static_cast<double>(f.positions);
    return f;
}

void require_ssim_size(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
}

constexpr std::array<double, 3> kLumaWeights = {0.299, 0.587, 0.114};

}  // namespace

std::vector<double> luminance(const Image& image) {
    std::vector<double> out(image.pixel_count());
    const auto s = image.samples();
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = kLumaWeights[0] * s[p * 3] + kLumaWeights[1] * s[p * 3 + 1] + kLumaWeights[2] * s[p * 3 + 2];
    return out;
}

ErrorMap photometric_error(const Image& rendered, const Image& reference) {
    require_same_shape(rendered, reference, "photometric_error");
    ErrorMap out(rendered.height(), rendered.width());
    const auto a = rendered.samples();
    const auto b = reference.samples();
    auto dst = out.values();
    for (std::size_t p = 0; p < dst.size(); ++p) {
        const double sum = std::abs(a[p * 3] - b[p * 3]) + std::abs(a[p * 3 + 1] - b[p * 3 + 1]) +
                           std::abs(a[p * 3 + 2] - b[p * 3 + 2]);
        dst[p] = sum / 3.0;
    }
    return out;
}

double ssim(const Image& a, const Image& b) {
    require_ssim_size(a, b);
    const auto la = luminance(a);
    const auto lb = luminance(b);
    return ssim_fields(la, lb, a.height(), a.width(), false).mean;
}

double ssim_with_gradient(const Image& a, const Image& b, std::vector<double>& grad_a) {
    require_ssim_size(a, b);
    static const auto taps = gaussian_taps();
    const std::size_t h = a.height();
    const std::size_t w = a.width();
    const auto la = luminance(a);
    const auto lb = luminance(b);
    const auto f = ssim_fields(la, lb, h, w, true);

    const auto offset = window_scatter(f.offset, h, w, taps);
    const auto beta = window_scatter(f.beta, h, w, taps);
    const auto gamma = window_scatter(f.gamma, h, w, taps);
    const double inv_n = 1.0 / static_cast<double>(f.positions);

    grad_a.assign(a.samples().size(), 0.0);
    for (std::size_t p = 0; p < la.size(); ++p) {
        const double dl = (offset[p] + beta[p] * lb[p] - gamma[p] * la[p]) * inv_n;
        for (std::size_t c = 0; c < 3; ++c) grad_a[p * 3 + c] = dl * kLumaWeights[c];
    }
    return f.mean;
}

LossReport mixed_loss(const Image& rendered, const Image& reference, double lambda) {
    require_same_shape(rendered, reference, "mixed_loss");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixed_loss: lambda must lie in [0,1]");

    LossReport r;
    std::vector<double> ssim_grad;
    const double s = ssim_with_gradient(rendered, reference, ssim_grad);

    const auto a = rendered.samples();
    const auto b = reference.samples();
    const double inv_n = 1.0 / static_cast<double>(a.size());
    double l1 = 0.0;
    r.gradient.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        l1 += std::abs(d);
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        r.gradient[i] = (1.0 - lambda) * sign * inv_n - lambda * ssim_grad[i];
    }
    r.l1_part = l1 * inv_n;
    r.ssim_part = 1.0 - s;
    r.total = (1.0 - lambda) * r.l1_part + lambda * r.ssim_part;
    return r;
}

LossReport masked_loss(const Image& rendered, const Image& reference, const PixelMask& mask, double lambda) {
    require_same_shape(rendered, reference, "masked_loss");
    if (mask.height() != rendered.height() || mask.width() != rendered.width())
        throw std::invalid_argument("masked_loss: mask dimension mismatch");

    Image r_masked = rendered;
    Image i_masked = reference;
    const auto m = mask.values();
    auto rs = r_masked.samples();
    auto is = i_masked.samples();
    for (std::size_t p = 0; p < m.size(); ++p) {
        const double mv = m[p] ? 1.0 : 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            rs[p * 3 + c] *= mv;
            is[p * 3 + c] *= mv;
        }
    }
    LossReport report = mixed_loss(r_masked, i_masked, lambda);
    // Chain rule through the mask product.
    for (std::size_t p = 0; p < m.size(); ++p)
        if (!m[p])
            for (std::size_t c = 0; c < 3; ++c) report.gradient[p * 3 + c] = 0.0;
    return report;
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    const auto x = a.samples();
    const auto y = b.samples();
    double se = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - y[i]) * (x[i] - y[i]);
    const double mse = se / static_cast<double>(x.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace hpc
