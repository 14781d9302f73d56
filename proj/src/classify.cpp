#include "hpc/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hpc {

namespace {

double log_normal(double x, double mu, double sigma2) {
    const double d = x - mu;
    return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - d * d / (2.0 * sigma2);
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void require_grids_match(std::span<const PatchErrors> a, std::span<const PatchErrors> b) {
    if (a.size() != b.size()) throw std::invalid_argument("hybrid: image count mismatch between metrics");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i].grid == b[i].grid)) throw std::invalid_argument("hybrid: patch grid mismatch for image " + std::to_string(i));
}

std::vector<PatchMask> intersect(std::span<const PatchMask> a, std::span<const PatchMask> b) {
    std::vector<PatchMask> out(a.begin(), a.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out[i].values.size(); ++j) out[i].values[j] = a[i].values[j] && b[i].values[j];
    return out;
}

std::vector<PatchMask> gmm_masks(std::span<const PatchErrors> errors, const EmSettings& em, GmmDecision rule,
                                 GmmParams* fitted = nullptr) {
    const PooledErrors pool = pool_errors(errors);
    GmmParams gmm;
    if (pool.values.size() < kMinGmmSamples) {
        // Too few patches to separate two components (a coarse grid on a small image): keep everything.
        gmm.degenerate = true;
    } else {
        gmm = fit_gmm(pool, em);
    }
    std::vector<PatchMask> masks;
    masks.reserve(errors.size());
    for (const auto& e : errors) masks.push_back(classify_gmm(e, gmm, rule));
    if (fitted) *fitted = std::move(gmm);
    return masks;
}

std::vector<PatchMask> percentile_masks(std::span<const PatchErrors> errors, double level, double* threshold_out = nullptr) {
    const PooledErrors pool = pool_errors(errors);
    const double threshold = percentile_threshold(pool, level);
    std::vector<PatchMask> masks;
    masks.reserve(errors.size());
    for (const auto& e : errors) masks.push_back(classify_percentile(e, threshold));
    if (threshold_out) *threshold_out = threshold;
    return masks;
}

}  // namespace

PooledErrors pool_errors(std::span<const PatchErrors> per_image) {
    PooledErrors pool;
    pool.offsets.push_back(0);
    for (const auto& e : per_image) {
        pool.values.insert(pool.values.end(), e.values.begin(), e.values.end());
        pool.offsets.push_back(pool.values.size());
    }
    return pool;
}

std::size_t nearest_rank(double fraction, std::size_t n) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("percentile fraction must lie in [0,1]");
    const double r = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(r));
    // T * n that should be an integer k may round to k + ulp.
    if (k >= 1 && r - static_cast<double>(k - 1) <= 1e-9 * std::max(1.0, r)) --k;
    return std::min(k, n);
}

double percentile_threshold(std::span<const double> pool, double fraction) {
    if (pool.empty()) throw std::invalid_argument("percentile_threshold: empty pool");
    const std::size_t k = nearest_rank(fraction, pool.size());
    if (k == 0) return kNoPassThreshold;
    std::vector<double> work(pool.begin(), pool.end());
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
    return work[k - 1];
}

PatchMask classify_percentile(const PatchErrors& errors, double threshold) {
    PatchMask m{errors.grid, std::vector<std::uint8_t>(errors.values.size())};
    for (std::size_t j = 0; j < errors.values.size(); ++j) m.values[j] = errors.values[j] <= threshold ? 1 : 0;
    return m;
}

GmmParams fit_gmm(std::span<const double> pool, const EmSettings& settings) {
    if (pool.size() < kMinGmmSamples)
        throw std::invalid_argument("fit_gmm: need at least " + std::to_string(kMinGmmSamples) + " samples, got " +
                                    std::to_string(pool.size()));
    const std::size_t n = pool.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    double mean = 0.0;
    for (double x : pool) mean += x;
    mean *= inv_n;
    double var = 0.0;
    for (double x : pool) var += (x - mean) * (x - mean);
    var *= inv_n;

    GmmParams g;
    g.mu = {percentile_threshold(pool, 0.25), percentile_threshold(pool, 0.75)};
    g.sigma2 = {std::max(var, settings.variance_floor), std::max(var, settings.variance_floor)};
    g.beta = {0.5, 0.5};

    std::vector<double> resp(n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (;;) {
        // E-step at the current parameters.
        const double lb0 = std::log(g.beta[0]);
        const double lb1 = std::log(g.beta[1]);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = lb0 + log_normal(pool[i], g.mu[0], g.sigma2[0]);
            const double l1 = lb1 + log_normal(pool[i], g.mu[1], g.sigma2[1]);
            const double lse = log_sum_exp(l0, l1);
            ll += lse;
            resp[i] = std::exp(l0 - lse);
        }
        ll *= inv_n;
        g.log_likelihood_trace.push_back(ll);
        if (ll - prev_ll < settings.tolerance) {
            g.converged = true;
            break;
        }
        if (g.iterations >= settings.max_iterations) break;
        prev_ll = ll;

        // M-step.
        double n0 = 0.0, n1 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            n0 += resp[i];
            n1 += 1.0 - resp[i];
            s0 += resp[i] * pool[i];
            s1 += (1.0 - resp[i]) * pool[i];
        }
        if (n0 <= 0.0 || n1 <= 0.0) {
            // One component has absorbed every sample; nothing left to re-estimate.
            g.converged = true;
            break;
        }
        g.mu = {s0 / n0, s1 / n1};
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = pool[i] - g.mu[0];
            const double d1 = pool[i] - g.mu[1];
            v0 += resp[i] * d0 * d0;
            v1 += (1.0 - resp[i]) * d1 * d1;
        }
        g.sigma2 = {std::max(v0 / n0, settings.variance_floor), std::max(v1 / n1, settings.variance_floor)};
        g.beta = {n0 * inv_n, n1 * inv_n};
        ++g.iterations;
    }

    g.final_log_likelihood = g.log_likelihood_trace.back();
    if (g.mu[0] > g.mu[1]) {
        std::swap(g.mu[0], g.mu[1]);
        std::swap(g.sigma2[0], g.sigma2[1]);
        std::swap(g.beta[0], g.beta[1]);
    }
    g.degenerate = std::abs(g.mu[1] - g.mu[0]) < 1e-3 * (g.mu[1] + g.mu[0] + 1e-12) || g.beta[0] < 1e-3 ||
                   g.beta[1] < 1e-3;
    return g;
}

double static_log_odds(double error, const GmmParams& gmm) {
    const double l0 = std::log(gmm.beta[0]) + log_normal(error, gmm.mu[0], gmm.sigma2[0]);
    const double l1 = std::log(gmm.beta[1]) + log_normal(error, gmm.mu[1], gmm.sigma2[1]);
    return l0 - l1;
}

PatchMask classify_gmm(const PatchErrors& errors, const GmmParams& gmm, GmmDecision rule) {
    PatchMask m{errors.grid, std::vector<std::uint8_t>(errors.values.size(), 1)};
    if (gmm.degenerate) return m;
    const bool tail_static = rule == GmmDecision::PosteriorLowerTailStatic;
    for (std::size_t j = 0; j < errors.values.size(); ++j) {
        const double e = errors.values[j];
        m.values[j] = (tail_static && e <= gmm.mu[0]) || static_log_odds(e, gmm) >= 0.0 ? 1 : 0;
    }
    return m;
}

double static_proportion(std::span<const PatchMask> masks) {
    if (masks.empty()) throw std::invalid_argument("static_proportion: empty mask list");
    std::size_t stat = 0, total = 0;
    for (const auto& m : masks) {
        stat += m.static_count();
        total += m.values.size();
    }
    if (total == 0) throw std::invalid_argument("static_proportion: masks have no patches");
    return static_cast<double>(stat) / static_cast<double>(total);
}

HybridResult hybrid_classify(std::span<const PatchErrors> photo_errors, std::span<const PatchErrors> percep_errors,
                             const EmSettings& settings, GmmDecision rule) {
    if (photo_errors.empty()) throw std::invalid_argument("hybrid: empty image list");
    require_grids_match(photo_errors, percep_errors);

    HybridResult r;
    r.photometric = gmm_masks(photo_errors, settings, rule, &r.gmm);
    r.photometric_static_proportion = static_proportion(r.photometric);
    r.perceptual = percentile_masks(percep_errors, r.photometric_static_proportion, &r.perceptual_threshold);
    r.combined = intersect(r.photometric, r.perceptual);
    return r;
}

std::vector<PatchMask> hybrid_masks(std::span<const PatchErrors> photo_errors,
                                    std::span<const PatchErrors> percep_errors, const EmSettings& settings,
                                    GmmDecision rule) {
    return hybrid_classify(photo_errors, percep_errors, settings, rule).combined;
}

std::string_view to_string(MetricMode mode) {
    switch (mode) {
        case MetricMode::PhotometricGmm: return "photometric-gmm";
        case MetricMode::PerceptualGmm: return "perceptual-gmm";
        case MetricMode::PerceptualPercentile: return "perceptual-percentile";
        case MetricMode::DualGmm: return "dual-gmm";
        case MetricMode::Hybrid: return "hybrid";
    }
    return "unknown";
}

std::optional<MetricMode> parse_metric_mode(std::string_view text) {
    for (auto m : {MetricMode::PhotometricGmm, MetricMode::PerceptualGmm, MetricMode::PerceptualPercentile,
                   MetricMode::DualGmm, MetricMode::Hybrid})
        if (to_string(m) == text) return m;
    return std::nullopt;
}

bool needs_perceptual(MetricMode mode) { return mode != MetricMode::PhotometricGmm; }

bool needs_photometric(MetricMode mode) {
    return mode == MetricMode::PhotometricGmm || mode == MetricMode::DualGmm || mode == MetricMode::Hybrid;
}

std::vector<PatchMask> classify_patches(std::span<const PatchErrors> photo_errors,
                                        std::span<const PatchErrors> percep_errors, const ClassifyOptions& options) {
    switch (options.mode) {
        case MetricMode::PhotometricGmm: return gmm_masks(photo_errors, options.em, options.gmm_rule);
        case MetricMode::PerceptualGmm: return gmm_masks(percep_errors, options.em, options.gmm_rule);
        case MetricMode::PerceptualPercentile: return percentile_masks(percep_errors, options.percentile_level);
        case MetricMode::DualGmm: {
            require_grids_match(photo_errors, percep_errors);
            const auto a = gmm_masks(photo_errors, options.em, options.gmm_rule);
            const auto b = gmm_masks(percep_errors, options.em, options.gmm_rule);
            return intersect(a, b);
        }
        case MetricMode::Hybrid: return hybrid_masks(photo_errors, percep_errors, options.em, options.gmm_rule);
    }
    throw std::logic_error("classify_patches: unknown mode");
}

}  // namespace hpc
