#pragma once

#include "hpc/patching.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hpc {

/// All patch errors of an image set, concatenated in image order.
struct PooledErrors {
    std::vector<double> values;
    /// offsets[i] is the first index of image i; offsets.back() == values.size().
    std::vector<std::size_t> offsets;

    std::size_t image_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

PooledErrors pool_errors(std::span<const PatchErrors> per_image);

struct EmSettings {
    double tolerance = 1e-8;  ///< stop when the mean log-likelihood gains less than this
    std::size_t max_iterations = 200;
    double variance_floor = 1e-8;
};

/// Two-component 1-D Gaussian mixture; component 0 has the lower mean (static).
struct GmmParams {
    std::array<double, 2> beta{0.5, 0.5};
    std::array<double, 2> mu{0.0, 0.0};
    std::array<double, 2> sigma2{1.0, 1.0};
    bool converged = false;
    bool degenerate = false;
    std::size_t iterations = 0;
    /// Mean per-sample log-likelihood at the returned parameters.
    double final_log_likelihood = 0.0;
    /// Mean per-sample log-likelihood evaluated before every M-step and at the end.
    std::vector<double> log_likelihood_trace;
};

/// Sentinel returned for T = 0: no finite error passes `<=`.
inline constexpr double kNoPassThreshold = -std::numeric_limits<double>::infinity();

/// 1-based nearest rank ceil(T * n), tolerant of rounding in T * n.
std::size_t nearest_rank(double fraction, std::size_t n);

double percentile_threshold(std::span<const double> pool, double fraction);
inline double percentile_threshold(const PooledErrors& pool, double fraction) {
    return percentile_threshold(pool.values, fraction);
}

PatchMask classify_percentile(const PatchErrors& errors, double threshold);

inline constexpr std::size_t kMinGmmSamples = 8;

GmmParams fit_gmm(std::span<const double> pool, const EmSettings& settings = {});
inline GmmParams fit_gmm(const PooledErrors& pool, const EmSettings& settings = {}) {
    return fit_gmm(pool.values, settings);
}

/// log(beta_0 N_0(x)) - log(beta_1 N_1(x)); the patch is static when this is >= 0.
double static_log_odds(double error, const GmmParams& gmm);

/// How the mixture posterior becomes a static/transient decision.
enum class GmmDecision {
    /// Static iff the posterior of the lower-mean component is >= 0.5.
    Posterior,
    /// As Posterior, but errors at or below the static mean are always static. With
    /// unequal variances the raw posterior also rejects the far lower tail.
    PosteriorLowerTailStatic,
};

PatchMask classify_gmm(const PatchErrors& errors, const GmmParams& gmm, GmmDecision rule = GmmDecision::Posterior);

double static_proportion(std::span<const PatchMask> masks);

struct HybridResult {
    std::vector<PatchMask> photometric;   ///< GMM decisions on photometric errors
    std::vector<PatchMask> perceptual;    ///< percentile decisions on perceptual errors
    std::vector<PatchMask> combined;      ///< intersection of the two
    GmmParams gmm;
    double photometric_static_proportion = 1.0;
    double perceptual_threshold = 0.0;
};

HybridResult hybrid_classify(std::span<const PatchErrors> photo_errors, std::span<const PatchErrors> percep_errors,
                             const EmSettings& settings = {}, GmmDecision rule = GmmDecision::Posterior);

std::vector<PatchMask> hybrid_masks(std::span<const PatchErrors> photo_errors,
                                    std::span<const PatchErrors> percep_errors, const EmSettings& settings = {},
                                    GmmDecision rule = GmmDecision::Posterior);

/// Which error metric(s) and classifier produce the static maps.
enum class MetricMode {
    PhotometricGmm,        ///< GMM on photometric errors
    PerceptualGmm,         ///< GMM on perceptual errors
    PerceptualPercentile,  ///< fixed-level percentile on perceptual errors
    DualGmm,               ///< intersection of GMM on both metrics
    Hybrid,                ///< photometric GMM guides the perceptual percentile
};

std::string_view to_string(MetricMode mode);
std::optional<MetricMode> parse_metric_mode(std::string_view text);
bool needs_perceptual(MetricMode mode);
bool needs_photometric(MetricMode mode);

struct ClassifyOptions {
    MetricMode mode = MetricMode::Hybrid;
    EmSettings em;
    GmmDecision gmm_rule = GmmDecision::PosteriorLowerTailStatic;
    /// Static level used by PerceptualPercentile.
    double percentile_level = 0.8;
};

/// Runs the configured mode over pooled per-image errors. Unused inputs may be empty.
std::vector<PatchMask> classify_patches(std::span<const PatchErrors> photo_errors,
                                        std::span<const PatchErrors> percep_errors, const ClassifyOptions& options);

}  // namespace hpc
