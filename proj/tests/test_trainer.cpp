#include "hpc/synth.hpp"
#include "hpc/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace hpc;
using testing::random_image;
using testing::random_mask;

namespace {

SceneConfig small_scene() {
    SceneConfig c;
    c.height = 64;
    c.width = 64;
    c.num_views = 10;
    c.distractor_size_min = 12;
    c.distractor_size_max = 28;
    return c;
}

TrainConfig quick_train(MetricMode mode = MetricMode::Hybrid) {
    TrainConfig t;
    t.steps = 300;
    t.warmup_steps = 100;
    t.mask_update_interval = 50;
    t.metric_mode = mode;
    return t;
}

std::vector<PatchMask> patch_masks(const std::vector<Image>& views, const Image& estimate, const TrainConfig& t) {
    return update_masks(PixelModel{estimate}, views, t).patches;
}

}  // namespace

TEST_CASE("init_model: single view, pair mean, accumulation oracle, errors") {
    CounterRng rng(1);
    const Image a = random_image(5, 4, rng), b = random_image(5, 4, rng);
    CHECK(init_model(std::vector{a}).estimate == a);

    const PixelModel pair = init_model(std::vector{a, b});
    for (std::size_t i = 0; i < a.samples().size(); ++i)
        CHECK(pair.estimate.samples()[i] == doctest::Approx((a.samples()[i] + b.samples()[i]) / 2).epsilon(1e-15));

    std::vector<Image> views;
    for (int i = 0; i < 7; ++i) views.push_back(random_image(5, 4, rng));
    const PixelModel m = init_model(views);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double sum = 0;
                for (const auto& v : views) sum += v.at(y, x, c);
                CHECK(m.estimate.at(y, x, c) == doctest::Approx(sum / 7).epsilon(1e-14));
            }

    CHECK_THROWS_AS(init_model(std::vector<Image>{}), std::invalid_argument);
    CHECK_THROWS_AS(init_model(std::vector{a, Image(4, 5)}), std::invalid_argument);
}

TEST_CASE("render is the identity and moves by exactly lr x gradient") {
    CounterRng rng(2);
    PixelModel m{random_image(16, 16, rng)};
    const Image first = render(m, 0, 3);
    CHECK(first == m.estimate);
    CHECK(render(m, 2, 3) == first);
    CHECK_THROWS_AS(render(m, 3, 3), std::out_of_range);

    const Image view = random_image(16, 16, rng);
    TrainConfig t;
    t.learning_rate = 7.5;
    const PixelMask mask = random_mask(16, 16, rng, 0.7);
    const LossReport oracle = masked_loss(first, view, mask, t.lambda);
    gradient_step(m, view, mask, t);
    const Image after = render(m, 1, 3);
    for (std::size_t i = 0; i < first.samples().size(); ++i)
        CHECK(after.samples()[i] == first.samples()[i] - t.learning_rate * oracle.gradient[i]);
}

TEST_CASE("update_masks: views equal to the model are all static") {
    SceneConfig c = small_scene();
    c.noise_sigma = 0.0;
    c.distractor_view_fraction = 0.0;
    const SyntheticScene s = generate_scene(c);
    for (auto mode : {MetricMode::PhotometricGmm, MetricMode::PerceptualGmm, MetricMode::Hybrid}) {
        const MaskSet set = update_masks(PixelModel{s.clean}, s.views, quick_train(mode));
        CHECK(set.static_fraction() == 1.0);
    }
}

TEST_CASE("update_masks: a planted block becomes exactly its patches") {
    const std::size_t H = 64, W = 64;
    CounterRng rng(3);
    const Image base = random_image(H, W, rng, 0.2, 0.5);
    std::vector<Image> views;
    for (int v = 0; v < 4; ++v) {
        Image img = base;
        for (auto& s : img.samples()) s += rng.uniform(-0.002, 0.002);
        views.push_back(img);
    }
    // Rows 16..47, cols 0..31: patches (1,0), (1,1), (2,0), (2,1) of view 2.
    for (std::size_t y = 16; y < 48; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            for (std::size_t ch = 0; ch < 3; ++ch) views[2].at(y, x, ch) += 0.45;

    TrainConfig t = quick_train(MetricMode::PhotometricGmm);
    const auto masks = patch_masks(views, base, t);
    for (std::size_t v = 0; v < 4; ++v)
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t col = 0; col < 4; ++col) {
                const bool planted = v == 2 && (r == 1 || r == 2) && col < 2;
                CHECK(masks[v].values[r * 4 + col] == (planted ? 0 : 1));
            }
}

TEST_CASE("update_masks: hybrid equals photometric GMM intersected with the guided percentile") {
    const SyntheticScene s = generate_scene(small_scene());
    const Image estimate = init_model(s.views).estimate;
    TrainConfig t = quick_train(MetricMode::PhotometricGmm);
    const auto photo = patch_masks(s.views, estimate, t);
    t.metric_mode = MetricMode::PerceptualPercentile;
    t.percentile_level = static_proportion(photo);
    const auto percep = patch_masks(s.views, estimate, t);
    t.metric_mode = MetricMode::Hybrid;
    const auto hybrid = patch_masks(s.views, estimate, t);
    for (std::size_t v = 0; v < hybrid.size(); ++v)
        for (std::size_t j = 0; j < hybrid[v].values.size(); ++j) {
            CHECK(hybrid[v].values[j] <= photo[v].values[j]);
            CHECK(hybrid[v].values[j] <= percep[v].values[j]);
            CHECK(hybrid[v].values[j] == (photo[v].values[j] & percep[v].values[j]));
        }
}

TEST_CASE("train: zero steps leaves the initial model") {
    const SyntheticScene s = generate_scene(small_scene());
    TrainConfig t = quick_train();
    t.steps = 0;
    const TrainResult r = train(s.views, t, s.clean);
    CHECK(r.model.estimate == init_model(s.views).estimate);
    CHECK(r.history.rows.empty());
    CHECK(r.history.mask_update_steps.empty());
    for (const auto& m : r.masks) CHECK(m.all_static());
}

TEST_CASE("train: distractor-free noise-free scene converges to clean") {
    SceneConfig c = small_scene();
    c.noise_sigma = 0.0;
    c.distractor_view_fraction = 0.0;
    const SyntheticScene s = generate_scene(c);
    // Fixed-step L1 descent jitters by lr * (1 - lambda) / (3HW) around the optimum: 6.5e-4 here.
    TrainConfig t = quick_train();
    t.learning_rate = 10.0;
    const TrainResult r = train(s.views, t, s.clean);
    for (std::size_t i = 0; i < s.clean.samples().size(); ++i)
        CHECK(std::abs(r.model.estimate.samples()[i] - s.clean.samples()[i]) <= 1e-3);
}

TEST_CASE("train: gradient descent lowers the loss against a fixed target") {
    CounterRng rng(4);
    const Image target = random_image(32, 32, rng);
    PixelModel m{random_image(32, 32, rng)};
    TrainConfig t;
    t.learning_rate = 5.0;
    const PixelMask ones(32, 32, 1);
    const double before = masked_loss(m.estimate, target, ones, t.lambda).total;
    for (int i = 0; i < 100; ++i) gradient_step(m, target, ones, t);
    const double after = masked_loss(m.estimate, target, ones, t.lambda).total;
    CHECK(after < 0.5 * before);
}

TEST_CASE("train: schedule, warmup fraction, history rows and determinism") {
    const SyntheticScene s = generate_scene(small_scene());
    TrainConfig t = quick_train();
    t.steps = 333;
    t.warmup_steps = 120;
    t.mask_update_interval = 70;
    t.log_interval = 7;
    const TrainResult a = train(s.views, t, s.clean);
    CHECK(a.history.mask_update_steps == std::vector<std::size_t>{120, 190, 260, 330});
    CHECK(a.history.rows.size() == (333 + 6) / 7);
    for (std::size_t i = 0; i < a.history.rows.size(); ++i) {
        const auto& row = a.history.rows[i];
        CHECK(row.step == 7 * i);
        if (i > 0) CHECK(row.step > a.history.rows[i - 1].step);
        if (row.step < 120) CHECK(row.static_fraction == 1.0);
        CHECK(std::isfinite(row.psnr));
    }

    const TrainResult b = train(s.views, t, s.clean);
    CHECK(a.model.estimate == b.model.estimate);
    CHECK(a.masks == b.masks);
    REQUIRE(a.history.rows.size() == b.history.rows.size());
    for (std::size_t i = 0; i < a.history.rows.size(); ++i) {
        CHECK(a.history.rows[i].loss == b.history.rows[i].loss);
        CHECK(a.history.rows[i].static_fraction == b.history.rows[i].static_fraction);
    }

    const TrainResult no_clean = train(s.views, t);
    CHECK(std::isnan(no_clean.history.rows[0].psnr));
}

TEST_CASE("train: warmup past the budget never applies a mask") {
    const SyntheticScene s = generate_scene(small_scene());
    TrainConfig t = quick_train();
    t.steps = 50;
    t.warmup_steps = 80;
    const TrainResult r = train(s.views, t, s.clean);
    CHECK(r.history.mask_update_steps.empty());
    for (const auto& m : r.masks) CHECK(m.all_static());
    for (const auto& row : r.history.rows) CHECK(row.static_fraction == 1.0);
}

TEST_CASE("masked-out pixels of the selected view get no L1 gradient") {
    CounterRng rng(5);
    const Image est = random_image(24, 24, rng), view = random_image(24, 24, rng);
    const PixelMask mask = random_mask(24, 24, rng, 0.5);
    TrainConfig t;
    t.lambda = 0.0;
    const LossReport r = masked_loss(est, view, mask, t.lambda);
    for (std::size_t y = 0; y < 24; ++y)
        for (std::size_t x = 0; x < 24; ++x)
            if (!mask.at(y, x))
                for (std::size_t c = 0; c < 3; ++c) CHECK(r.gradient[(y * 24 + x) * 3 + c] == 0.0);
}

TEST_CASE("standard scene: hybrid static fraction sits inside the sanity band") {
    const SyntheticScene s = generate_scene(SceneConfig{});
    const TrainResult r = train(s.views, TrainConfig{}, s.clean);
    std::size_t stat = 0, total = 0;
    for (const auto& m : s.gt_static_masks) {
        stat += m.static_count();
        total += m.pixel_count();
    }
    const double truth = static_cast<double>(stat) / static_cast<double>(total);
    const double fraction = r.history.rows.back().static_fraction;
    CHECK(fraction < 1.0);
    CHECK(fraction > truth - 0.1);
}

TEST_CASE("evaluate: perfect model, all-static prediction, count oracle") {
    const SyntheticScene s = generate_scene(small_scene());
    const EvalMetrics perfect = evaluate(PixelModel{s.clean}, s.clean, s.gt_static_masks, s.gt_static_masks);
    CHECK(perfect.psnr == 99.0);
    CHECK(perfect.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.mask_iou == 1.0);

    const std::vector<PixelMask> all_static(s.views.size(), PixelMask(64, 64, 1));
    for (std::size_t v : s.corrupted_views) CHECK(transient_iou(all_static[v], s.gt_static_masks[v]) == 0.0);
    const EvalMetrics none = evaluate(PixelModel{s.clean}, s.clean, all_static, s.gt_static_masks);
    const double clean_views = static_cast<double>(s.views.size() - s.corrupted_views.size());
    CHECK(none.mask_iou == doctest::Approx(clean_views / static_cast<double>(s.views.size())));
    CHECK(none.static_fraction == 1.0);

    CounterRng rng(6);
    std::vector<PixelMask> pred;
    double oracle = 0;
    std::size_t stat = 0;
    for (std::size_t v = 0; v < s.views.size(); ++v) {
        pred.push_back(random_mask(64, 64, rng, 0.8));
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < 64 * 64; ++i) {
            const bool p = pred[v].values()[i] == 0, g = s.gt_static_masks[v].values()[i] == 0;
            inter += p && g;
            uni += p || g;
            stat += !p;
        }
        oracle += uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
    }
    const EvalMetrics r = evaluate(PixelModel{s.clean}, s.clean, pred, s.gt_static_masks);
    CHECK(r.mask_iou == doctest::Approx(oracle / static_cast<double>(s.views.size())).epsilon(1e-12));
    CHECK(r.static_fraction == doctest::Approx(static_cast<double>(stat) / (64.0 * 64.0 * s.views.size())));

    CHECK_THROWS_AS(evaluate(PixelModel{s.clean}, Image(32, 32), s.gt_static_masks, s.gt_static_masks),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate(PixelModel{s.clean}, s.clean, all_static, std::vector<PixelMask>{}),
                    std::invalid_argument);
}

TEST_CASE("train rejects invalid configs and missing feature stacks") {
    const SyntheticScene s = generate_scene(small_scene());
    auto bad = [&](auto tweak) {
        TrainConfig t = quick_train();
        tweak(t);
        CHECK_THROWS_AS(train(s.views, t), ConfigError);
    };
    bad([](TrainConfig& t) { t.learning_rate = 0.0; });
    bad([](TrainConfig& t) { t.lambda = 1.5; });
    bad([](TrainConfig& t) { t.patch_size = 0; });
    bad([](TrainConfig& t) { t.mask_update_interval = 0; });
    bad([](TrainConfig& t) { t.log_interval = 0; });
    bad([](TrainConfig& t) { t.percentile_level = 2.0; });
    bad([](TrainConfig& t) { t.em.max_iterations = 0; });

    TrainConfig t = quick_train();
    t.feature_source = FeatureSource::Fstk;
    CHECK_THROWS_AS(train(s.views, t), std::invalid_argument);
    CHECK_THROWS_AS(train(std::vector{s.views[0]}, quick_train()), std::invalid_argument);
}
