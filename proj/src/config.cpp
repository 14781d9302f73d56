#include "hpc/config.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hpc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

const std::string* find(const ConfigMap& map, const std::string& key) {
    const auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view expected) {
    throw ConfigError("config key '" + key + "': expected " + std::string(expected) + ", got '" + value + "'");
}

}  // namespace

ConfigMap parse_config(std::string_view text, std::string_view origin) {
    ConfigMap out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const std::string_view key = eq == std::string_view::npos ? std::string_view{} : trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
        out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

ConfigMap read_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string format_config(const ConfigMap& map) {
    std::string out;
    for (const auto& [k, v] : map) out += k + "=" + v + "\n";
    return out;
}

void write_config(const ConfigMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open file for writing");
    out << format_config(map);
    if (!out.flush()) throw IoError(path.string() + ": write failed");
}

void overlay(ConfigMap& base, const ConfigMap& top) {
    for (const auto& [k, v] : top) base[k] = v;
}

std::string format_exact(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string format_csv(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 6);
    return std::string(buf.data(), res.ptr);
}

std::uint32_t crc32_of_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    uLong crc = crc32(0L, Z_NULL, 0);
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        const auto got = in.gcount();
        if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    }
    return static_cast<std::uint32_t>(crc);
}

std::string crc32_hex(std::uint32_t crc) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc);
    return buf;
}

std::size_t get_count(const ConfigMap& map, const std::string& key, std::size_t fallback) {
    const std::string* s = find(map, key);
    if (!s) return fallback;
    unsigned long long v = 0;
    const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (s->empty() || res.ec != std::errc{} || res.ptr != s->data() + s->size()) bad_value(key, *s, "a non-negative integer");
    return static_cast<std::size_t>(v);
}

double get_real(const ConfigMap& map, const std::string& key, double fallback) {
    const std::string* s = find(map, key);
    if (!s) return fallback;
    double v = 0.0;
    const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (s->empty() || res.ec != std::errc{} || res.ptr != s->data() + s->size() || !std::isfinite(v))
        bad_value(key, *s, "a finite real number");
    return v;
}

bool get_flag(const ConfigMap& map, const std::string& key, bool fallback) {
    const std::string* s = find(map, key);
    if (!s) return fallback;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    bad_value(key, *s, "true or false");
}

std::uint64_t get_seed(const ConfigMap& map, const std::string& key, std::uint64_t fallback) {
    const std::string* s = find(map, key);
    if (!s) return fallback;
    std::uint64_t v = 0;
    const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (s->empty() || res.ec != std::errc{} || res.ptr != s->data() + s->size()) bad_value(key, *s, "an unsigned 64-bit integer");
    return v;
}

const std::vector<std::string>& scene_config_keys() {
    static const std::vector<std::string> keys = {
        "height", "width", "num_views", "distractor_view_fraction", "distractors_min", "distractors_max",
        "distractor_size_min", "distractor_size_max", "noise_sigma", "seed", "hard_mode"};
    return keys;
}

ConfigMap to_config(const SceneConfig& c) {
    return {
        {"height", std::to_string(c.height)},
        {"width", std::to_string(c.width)},
        {"num_views", std::to_string(c.num_views)},
        {"distractor_view_fraction", format_exact(c.distractor_view_fraction)},
        {"distractors_min", std::to_string(c.distractors_min)},
        {"distractors_max", std::to_string(c.distractors_max)},
        {"distractor_size_min", std::to_string(c.distractor_size_min)},
        {"distractor_size_max", std::to_string(c.distractor_size_max)},
        {"noise_sigma", format_exact(c.noise_sigma)},
        {"seed", std::to_string(c.seed)},
        {"hard_mode", c.hard_mode ? "true" : "false"},
    };
}

SceneConfig scene_config_from(const ConfigMap& m, SceneConfig c) {
    c.height = get_count(m, "height", c.height);
    c.width = get_count(m, "width", c.width);
    c.num_views = get_count(m, "num_views", c.num_views);
    c.distractor_view_fraction = get_real(m, "distractor_view_fraction", c.distractor_view_fraction);
    c.distractors_min = get_count(m, "distractors_min", c.distractors_min);
    c.distractors_max = get_count(m, "distractors_max", c.distractors_max);
    c.distractor_size_min = get_count(m, "distractor_size_min", c.distractor_size_min);
    c.distractor_size_max = get_count(m, "distractor_size_max", c.distractor_size_max);
    c.noise_sigma = get_real(m, "noise_sigma", c.noise_sigma);
    c.seed = get_seed(m, "seed", c.seed);
    c.hard_mode = get_flag(m, "hard_mode", c.hard_mode);
    return c;
}

const std::vector<std::string>& train_config_keys() {
    static const std::vector<std::string> keys = {
        "steps", "learning_rate", "lambda", "patch_size", "warmup_steps", "mask_update_interval",
        "metric_mode", "feature_source", "feature_levels", "percentile_level", "em_tolerance",
        "em_max_iterations", "em_variance_floor", "log_interval", "seed"};
    return keys;
}

ConfigMap to_config(const TrainConfig& c) {
    return {
        {"steps", std::to_string(c.steps)},
        {"learning_rate", format_exact(c.learning_rate)},
        {"lambda", format_exact(c.lambda)},
        {"patch_size", std::to_string(c.patch_size)},
        {"warmup_steps", std::to_string(c.warmup_steps)},
        {"mask_update_interval", std::to_string(c.mask_update_interval)},
        {"metric_mode", std::string(to_string(c.metric_mode))},
        {"feature_source", std::string(to_string(c.feature_source))},
        {"feature_levels", std::to_string(c.feature_levels)},
        {"percentile_level", format_exact(c.percentile_level)},
        {"em_tolerance", format_exact(c.em.tolerance)},
        {"em_max_iterations", std::to_string(c.em.max_iterations)},
        {"em_variance_floor", format_exact(c.em.variance_floor)},
        {"log_interval", std::to_string(c.log_interval)},
        {"seed", std::to_string(c.seed)},
    };
}

TrainConfig train_config_from(const ConfigMap& m, TrainConfig c) {
    c.steps = get_count(m, "steps", c.steps);
    c.learning_rate = get_real(m, "learning_rate", c.learning_rate);
    c.lambda = get_real(m, "lambda", c.lambda);
    c.patch_size = get_count(m, "patch_size", c.patch_size);
    c.warmup_steps = get_count(m, "warmup_steps", c.warmup_steps);
    c.mask_update_interval = get_count(m, "mask_update_interval", c.mask_update_interval);
    if (const std::string* s = find(m, "metric_mode")) {
        const auto mode = parse_metric_mode(*s);
        if (!mode) bad_value("metric_mode", *s, "photometric-gmm, perceptual-gmm, perceptual-percentile, dual-gmm or hybrid");
        c.metric_mode = *mode;
    }
    if (const std::string* s = find(m, "feature_source")) {
        const auto src = parse_feature_source(*s);
        if (!src) bad_value("feature_source", *s, "builtin or fstk");
        c.feature_source = *src;
    }
    c.feature_levels = get_count(m, "feature_levels", c.feature_levels);
    c.percentile_level = get_real(m, "percentile_level", c.percentile_level);
    c.em.tolerance = get_real(m, "em_tolerance", c.em.tolerance);
    c.em.max_iterations = get_count(m, "em_max_iterations", c.em.max_iterations);
    c.em.variance_floor = get_real(m, "em_variance_floor", c.em.variance_floor);
    c.log_interval = get_count(m, "log_interval", c.log_interval);
    c.seed = get_seed(m, "seed", c.seed);
    return c;
}

}  // namespace hpc
