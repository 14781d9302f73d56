#include "hpc/cli.hpp"

#include "hpc/imagery.hpp"
#include "hpc/synth.hpp"
#include "hpc/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace hpc {

namespace {

// Missing or inconsistent inputs; reported like a bad configuration.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Keys = std::vector<std::string>;

Keys join(Keys a, const Keys& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::string numbered(std::string_view prefix, std::size_t i, std::string_view ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return std::string(prefix) + buf + std::string(ext);
}

bool is_metadata(const std::string& key) {
    return key == "command" || key == "tool_version" || key.starts_with("artifact.") || key.starts_with("input.");
}

// Config file first, explicit settings on top; manifest bookkeeping keys are dropped.
ConfigMap resolve(const ConfigMap& args, const Keys& allowed) {
    ConfigMap m;
    if (const auto it = args.find("config"); it != args.end()) {
        if (!fs::is_regular_file(it->second)) throw InputError("config file not found: " + it->second);
        m = read_config(it->second);
    }
    for (const auto& [k, v] : args)
        if (k != "config") m[k] = v;
    std::erase_if(m, [](const auto& kv) { return is_metadata(kv.first); });
    for (const auto& [k, v] : m)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("unknown setting '" + k + "'");
    return m;
}

std::string require(const ConfigMap& m, const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end() || it->second.empty()) throw ConfigError("missing required setting --" + key);
    return it->second;
}

std::optional<std::string> lookup(const ConfigMap& m, const std::string& key) {
    const auto it = m.find(key);
    if (it == m.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": cannot create directory (" + ec.message() + ")");
}

void remove_stale(const fs::path& file) {
    std::error_code ec;
    fs::remove(file, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path.string() + ": cannot open file for writing");
    f << text;
    if (!f.flush()) throw IoError(path.string() + ": write failed");
}

void record(ConfigMap& manifest, const fs::path& dir, const std::string& name) {
    manifest["artifact." + name] = crc32_hex(crc32_of_file(dir / name));
}

int guarded(std::ostream& err, std::string_view command, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "hpc " << command << ": invalid configuration: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const InputError& e) {
        err << "hpc " << command << ": " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        err << "hpc " << command << ": " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "hpc " << command << ": " << e.what() << "\n";
        return kExitIo;
    }
}

struct LoadedScene {
    fs::path manifest_path;
    ConfigMap manifest;
    std::vector<Image> views;
    std::optional<Image> clean;
    std::vector<PixelMask> gt_masks;
};

LoadedScene load_scene(const fs::path& manifest_path, bool need_truth) {
    if (!fs::is_regular_file(manifest_path)) throw InputError("scene manifest not found: " + manifest_path.string());
    LoadedScene s;
    s.manifest_path = manifest_path;
    s.manifest = read_config(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    const std::size_t n = get_count(s.manifest, "num_views", 0);
    if (n == 0) throw InputError(manifest_path.string() + ": manifest lists no views");
    for (std::size_t i = 0; i < n; ++i) {
        const fs::path p = dir / numbered("view_", i, ".png");
        if (!fs::is_regular_file(p)) throw InputError("missing view " + p.string());
        s.views.push_back(load_image(p));
        if (!s.views.back().same_shape(s.views.front()))
            throw InputError("view " + p.string() + " has different dimensions from view 0");
    }
    const fs::path clean = dir / "clean.png";
    if (fs::is_regular_file(clean)) {
        s.clean = load_image(clean);
        if (!s.clean->same_shape(s.views.front())) throw InputError("clean image dimensions differ from the views");
    } else if (need_truth) {
        throw InputError("missing clean image " + clean.string());
    }
    if (need_truth) {
        for (std::size_t i = 0; i < n; ++i) {
            const fs::path p = dir / numbered("gtmask_", i, ".png");
            if (!fs::is_regular_file(p)) throw InputError("missing ground-truth mask " + p.string());
            s.gt_masks.push_back(load_mask(p));
        }
    }
    return s;
}

std::vector<FeatureStack> load_view_stacks(const fs::path& dir, std::size_t count) {
    std::vector<FeatureStack> out;
    for (std::size_t i = 0; i < count; ++i) {
        const fs::path p = dir / numbered("view_", i, ".fstk");
        if (!fs::is_regular_file(p)) throw InputError("missing feature stack " + p.string());
        out.push_back(load_feature_stack(p));
    }
    return out;
}

std::vector<FeatureStack> stacks_for(const TrainConfig& config, const ConfigMap& m, std::size_t count) {
    if (config.feature_source != FeatureSource::Fstk || !needs_perceptual(config.metric_mode)) return {};
    const auto dir = lookup(m, "features");
    if (!dir) throw ConfigError("feature_source=fstk needs --features DIR holding view_####.fstk");
    return load_view_stacks(*dir, count);
}

std::string history_csv(const TrainHistory& h) {
    std::string s = "step,loss,psnr,static_fraction\n";
    for (const auto& r : h.rows)
        s += std::to_string(r.step) + "," + format_csv(r.loss) + "," + format_csv(r.psnr) + "," +
             format_csv(r.static_fraction) + "\n";
    return s;
}

const Keys kMaskKeys = {"metric_mode",  "patch_size",        "feature_levels", "percentile_level",
                        "em_tolerance", "em_max_iterations", "em_variance_floor"};

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

int cmd_synth(const ConfigMap& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "synth", [&] {
        const ConfigMap m = resolve(args, join(scene_config_keys(), {"out"}));
        const SceneConfig config = scene_config_from(m);
        validate(config);
        const fs::path dir = require(m, "out");

        const SyntheticScene scene = generate_scene(config);
        make_dir(dir);
        remove_stale(dir / "manifest.txt");
        ConfigMap manifest = to_config(config);
        manifest["command"] = "synth";
        manifest["tool_version"] = std::string(kToolVersion);
        save_image(scene.clean, dir / "clean.png");
        record(manifest, dir, "clean.png");
        for (std::size_t i = 0; i < scene.views.size(); ++i) {
            const std::string view = numbered("view_", i, ".png");
            const std::string mask = numbered("gtmask_", i, ".png");
            save_image(scene.views[i], dir / view);
            save_mask(scene.gt_static_masks[i], dir / mask);
            record(manifest, dir, view);
            record(manifest, dir, mask);
        }
        write_config(manifest, dir / "manifest.txt");
        out << "synth: " << scene.views.size() << " views (" << scene.corrupted_views.size() << " with distractors) -> "
            << dir.string() << "\n";
        return kExitOk;
    });
}

int cmd_train(const ConfigMap& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "train", [&] {
        const ConfigMap m = resolve(args, join(train_config_keys(), {"scene", "out", "features"}));
        const TrainConfig config = train_config_from(m);
        validate(config);
        const fs::path scene_path = require(m, "scene");
        const fs::path dir = require(m, "out");
        const LoadedScene scene = load_scene(scene_path, false);
        const std::vector<FeatureStack> stacks = stacks_for(config, m, scene.views.size());

        if (config.warmup_steps >= config.steps)
            err << "hpc train: warning: warmup_steps (" << config.warmup_steps << ") >= steps (" << config.steps
                << "); static masks are never applied\n";

        const TrainResult result = train(scene.views, config, scene.clean, stacks);

        make_dir(dir);
        remove_stale(dir / "run_manifest.txt");
        ConfigMap manifest = to_config(config);
        manifest["command"] = "train";
        manifest["tool_version"] = std::string(kToolVersion);
        manifest["scene"] = fs::absolute(scene_path).lexically_normal().string();
        manifest["input.scene_manifest"] = crc32_hex(crc32_of_file(scene_path));
        if (const auto f = lookup(m, "features")) manifest["features"] = fs::absolute(*f).lexically_normal().string();
        save_image(result.model.estimate, dir / "final.png");
        record(manifest, dir, "final.png");
        for (std::size_t i = 0; i < result.masks.size(); ++i) {
            const std::string name = numbered("mask_", i, ".png");
            save_mask(result.masks[i], dir / name);
            record(manifest, dir, name);
        }
        write_text(dir / "history.csv", history_csv(result.history));
        record(manifest, dir, "history.csv");
        write_config(manifest, dir / "run_manifest.txt");

        out << "train: " << config.steps << " steps, " << result.history.mask_update_steps.size()
            << " mask updates -> " << dir.string() << "\n";
        return kExitOk;
    });
}

int cmd_mask(const ConfigMap& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "mask", [&] {
        const ConfigMap m = resolve(
            args, join(kMaskKeys, {"rendered", "reference", "out", "rendered_features", "reference_features"}));
        TrainConfig config = train_config_from(m);
        validate(config);
        const fs::path rendered_dir = require(m, "rendered");
        const fs::path reference_dir = require(m, "reference");
        const fs::path dir = require(m, "out");

        const auto rendered_files = list_images(rendered_dir);
        const auto reference_files = list_images(reference_dir);
        if (reference_files.empty()) throw InputError("no images in " + reference_dir.string());
        std::vector<std::string> stems;
        std::vector<Image> renders, references;
        for (const auto& ref : reference_files) {
            const auto match = std::find_if(rendered_files.begin(), rendered_files.end(),
                                            [&](const fs::path& p) { return p.stem() == ref.stem(); });
            if (match == rendered_files.end())
                throw InputError("no rendered image matches " + ref.filename().string());
            stems.push_back(ref.stem().string());
            references.push_back(load_image(ref));
            renders.push_back(load_image(*match));
        }
        if (rendered_files.size() != reference_files.size())
            throw InputError("rendered and reference directories hold different image sets");

        auto stacks_from = [&](const std::string& key) {
            std::vector<FeatureStack> stacks;
            const auto sdir = lookup(m, key);
            if (!sdir) return stacks;
            for (const auto& stem : stems) {
                const fs::path p = fs::path(*sdir) / (stem + ".fstk");
                if (!fs::is_regular_file(p)) throw InputError("missing feature stack " + p.string());
                stacks.push_back(load_feature_stack(p));
            }
            return stacks;
        };
        const auto reference_stacks = stacks_from("reference_features");
        const auto render_stacks = stacks_from("rendered_features");

        const MaskSet masks = compute_masks(renders, references, config, reference_stacks, render_stacks);

        make_dir(dir);
        remove_stale(dir / "manifest.txt");
        const ConfigMap resolved = to_config(config);
        ConfigMap manifest;
        for (const auto& k : kMaskKeys) manifest[k] = resolved.at(k);
        manifest["command"] = "mask";
        manifest["tool_version"] = std::string(kToolVersion);
        manifest["rendered"] = fs::absolute(rendered_dir).lexically_normal().string();
        manifest["reference"] = fs::absolute(reference_dir).lexically_normal().string();
        for (const std::string key : {"rendered_features", "reference_features"})
            if (const auto v = lookup(m, key)) manifest[key] = fs::absolute(*v).lexically_normal().string();
        for (std::size_t i = 0; i < stems.size(); ++i) {
            const std::string name = "mask_" + stems[i] + ".png";
            save_mask(masks.pixels[i], dir / name);
            record(manifest, dir, name);
        }
        write_config(manifest, dir / "manifest.txt");
        out << "mask: " << stems.size() << " images, static fraction " << format_csv(masks.static_fraction()) << " -> "
            << dir.string() << "\n";
        return kExitOk;
    });
}

int cmd_eval(const ConfigMap& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "eval", [&] {
        const ConfigMap m = resolve(args, {"run", "scene", "out"});
        const fs::path run = require(m, "run");
        if (!fs::is_directory(run)) throw InputError("run directory not found: " + run.string());
        fs::path scene_path;
        if (const auto s = lookup(m, "scene")) {
            scene_path = *s;
        } else {
            const fs::path rm = run / "run_manifest.txt";
            if (!fs::is_regular_file(rm)) throw InputError("missing " + rm.string() + " (or pass --scene)");
            scene_path = require(read_config(rm), "scene");
        }
        const LoadedScene scene = load_scene(scene_path, true);
        const fs::path final_path = run / "final.png";
        if (!fs::is_regular_file(final_path)) throw InputError("missing " + final_path.string());
        const PixelModel model{load_image(final_path)};
        std::vector<PixelMask> masks;
        for (std::size_t i = 0; i < scene.views.size(); ++i) {
            const fs::path p = run / numbered("mask_", i, ".png");
            if (!fs::is_regular_file(p)) throw InputError("missing " + p.string());
            masks.push_back(load_mask(p));
        }
        const EvalMetrics e = evaluate(model, *scene.clean, masks, scene.gt_masks);
        const std::string csv = "psnr,ssim,mask_iou,static_fraction\n" + format_csv(e.psnr) + "," + format_csv(e.ssim) +
                                "," + format_csv(e.mask_iou) + "," + format_csv(e.static_fraction) + "\n";
        const fs::path target = lookup(m, "out") ? fs::path(*lookup(m, "out")) : run / "metrics.csv";
        if (target.has_parent_path()) make_dir(target.parent_path());
        write_text(target, csv);
        out << csv;
        return kExitOk;
    });
}

int cmd_sweep(const ConfigMap& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "sweep", [&] {
        const ConfigMap m = resolve(args, join(train_config_keys(), {"scene", "axis", "values", "out", "features"}));
        const std::string axis = require(m, "axis");
        if (axis != "patch_size" && axis != "warmup_steps" && axis != "metric_mode")
            throw ConfigError("axis must be patch_size, warmup_steps or metric_mode, got '" + axis + "'");

        std::vector<std::string> values;
        if (const auto list = lookup(m, "values")) {
            std::size_t start = 0;
            while (start <= list->size()) {
                const auto comma = list->find(',', start);
                std::string v = list->substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                std::erase_if(v, [](unsigned char c) { return std::isspace(c); });
                if (!v.empty()) values.push_back(v);
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
        if (values.empty()) throw ConfigError("sweep set for '" + axis + "' is empty");

        std::vector<TrainConfig> configs;
        for (const auto& v : values) {
            ConfigMap run = m;
            run[axis] = v;
            configs.push_back(train_config_from(run));
            validate(configs.back());
        }
        const LoadedScene scene = load_scene(require(m, "scene"), true);
        std::string csv = "axis,value,psnr,ssim,mask_iou,static_fraction\n";
        for (std::size_t i = 0; i < configs.size(); ++i) {
            const auto stacks = stacks_for(configs[i], m, scene.views.size());
            const TrainResult r = train(scene.views, configs[i], scene.clean, stacks);
            const EvalMetrics e = evaluate(r.model, *scene.clean, r.masks, scene.gt_masks);
            csv += axis + "," + values[i] + "," + format_csv(e.psnr) + "," + format_csv(e.ssim) + "," +
                   format_csv(e.mask_iou) + "," + format_csv(e.static_fraction) + "\n";
        }
        if (const auto target = lookup(m, "out")) {
            const fs::path p = *target;
            if (p.has_parent_path()) make_dir(p.parent_path());
            write_text(p, csv);
        }
        out << csv;
        return kExitOk;
    });
}

namespace {

std::string help_for(const std::string& key) {
    static const std::map<std::string, std::string> text = {
        {"config", "key=value file; flags override its values"},
        {"out", "output directory (CSV path for sweep and eval)"},
        {"height", "image height in pixels"},
        {"width", "image width in pixels"},
        {"num_views", "number of views (>= 2)"},
        {"distractor_view_fraction", "fraction of views that receive distractors"},
        {"distractors_min", "fewest distractors in a corrupted view"},
        {"distractors_max", "most distractors in a corrupted view"},
        {"distractor_size_min", "smallest distractor side in pixels"},
        {"distractor_size_max", "largest distractor side in pixels"},
        {"noise_sigma", "per-view Gaussian noise level"},
        {"seed", "seed for every random choice (default 0)"},
        {"hard_mode", "low-contrast distractors and flat dark regions"},
        {"steps", "gradient steps"},
        {"learning_rate", "gradient-descent step size"},
        {"lambda", "SSIM weight in the mixed loss"},
        {"patch_size", "patch side in pixels"},
        {"warmup_steps", "steps before masks are applied"},
        {"mask_update_interval", "steps between mask updates"},
        {"metric_mode", "photometric-gmm | perceptual-gmm | perceptual-percentile | dual-gmm | hybrid"},
        {"feature_source", "builtin | fstk"},
        {"feature_levels", "pyramid levels of the builtin feature extractor"},
        {"percentile_level", "static level for perceptual-percentile"},
        {"em_tolerance", "EM stops when the mean log-likelihood gains less than this"},
        {"em_max_iterations", "EM iteration cap"},
        {"em_variance_floor", "lower bound on mixture variances"},
        {"log_interval", "steps between history rows"},
        {"scene", "scene manifest written by synth"},
        {"features", "directory of view_####.fstk reference feature stacks"},
        {"run", "run directory written by train"},
        {"axis", "patch_size | warmup_steps | metric_mode"},
        {"values", "comma-separated values for the sweep axis"},
        {"rendered", "directory of rendered images"},
        {"reference", "directory of reference images (matched by file stem)"},
        {"rendered_features", "directory of <stem>.fstk stacks for rendered images"},
        {"reference_features", "directory of <stem>.fstk stacks for reference images"},
    };
    const auto it = text.find(key);
    return it == text.end() ? std::string{} : it->second;
}

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Static/transient patch masking for robust image-set reconstruction", "hpc"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kToolVersion));

    using Command = int (*)(const ConfigMap&, std::ostream&, std::ostream&);
    struct Sub {
        CLI::App* app = nullptr;
        Command run = nullptr;
        std::list<std::pair<std::string, std::string>> values;
        std::list<std::pair<std::string, bool>> flags;
        std::vector<std::pair<std::string, CLI::Option*>> options;
    };
    std::list<Sub> subs;

    auto add = [&](const std::string& name, const std::string& description, const Keys& keys, Command run) {
        Sub& s = subs.emplace_back();
        s.app = app.add_subcommand(name, description);
        s.run = run;
        for (const auto& key : join({"config"}, keys)) {
            if (key == "hard_mode") {
                auto& slot = s.flags.emplace_back(key, false);
                s.options.emplace_back(key, s.app->add_flag(flag_name(key), slot.second, help_for(key)));
            } else {
                auto& slot = s.values.emplace_back(key, std::string{});
                s.options.emplace_back(key, s.app->add_option(flag_name(key), slot.second, help_for(key)));
            }
        }
    };
    add("synth", "generate a synthetic multi-view scene", join(scene_config_keys(), {"out"}), cmd_synth);
    add("train", "reconstruct the static image under hybrid masks",
        join(train_config_keys(), {"scene", "out", "features"}), cmd_train);
    add("mask", "classify rendered/reference pairs without training",
        join(kMaskKeys, {"rendered", "reference", "out", "rendered_features", "reference_features"}), cmd_mask);
    add("eval", "score a training run against its scene", {"run", "scene", "out"}, cmd_eval);
    add("sweep", "train across values of one setting",
        join(train_config_keys(), {"scene", "axis", "values", "out", "features"}), cmd_sweep);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    for (auto& s : subs) {
        if (!s.app->parsed()) continue;
        ConfigMap settings;
        auto value_of = [&](const std::string& key) -> std::string {
            for (const auto& [k, v] : s.values)
                if (k == key) return v;
            for (const auto& [k, v] : s.flags)
                if (k == key) return v ? "true" : "false";
            return {};
        };
        for (const auto& [key, opt] : s.options)
            if (opt->count() > 0) settings[key] = value_of(key);
        return s.run(settings, out, err);
    }
    return kExitInvalid;
}

}  // namespace hpc
