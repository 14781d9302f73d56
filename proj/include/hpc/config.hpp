#pragma once

#include "hpc/errors.hpp"
#include "hpc/synth.hpp"
#include "hpc/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace hpc {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Flat key=value settings, kept sorted so written files are stable.
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are skipped.
/// Throws ConfigError on a malformed line and IoError when the file cannot be read.
ConfigMap parse_config(std::string_view text, std::string_view origin = "<text>");
ConfigMap read_config(const std::filesystem::path& path);
std::string format_config(const ConfigMap& map);
void write_config(const ConfigMap& map, const std::filesystem::path& path);

/// Later entries win.
void overlay(ConfigMap& base, const ConfigMap& top);

/// Shortest text that parses back to the same double.
std::string format_exact(double v);
/// Six significant digits, '.' decimal, as used in every CSV output.
std::string format_csv(double v);

std::uint32_t crc32_of_file(const std::filesystem::path& path);
std::string crc32_hex(std::uint32_t crc);

/// Typed accessors; each throws ConfigError naming the key on a bad value.
std::size_t get_count(const ConfigMap& map, const std::string& key, std::size_t fallback);
double get_real(const ConfigMap& map, const std::string& key, double fallback);
bool get_flag(const ConfigMap& map, const std::string& key, bool fallback);
std::uint64_t get_seed(const ConfigMap& map, const std::string& key, std::uint64_t fallback);

ConfigMap to_config(const SceneConfig& config);
/// Reads the scene keys from `map` on top of `base`; does not validate.
SceneConfig scene_config_from(const ConfigMap& map, SceneConfig base = {});

ConfigMap to_config(const TrainConfig& config);
TrainConfig train_config_from(const ConfigMap& map, TrainConfig base = {});

const std::vector<std::string>& scene_config_keys();
const std::vector<std::string>& train_config_keys();

}  // namespace hpc
