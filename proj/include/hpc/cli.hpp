#pragma once

#include "hpc/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hpc {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;

// Each command takes its settings as a flat map (flag names with '-' replaced by '_').
// A "config" entry names a key=value file whose values the other entries override.

/// Writes clean.png, view_####.png, gtmask_####.png and manifest.txt into `out`.
int cmd_synth(const ConfigMap& args, std::ostream& out, std::ostream& err);

/// Trains on the scene named by `scene`; writes final.png, mask_####.png, history.csv and
/// run_manifest.txt into `out`.
int cmd_train(const ConfigMap& args, std::ostream& out, std::ostream& err);

/// Classifies pairs of images from `rendered` and `reference` (matched by file stem)
/// without training; writes mask_<stem>.png and manifest.txt into `out`.
int cmd_mask(const ConfigMap& args, std::ostream& out, std::ostream& err);

/// Scores the run directory `run` against its scene; prints and writes metrics CSV.
int cmd_eval(const ConfigMap& args, std::ostream& out, std::ostream& err);

/// Trains once per entry of the comma-separated `values` along `axis` on one scene.
int cmd_sweep(const ConfigMap& args, std::ostream& out, std::ostream& err);

/// Command-line front end; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpc
