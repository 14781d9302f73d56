#pragma once

#include "hpc/imagery.hpp"
#include "hpc/rng.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace testing {

namespace fs = std::filesystem;

// Fresh directory removed when the object dies.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("hpc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline hpc::Image random_image(std::size_t h, std::size_t w, hpc::CounterRng& rng, double lo = 0.0, double hi = 1.0) {
    hpc::Image img(h, w);
    for (auto& s : img.samples()) s = rng.uniform(lo, hi);
    return img;
}

inline hpc::PixelMask random_mask(std::size_t h, std::size_t w, hpc::CounterRng& rng, double p_static = 0.5) {
    hpc::PixelMask m(h, w);
    for (auto& v : m.values()) v = rng.uniform() < p_static ? 1 : 0;
    return m;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the hpc executable through the shell; arguments must not need quoting.
inline RunResult run_hpc(const std::string& args, const fs::path& scratch) {
    const fs::path out = scratch / "stdout.txt";
    const fs::path err = scratch / "stderr.txt";
    const std::string cmd =
        std::string(HPC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
}

}  // namespace testing
