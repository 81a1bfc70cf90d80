#pragma once

#include "gsreg/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace gsreg::app {

/// Stable process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kGradcheckFail = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kDivergence = 3;
inline constexpr int kCorruptInput = 4;
inline constexpr int kMismatch = 5;

struct FitOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir = "out";
    bool dry_run = false;
    std::map<std::string, std::string> overrides;  // dotted key -> value text
};
int cmd_fit(const FitOptions& options, std::ostream& out, std::ostream& err);

struct GenerateOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir = "out";
    std::map<std::string, std::string> overrides;
};
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

struct ExtractOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path out_dir = "out";
    int resolution = 64;
    double iso = 0.0;
    bool dump_grid = false;
};
int cmd_extract(const ExtractOptions& options, std::ostream& out, std::ostream& err);

struct EvalOptions {
    std::filesystem::path mesh_path;
    std::string shape = "sphere";
    double radius = 0.5;
    double torus_major = 0.35;
    double torus_minor = 0.15;
    std::optional<std::filesystem::path> scene_ply;
    std::optional<std::filesystem::path> out_dir;
    int samples = 20000;
    std::uint64_t seed = 0;
};
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

struct GradcheckOptions {
    std::uint64_t seed = 0;
    int instances = 100;
};
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out);

}  // namespace gsreg::app
