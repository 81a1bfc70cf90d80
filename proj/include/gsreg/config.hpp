#pragma once

#include "gsreg/scene_gen.hpp"
#include "gsreg/sdf_net.hpp"
#include "gsreg/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace gsreg {

inline constexpr const char* kToolVersion = "0.1.0";

/// Configuration problem; carries the offending field for diagnostics.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct NetConfig {
    EncodingConfig encoding;
    int hidden_layers = 8;
    int width = 256;
    int skip_at = 4;
    double beta = 100.0;
};

/// Resolved run configuration. The on-disk form is a flat JSON object with
/// dotted keys ("train.warmup_iters": 500), the same spelling the CLI
/// overrides use.
struct RunConfig {
    SceneSpec scene;
    NetConfig net;
    TrainConfig train;
    std::uint64_t seed = 0;
};

/// Parses a flat dotted-key JSON object. "scene.shape" is required, all other
/// keys have defaults; unknown keys are rejected. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& flat);

/// Full resolved snapshot (every key present, sorted) for manifests and
/// --dry-run output.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Reads and parses a config file, then applies dotted-key overrides and the
/// GSREG_SEED environment variable.
RunConfig load_config_file(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& overrides = {});

/// Builds the geometric-initialized network for a scene per the config.
SdfNetwork make_scene_network(const NetConfig& net_cfg, const Aabb& bounds,
                              std::uint64_t seed);

/// Run manifest written next to every artifact set.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& resolved_config,
                             const std::map<std::string, std::string>& inputs,
                             const std::map<std::string, std::string>& outputs,
                             std::uint64_t seed, const std::string& started_utc,
                             const std::string& finished_utc);

std::string utc_timestamp();

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

/// Worker cap from GSREG_THREADS (>= 1); defaults to the hardware count.
int thread_budget();

}  // namespace gsreg
