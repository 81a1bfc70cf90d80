#include "gsreg/config.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <thread>

namespace gsreg {
namespace {

class FlatReader {
public:
    explicit FlatReader(const nlohmann::json& flat) : flat_(flat) {
        if (!flat.is_object()) {
            throw ConfigError("", "config must be a JSON object with dotted keys");
        }
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        auto it = flat_.find(key);
        if (it == flat_.end()) return fallback;
        try {
            return it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(key, "has the wrong type");
        }
    }

    std::string require_string(const std::string& key) {
        seen_.insert(key);
        auto it = flat_.find(key);
        if (it == flat_.end()) {
            throw ConfigError(key, "is required but missing");
        }
        if (!it->is_string()) {
            throw ConfigError(key, "must be a string");
        }
        return it->get<std::string>();
    }

    Vec3 get_vec3(const std::string& key, const Vec3& fallback) {
        seen_.insert(key);
        auto it = flat_.find(key);
        if (it == flat_.end()) return fallback;
        if (!it->is_array() || it->size() != 3) {
            throw ConfigError(key, "must be an array of 3 numbers");
        }
        try {
            return Vec3{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(key, "must be an array of 3 numbers");
        }
    }

    void reject_unknown() const {
        for (auto it = flat_.begin(); it != flat_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigError(it.key(), "is not a recognized configuration key");
            }
        }
    }

private:
    const nlohmann::json& flat_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const nlohmann::json& flat) {
    FlatReader reader(flat);
    RunConfig cfg;

    cfg.seed = reader.get<std::uint64_t>("seed", 0);

    cfg.scene.shape = parse_shape(reader.require_string("scene.shape"));
    cfg.scene.radius = reader.get<double>("scene.radius", 0.5);
    cfg.scene.torus_major = reader.get<double>("scene.torus_major", 0.35);
    cfg.scene.torus_minor = reader.get<double>("scene.torus_minor", 0.15);
    cfg.scene.plane_normal = reader.get_vec3("scene.plane_normal", Vec3::UnitZ());
    cfg.scene.plane_patch = reader.get<double>("scene.plane_patch", 0.8);
    cfg.scene.num_gaussians = reader.get<int>("scene.num_gaussians", 150);
    cfg.scene.num_targets = reader.get<int>("scene.num_targets", 1000);
    cfg.scene.noise_sigma = reader.get<double>("scene.noise_sigma", 0.01);
    cfg.scene.init_needles = reader.get<bool>("scene.init_needles", false);
    cfg.scene.gaussian_scale = reader.get<double>("scene.gaussian_scale", 0.05);
    cfg.scene.seed = cfg.seed;

    cfg.net.hidden_layers = reader.get<int>("net.hidden_layers", 8);
    cfg.net.width = reader.get<int>("net.width", 256);
    cfg.net.skip_at = reader.get<int>("net.skip_at", 4);
    cfg.net.beta = reader.get<double>("net.beta", 100.0);
    cfg.net.encoding.num_bands = reader.get<int>("net.num_bands", 6);
    cfg.net.encoding.include_raw = reader.get<bool>("net.include_raw", true);

    cfg.train.total_iters = reader.get<int>("train.total_iters", 2000);
    cfg.train.warmup_iters = reader.get<int>("train.warmup_iters", 500);
    cfg.train.lr_gaussians = reader.get<double>("train.lr_gaussians", 1e-2);
    cfg.train.lr_network = reader.get<double>("train.lr_network", 1e-3);
    cfg.train.adam_beta1 = reader.get<double>("train.adam_beta1", 0.9);
    cfg.train.adam_beta2 = reader.get<double>("train.adam_beta2", 0.999);
    cfg.train.adam_eps = reader.get<double>("train.adam_eps", 1e-8);
    cfg.train.sampling.eikonal_samples = reader.get<int>("train.eikonal_samples", 256);
    cfg.train.sampling.sdf_samples_per_gaussian =
        reader.get<int>("train.sdf_samples_per_gaussian", 2);
    cfg.train.sampling.sigma_expand = reader.get<double>("train.sigma_expand", 3.0);
    cfg.train.sampling.gauss_grad_from_sdf = reader.get<bool>("train.gauss_grad_from_sdf", true);
    cfg.train.sampling.erank_epsilon = reader.get<double>("train.erank_epsilon", 1e-8);
    cfg.train.net_train_during_warmup = reader.get<bool>("train.net_train_during_warmup", false);
    cfg.train.checkpoint_every = reader.get<int>("train.checkpoint_every", 0);
    cfg.train.log_wall_time = reader.get<bool>("train.log_wall_time", true);
    cfg.train.seed = cfg.seed;

    cfg.train.weights.lambda_erank = reader.get<double>("loss.lambda_erank", 0.1);
    cfg.train.weights.lambda_eikonal = reader.get<double>("loss.lambda_eikonal", 0.1);
    cfg.train.weights.lambda_sdf_gauss = reader.get<double>("loss.lambda_sdf_gauss", 1.0);
    cfg.train.weights.lambda_attach = reader.get<double>("loss.lambda_attach", 1.0);

    reader.reject_unknown();

    try {
        cfg.scene.validate();
        cfg.train.validate();
        if (cfg.net.hidden_layers < 1) throw std::domain_error("must be >= 1");
    } catch (const std::domain_error& e) {
        throw ConfigError("", e.what());
    }
    if (cfg.net.hidden_layers < 1 || cfg.net.width < 1) {
        throw ConfigError("net.hidden_layers", "network dimensions must be >= 1");
    }
    if (cfg.net.skip_at != 0 &&
        (cfg.net.skip_at < 1 || cfg.net.skip_at >= cfg.net.hidden_layers)) {
        throw ConfigError("net.skip_at", "must be 0 or in [1, net.hidden_layers - 1]");
    }
    if (!(cfg.net.beta > 0.0)) {
        throw ConfigError("net.beta", "must be > 0");
    }
    if (cfg.net.encoding.num_bands < 1) {
        throw ConfigError("net.num_bands", "must be >= 1");
    }
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["scene.shape"] = shape_name(cfg.scene.shape);
    j["scene.radius"] = cfg.scene.radius;
    j["scene.torus_major"] = cfg.scene.torus_major;
    j["scene.torus_minor"] = cfg.scene.torus_minor;
    j["scene.plane_normal"] = {cfg.scene.plane_normal.x(), cfg.scene.plane_normal.y(),
                               cfg.scene.plane_normal.z()};
    j["scene.plane_patch"] = cfg.scene.plane_patch;
    j["scene.num_gaussians"] = cfg.scene.num_gaussians;
    j["scene.num_targets"] = cfg.scene.num_targets;
    j["scene.noise_sigma"] = cfg.scene.noise_sigma;
    j["scene.init_needles"] = cfg.scene.init_needles;
    j["scene.gaussian_scale"] = cfg.scene.gaussian_scale;
    j["net.hidden_layers"] = cfg.net.hidden_layers;
    j["net.width"] = cfg.net.width;
    j["net.skip_at"] = cfg.net.skip_at;
    j["net.beta"] = cfg.net.beta;
    j["net.num_bands"] = cfg.net.encoding.num_bands;
    j["net.include_raw"] = cfg.net.encoding.include_raw;
    j["train.total_iters"] = cfg.train.total_iters;
    j["train.warmup_iters"] = cfg.train.warmup_iters;
    j["train.lr_gaussians"] = cfg.train.lr_gaussians;
    j["train.lr_network"] = cfg.train.lr_network;
    j["train.adam_beta1"] = cfg.train.adam_beta1;
    j["train.adam_beta2"] = cfg.train.adam_beta2;
    j["train.adam_eps"] = cfg.train.adam_eps;
    j["train.eikonal_samples"] = cfg.train.sampling.eikonal_samples;
    j["train.sdf_samples_per_gaussian"] = cfg.train.sampling.sdf_samples_per_gaussian;
    j["train.sigma_expand"] = cfg.train.sampling.sigma_expand;
    j["train.gauss_grad_from_sdf"] = cfg.train.sampling.gauss_grad_from_sdf;
    j["train.erank_epsilon"] = cfg.train.sampling.erank_epsilon;
    j["train.net_train_during_warmup"] = cfg.train.net_train_during_warmup;
    j["train.checkpoint_every"] = cfg.train.checkpoint_every;
    j["train.log_wall_time"] = cfg.train.log_wall_time;
    j["loss.lambda_erank"] = cfg.train.weights.lambda_erank;
    j["loss.lambda_eikonal"] = cfg.train.weights.lambda_eikonal;
    j["loss.lambda_sdf_gauss"] = cfg.train.weights.lambda_sdf_gauss;
    j["loss.lambda_attach"] = cfg.train.weights.lambda_attach;
    return j;
}

namespace {

nlohmann::json parse_override_value(const std::string& key, const std::string& text) {
    // Overrides arrive as strings; interpret them with JSON syntax first and
    // fall back to a plain string (lets --scene.shape=sphere work unquoted).
    const auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    if (text.empty()) {
        throw ConfigError(key, "override has an empty value");
    }
    return nlohmann::json(text);
}

}  // namespace

RunConfig load_config_file(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", "cannot open config file " + path.string());
    }
    nlohmann::json flat;
    try {
        flat = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& [key, value] : overrides) {
        flat[key] = parse_override_value(key, value);
    }
    if (const char* env_seed = std::getenv("GSREG_SEED")) {
        std::uint64_t seed = 0;
        const std::string text(env_seed);
        const auto res = std::from_chars(text.data(), text.data() + text.size(), seed);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
            throw ConfigError("GSREG_SEED", "must be an unsigned integer");
        }
        flat["seed"] = seed;
    }
    return config_from_json(flat);
}

SdfNetwork make_scene_network(const NetConfig& net_cfg, const Aabb& bounds,
                              std::uint64_t seed) {
    RandomEngine rng(seed ^ 0x9e3779b97f4a7c15ULL);
    // Normalized coordinates put the bounding sphere at radius 1; the initial
    // surface sits at half that, i.e. half the scene-bounds radius.
    SdfNetwork net = SdfNetwork::geometric(net_cfg.encoding, net_cfg.hidden_layers, net_cfg.width,
                                           net_cfg.skip_at, net_cfg.beta, 0.5, rng);
    net.set_domain(DomainMap{bounds.center(), bounds.bounding_radius()});
    return net;
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& resolved_config,
                             const std::map<std::string, std::string>& inputs,
                             const std::map<std::string, std::string>& outputs,
                             std::uint64_t seed, const std::string& started_utc,
                             const std::string& finished_utc) {
    nlohmann::json j;
    j["tool"] = "gsreg";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = resolved_config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_json: cannot open " + path.string());
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("write_json: write failed for " + path.string());
    }
}

int thread_budget() {
    int budget = static_cast<int>(std::thread::hardware_concurrency());
    if (budget < 1) budget = 1;
    if (const char* env = std::getenv("GSREG_THREADS")) {
        const std::string text(env);
        int cap = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), cap);
        if (res.ec == std::errc{} && res.ptr == text.data() + text.size() && cap >= 1) {
            budget = std::min(budget, cap);
        }
    }
    return budget;
}

}  // namespace gsreg
