#include "gsreg/app.hpp"

#include "gsreg/config.hpp"
#include "gsreg/gradcheck.hpp"
#include "gsreg/mesh.hpp"
#include "gsreg/mesh_io.hpp"
#include "gsreg/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace gsreg::app {
namespace {

void save_points_ply(std::span<const Vec3> points, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_points_ply: cannot open " + path.string());
    }
    out << "ply\nformat binary_little_endian 1.0\ncomment gsreg target points\n";
    out << "element vertex " << points.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\nend_header\n";
    for (const Vec3& p : points) {
        const float xyz[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                              static_cast<float>(p.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    if (!out) {
        throw std::runtime_error("save_points_ply: write failed");
    }
}

std::optional<nlohmann::json> sibling_manifest(const std::filesystem::path& artifact) {
    const std::filesystem::path path = artifact.parent_path() / "manifest.json";
    std::ifstream in(path);
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

std::optional<std::string> manifest_shape(const nlohmann::json& manifest) {
    const nlohmann::json* cfg = nullptr;
    if (manifest.contains("config") && manifest["config"].is_object()) {
        cfg = &manifest["config"];
    } else if (manifest.contains("source_config") && manifest["source_config"].is_object()) {
        cfg = &manifest["source_config"];
    }
    if (cfg && cfg->contains("scene.shape") && (*cfg)["scene.shape"].is_string()) {
        return (*cfg)["scene.shape"].get<std::string>();
    }
    return std::nullopt;
}

}  // namespace

int cmd_fit(const FitOptions& options, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    RunConfig cfg;
    try {
        cfg = load_config_file(options.config_path, options.overrides);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    if (options.dry_run) {
        out << config_to_json(cfg).dump(2) << "\n";
        return kOk;
    }

    try {
        GeneratedScene generated = generate_scene(cfg.scene);
        SdfNetwork net = make_scene_network(cfg.net, generated.scene.bounds, cfg.seed);

        const FitResult result =
            fit(generated.scene, net, generated.targets, cfg.train, options.out_dir);

        const nlohmann::json manifest = make_manifest(
            "fit", config_to_json(cfg), {{"config", options.config_path.string()}},
            {{"scene", "scene.ply"},
             {"network", "sdfnet.bin"},
             {"metrics", "metrics.csv"},
             {"summary", "summary.json"}},
            cfg.seed, started, utc_timestamp());
        write_json(manifest, options.out_dir / "manifest.json");

        out << "fit complete: " << cfg.train.total_iters << " iterations, mean erank "
            << result.final_mean_erank << ", eikonal residual " << result.final_eikonal_residual
            << ", artifacts in " << options.out_dir.string() << "\n";
        return kOk;
    } catch (const DivergenceError& e) {
        err << "training diverged: " << e.what() << "\n";
        return kDivergence;
    } catch (const std::exception& e) {
        err << "fit failed: " << e.what() << "\n";
        return kConfigError;
    }
}

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    RunConfig cfg;
    try {
        cfg = load_config_file(options.config_path, options.overrides);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        const GeneratedScene generated = generate_scene(cfg.scene);
        std::filesystem::create_directories(options.out_dir);
        save_scene_ply(generated.scene, options.out_dir / "scene.ply");
        save_points_ply(generated.targets, options.out_dir / "targets.ply");
        const nlohmann::json manifest = make_manifest(
            "generate", config_to_json(cfg), {{"config", options.config_path.string()}},
            {{"scene", "scene.ply"}, {"targets", "targets.ply"}}, cfg.seed, started,
            utc_timestamp());
        write_json(manifest, options.out_dir / "manifest.json");
        out << "generated " << generated.scene.size() << " gaussians, "
            << generated.targets.size() << " targets (" << shape_name(cfg.scene.shape) << ")\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "generate failed: " << e.what() << "\n";
        return kConfigError;
    }
}

int cmd_extract(const ExtractOptions& options, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    if (options.resolution < 8) {
        err << "config error: grid resolution must be >= 8\n";
        return kConfigError;
    }

    std::optional<LoadedNetwork> loaded;
    try {
        loaded = SdfNetwork::load(options.checkpoint);
    } catch (const std::exception& e) {
        err << "corrupt checkpoint: " << e.what() << "\n";
        return kCorruptInput;
    }

    try {
        GridSpec grid;
        grid.nx = grid.ny = grid.nz = options.resolution;
        if (loaded->has_bounds) {
            grid.bounds = loaded->bounds;
        } else {
            const DomainMap& dom = loaded->net.domain();
            grid.bounds = Aabb{dom.center - Vec3::Constant(dom.radius),
                               dom.center + Vec3::Constant(dom.radius)};
        }

        const SdfNetwork& net = loaded->net;
        net.forward(grid.bounds.center());  // parameter check before fan-out
        const auto field =
            sample_field([&](const Vec3& p) { return net.forward(p); }, grid, thread_budget());
        const TriangleMesh mesh = marching_cubes(field, options.iso, grid);

        std::filesystem::create_directories(options.out_dir);
        save_mesh_obj(mesh, options.out_dir / "mesh.obj");
        save_mesh_ply(mesh, options.out_dir / "mesh.ply");
        if (options.dump_grid) {
            save_grid_raw(field, grid, options.iso, options.out_dir / "grid.raw");
        }

        nlohmann::json manifest = make_manifest(
            "extract", nlohmann::json::object(), {{"checkpoint", options.checkpoint.string()}},
            {{"mesh_obj", "mesh.obj"}, {"mesh_ply", "mesh.ply"}}, 0, started, utc_timestamp());
        manifest["grid"] = {{"resolution", options.resolution}, {"iso", options.iso}};
        if (const auto source = sibling_manifest(options.checkpoint)) {
            if (source->contains("config")) manifest["source_config"] = (*source)["config"];
        }
        write_json(manifest, options.out_dir / "manifest.json");

        if (mesh.empty()) {
            out << "warning: field has no zero crossing; wrote empty mesh\n";
        } else {
            out << "extracted mesh: " << mesh.vertices.size() << " vertices, "
                << mesh.triangles.size() << " triangles\n";
        }
        return kOk;
    } catch (const std::exception& e) {
        err << "extract failed: " << e.what() << "\n";
        return kCorruptInput;
    }
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    AnalyticSurface surface = AnalyticSurface::sphere(0.5);
    try {
        const ShapeKind kind = parse_shape(options.shape);
        switch (kind) {
            case ShapeKind::Sphere: surface = AnalyticSurface::sphere(options.radius); break;
            case ShapeKind::Plane: surface = AnalyticSurface::plane(Vec3::UnitZ()); break;
            case ShapeKind::Torus:
                surface = AnalyticSurface::torus(options.torus_major, options.torus_minor);
                break;
        }
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    TriangleMesh mesh;
    try {
        mesh = load_mesh(options.mesh_path);
        if (mesh.empty()) {
            throw std::runtime_error("mesh has no triangles");
        }
    } catch (const std::exception& e) {
        err << "corrupt mesh: " << e.what() << "\n";
        return kCorruptInput;
    }

    if (const auto manifest = sibling_manifest(options.mesh_path)) {
        if (const auto recorded = manifest_shape(*manifest)) {
            if (*recorded != options.shape) {
                err << "shape mismatch: manifest records '" << *recorded
                    << "' but evaluation was asked for '" << options.shape << "'\n";
                return kMismatch;
            }
        }
    }

    try {
        RandomEngine rng(options.seed);
        std::vector<Vec3> reference;
        reference.reserve(static_cast<std::size_t>(options.samples));
        for (int i = 0; i < options.samples; ++i) reference.push_back(surface.sample(rng));

        const double chamfer = chamfer_distance(
            mesh, [&](const Vec3& p) { return surface.sdf(p); }, reference, options.samples, rng);

        double mean_abs = 0.0, max_abs = 0.0;
        for (const Vec3& v : mesh.vertices) {
            const double d = std::abs(surface.sdf(v));
            mean_abs += d;
            max_abs = std::max(max_abs, d);
        }
        mean_abs /= static_cast<double>(mesh.vertices.size());

        nlohmann::json result;
        result["chamfer_sq"] = chamfer;
        result["chamfer_rms"] = std::sqrt(chamfer);
        result["vertex_sdf"] = {{"mean_abs", mean_abs}, {"max_abs", max_abs}};
        result["mesh"] = {{"vertices", mesh.vertices.size()},
                          {"triangles", mesh.triangles.size()}};

        if (options.scene_ply) {
            const GaussianScene scene = load_scene_ply(*options.scene_ply);
            double min_e = 3.0, max_e = 1.0, sum_e = 0.0;
            for (const Gaussian& g : scene.gaussians) {
                const double e = effective_rank(g.scales).erank;
                min_e = std::min(min_e, e);
                max_e = std::max(max_e, e);
                sum_e += e;
            }
            result["erank"] = {{"mean", sum_e / static_cast<double>(scene.size())},
                               {"min", min_e},
                               {"max", max_e}};
        }

        out << result.dump(2) << "\n";
        if (options.out_dir) {
            std::filesystem::create_directories(*options.out_dir);
            write_json(result, *options.out_dir / "eval.json");
            nlohmann::json manifest = make_manifest(
                "eval", nlohmann::json::object(), {{"mesh", options.mesh_path.string()}},
                {{"eval", "eval.json"}}, options.seed, started, utc_timestamp());
            manifest["shape"] = options.shape;
            write_json(manifest, *options.out_dir / "manifest.json");
        }
        return kOk;
    } catch (const std::exception& e) {
        err << "eval failed: " << e.what() << "\n";
        return kCorruptInput;
    }
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
    const GradcheckReport report = run_gradcheck(options.seed, options.instances);
    return print_gradcheck_report(report, out) ? kOk : kGradcheckFail;
}

}  // namespace gsreg::app
