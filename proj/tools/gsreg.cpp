#include "gsreg/app.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

// Config overrides arrive as --section.key=value (or --section.key value)
// after the structural flags. Anything else left over is a usage error.
int collect_overrides(std::vector<std::string>& extras,
                      std::map<std::string, std::string>& overrides) {
    // CLI11 hands remaining args back in reverse order.
    std::vector<std::string> args(extras.rbegin(), extras.rend());
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& token = args[i];
        if (token.rfind("--", 0) != 0 || token.find('.') == std::string::npos) {
            std::cerr << "config error: unrecognized argument '" << token << "'\n";
            return gsreg::app::kConfigError;
        }
        const std::string body = token.substr(2);
        const std::size_t eq = body.find('=');
        if (eq != std::string::npos) {
            overrides[body.substr(0, eq)] = body.substr(eq + 1);
        } else if (i + 1 < args.size()) {
            overrides[body] = args[++i];
        } else {
            std::cerr << "config error: override '" << token << "' is missing a value\n";
            return gsreg::app::kConfigError;
        }
    }
    return gsreg::app::kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface-aligned Gaussian regularization testbed"};
    app.require_subcommand(1);

    gsreg::app::FitOptions fit_options;
    CLI::App* fit = app.add_subcommand("fit", "co-optimize Gaussians and SDF network");
    fit->add_option("--config", fit_options.config_path, "config JSON (flat dotted keys)")
        ->required();
    fit->add_option("--out", fit_options.out_dir, "output directory (default: out)");
    fit->add_flag("--dry-run", fit_options.dry_run, "print resolved config and exit");
    fit->allow_extras();

    gsreg::app::GenerateOptions generate_options;
    CLI::App* generate = app.add_subcommand("generate", "emit a synthetic scene");
    generate->add_option("--config", generate_options.config_path, "config JSON")->required();
    generate->add_option("--out", generate_options.out_dir, "output directory");
    generate->allow_extras();

    gsreg::app::ExtractOptions extract_options;
    CLI::App* extract = app.add_subcommand("extract", "marching cubes on a checkpoint");
    extract->add_option("--checkpoint", extract_options.checkpoint, "sdfnet.bin path")
        ->required();
    extract->add_option("--out", extract_options.out_dir, "output directory");
    extract->add_option("--resolution", extract_options.resolution, "grid cells per axis");
    extract->add_option("--iso", extract_options.iso, "iso level (default 0)");
    extract->add_flag("--dump-grid", extract_options.dump_grid, "also write grid.raw + sidecar");

    gsreg::app::EvalOptions eval_options;
    CLI::App* eval = app.add_subcommand("eval", "geometric metrics for a mesh");
    eval->add_option("--mesh", eval_options.mesh_path, "mesh .obj or .ply")->required();
    eval->add_option("--shape", eval_options.shape, "sphere | plane | torus");
    eval->add_option("--radius", eval_options.radius, "sphere radius");
    eval->add_option("--torus-major", eval_options.torus_major, "torus major radius");
    eval->add_option("--torus-minor", eval_options.torus_minor, "torus minor radius");
    std::string eval_scene, eval_out;
    eval->add_option("--scene", eval_scene, "scene PLY for erank statistics");
    eval->add_option("--out", eval_out, "directory for eval.json");
    eval->add_option("--samples", eval_options.samples, "surface samples for chamfer");
    eval->add_option("--seed", eval_options.seed, "sampling seed");

    gsreg::app::GradcheckOptions gradcheck_options;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracles");
    gradcheck->add_option("--seed", gradcheck_options.seed, "base seed");
    gradcheck->add_option("--instances", gradcheck_options.instances, "instances per case");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            return app.exit(e);
        }
        std::cerr << "usage error: " << e.what() << "\n";
        return gsreg::app::kConfigError;
    }

    if (fit->parsed()) {
        std::vector<std::string> extras = fit->remaining();
        if (const int rc = collect_overrides(extras, fit_options.overrides)) return rc;
        return gsreg::app::cmd_fit(fit_options, std::cout, std::cerr);
    }
    if (generate->parsed()) {
        std::vector<std::string> extras = generate->remaining();
        if (const int rc = collect_overrides(extras, generate_options.overrides)) return rc;
        return gsreg::app::cmd_generate(generate_options, std::cout, std::cerr);
    }
    if (extract->parsed()) {
        return gsreg::app::cmd_extract(extract_options, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        if (!eval_scene.empty()) eval_options.scene_ply = eval_scene;
        if (!eval_out.empty()) eval_options.out_dir = eval_out;
        return gsreg::app::cmd_eval(eval_options, std::cout, std::cerr);
    }
    if (gradcheck->parsed()) {
        return gsreg::app::cmd_gradcheck(gradcheck_options, std::cout);
    }
    return gsreg::app::kConfigError;
}
