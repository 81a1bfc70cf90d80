#include "gsreg/trainer.hpp"

#include "gsreg/ply_io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace gsreg {
namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Eigen::VectorXd flatten(const std::vector<Vec3>& vs) {
    Eigen::VectorXd flat(3 * static_cast<Eigen::Index>(vs.size()));
    for (std::size_t i = 0; i < vs.size(); ++i) flat.segment<3>(3 * static_cast<Eigen::Index>(i)) = vs[i];
    return flat;
}

void check_finite_term(double value, const char* term, int iteration) {
    if (!std::isfinite(value)) {
        throw DivergenceError(std::string("non-finite ") + term + " loss at iteration " +
                              std::to_string(iteration));
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (total_iters < 0) throw std::domain_error("TrainConfig: total_iters must be >= 0");
    if (warmup_iters < 0 || warmup_iters > total_iters) {
        throw std::domain_error("TrainConfig: warmup_iters must lie in [0, total_iters]");
    }
    if (!(lr_gaussians > 0.0) || !(lr_network > 0.0)) {
        throw std::domain_error("TrainConfig: learning rates must be > 0");
    }
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
        throw std::domain_error("TrainConfig: adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::domain_error("TrainConfig: adam_eps must be > 0");
    if (sampling.eikonal_samples < 1) {
        throw std::domain_error("TrainConfig: eikonal_samples must be >= 1");
    }
    if (sampling.sdf_samples_per_gaussian < 1) {
        throw std::domain_error("TrainConfig: sdf_samples_per_gaussian must be >= 1");
    }
    if (!(sampling.sigma_expand > 0.0)) {
        throw std::domain_error("TrainConfig: sigma_expand must be > 0");
    }
    if (!(sampling.erank_epsilon > 0.0)) {
        throw std::domain_error("TrainConfig: erank_epsilon must be > 0");
    }
    if (checkpoint_every < 0) {
        throw std::domain_error("TrainConfig: checkpoint_every must be >= 0");
    }
    weights.validate();
}

void adam_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps) {
    if (param.size() != grad.size() || param.size() != state.m.size() ||
        param.size() != state.v.size()) {
        throw std::invalid_argument("adam_update: shape mismatch");
    }
    ++state.step;
    state.m = beta1 * state.m + (1.0 - beta1) * grad;
    state.v = beta2 * state.v + (1.0 - beta2) * grad.array().square().matrix();
    const double mc = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double vc = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    param.array() -=
        lr * (state.m.array() / mc) / ((state.v.array() / vc).sqrt() + eps);
}

LossBreakdown train_step(TrainState& state, GaussianScene& scene, SdfNetwork& net,
                         std::span<const Vec3> targets, const TrainConfig& cfg) {
    cfg.validate();
    if (state.iteration >= cfg.total_iters) {
        throw std::domain_error("train_step: iteration budget exhausted");
    }

    LossWeights effective = cfg.weights;
    const bool in_warmup = state.iteration < cfg.warmup_iters;
    if (in_warmup) {
        effective.lambda_erank = 0.0;
        effective.lambda_sdf_gauss = 0.0;
        if (!cfg.net_train_during_warmup) effective.lambda_eikonal = 0.0;
    }

    SceneGradients scene_grads;
    Eigen::VectorXd net_grads;
    const LossBreakdown breakdown = total_loss(scene, net, targets, effective, cfg.sampling,
                                               state.rng, &scene_grads, &net_grads);
    check_finite_term(breakdown.attach, "attach", state.iteration);
    check_finite_term(breakdown.erank, "erank", state.iteration);
    check_finite_term(breakdown.eikonal, "eikonal", state.iteration);
    check_finite_term(breakdown.sdf_gauss, "sdf-gauss", state.iteration);
    check_finite_term(breakdown.total, "total", state.iteration);

    Eigen::VectorXd means_flat(3 * static_cast<Eigen::Index>(scene.size()));
    Eigen::VectorXd scales_flat(3 * static_cast<Eigen::Index>(scene.size()));
    for (std::size_t k = 0; k < scene.size(); ++k) {
        means_flat.segment<3>(3 * static_cast<Eigen::Index>(k)) = scene.gaussians[k].mean;
        scales_flat.segment<3>(3 * static_cast<Eigen::Index>(k)) = scene.gaussians[k].scales;
    }
    adam_update(means_flat, flatten(scene_grads.means), state.means, cfg.lr_gaussians,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    adam_update(scales_flat, flatten(scene_grads.scales), state.scales, cfg.lr_gaussians,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    Eigen::VectorXd net_params = net.parameters();
    adam_update(net_params, net_grads, state.net, cfg.lr_network, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
    net.set_parameters(net_params);

    for (std::size_t k = 0; k < scene.size(); ++k) {
        Gaussian& g = scene.gaussians[k];
        g.mean = scene.bounds.clamp(means_flat.segment<3>(3 * static_cast<Eigen::Index>(k)));
        g.scales = scales_flat.segment<3>(3 * static_cast<Eigen::Index>(k)).cwiseMax(1e-6);
        g.rotation.normalize();
    }

    ++state.iteration;
    return breakdown;
}

double mean_abs_sdf_at_means(const SdfNetwork& net, const GaussianScene& scene) {
    if (scene.empty()) {
        throw std::domain_error("mean_abs_sdf_at_means: scene is empty");
    }
    double sum = 0.0;
    for (const Gaussian& g : scene.gaussians) {
        sum += std::abs(net.forward(g.mean));
    }
    return sum / static_cast<double>(scene.size());
}

double mean_eikonal_residual(const SdfNetwork& net, const Aabb& bounds, int count,
                             RandomEngine& rng) {
    if (count < 1) {
        throw std::domain_error("mean_eikonal_residual: count must be >= 1");
    }
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        const SdfEval eval = net.forward_with_input_gradient(rng.point_in_box(bounds));
        sum += std::abs(eval.gradient.norm() - 1.0);
    }
    return sum / static_cast<double>(count);
}

void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
    }
    out << "iteration,attach,erank,eikonal,sdf_gauss,total,mean_erank,wall_ms\n";
    for (const MetricsRow& row : history) {
        out << row.iteration << ',' << fmt_g17(row.attach) << ',' << fmt_g17(row.erank) << ','
            << fmt_g17(row.eikonal) << ',' << fmt_g17(row.sdf_gauss) << ','
            << fmt_g17(row.total) << ',' << fmt_g17(row.mean_erank) << ',';
        char wall[32];
        std::snprintf(wall, sizeof(wall), "%.3f", row.wall_ms);
        out << wall << '\n';
    }
    if (!out) {
        throw std::runtime_error("write_metrics_csv: write failed for " + path.string());
    }
}

namespace {

void write_summary_json(const FitResult& result, const TrainConfig& cfg,
                        const std::filesystem::path& path) {
    nlohmann::json j;
    j["iterations"] = cfg.total_iters;
    j["warmup_iters"] = cfg.warmup_iters;
    j["erank"] = {{"mean", result.final_mean_erank},
                  {"min", result.final_min_erank},
                  {"max", result.final_max_erank}};
    j["eikonal_residual"] = result.final_eikonal_residual;
    j["attach"] = result.final_attach;
    j["mean_abs_sdf_at_means"] = {{"warmup_end", result.warmup_end_mean_abs_sdf},
                                  {"final", result.final_mean_abs_sdf}};
    j["wall_ms"] = cfg.log_wall_time ? result.total_wall_ms : 0.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_summary_json: cannot open " + path.string());
    }
    out << j.dump(2) << '\n';
}

std::string zero_padded(int value) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", value);
    return buf;
}

}  // namespace

FitResult fit(GaussianScene& scene, SdfNetwork& net, std::span<const Vec3> targets,
              const TrainConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    cfg.validate();
    if (scene.empty()) {
        throw std::domain_error("fit: scene is empty");
    }
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
    }

    TrainState state(cfg.seed, scene.size(), net.parameter_count());
    FitResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.total_iters));

    using Clock = std::chrono::steady_clock;
    const auto run_start = Clock::now();
    bool warmup_recorded = false;
    auto record_warmup = [&] {
        result.warmup_end_mean_abs_sdf = mean_abs_sdf_at_means(net, scene);
        warmup_recorded = true;
    };

    for (int i = 0; i < cfg.total_iters; ++i) {
        if (!warmup_recorded && i == cfg.warmup_iters) record_warmup();
        const auto t0 = Clock::now();
        const LossBreakdown breakdown = train_step(state, scene, net, targets, cfg);
        const auto t1 = Clock::now();

        MetricsRow row;
        row.iteration = i;
        row.attach = breakdown.attach;
        row.erank = breakdown.erank;
        row.eikonal = breakdown.eikonal;
        row.sdf_gauss = breakdown.sdf_gauss;
        row.total = breakdown.total;
        row.mean_erank = mean_erank(scene);
        row.wall_ms = cfg.log_wall_time
                          ? std::chrono::duration<double, std::milli>(t1 - t0).count()
                          : 0.0;
        result.history.push_back(row);

        if (out_dir && cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0 &&
            i + 1 < cfg.total_iters) {
            const std::string tag = zero_padded(i + 1);
            save_scene_ply(scene, *out_dir / ("scene_" + tag + ".ply"));
            net.save(*out_dir / ("sdfnet_" + tag + ".bin"), &scene.bounds);
        }
    }
    if (!warmup_recorded) record_warmup();  // covers warmup_iters == total_iters

    result.total_wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - run_start).count();
    result.final_mean_abs_sdf = mean_abs_sdf_at_means(net, scene);
    result.final_attach = attach_loss(scene, targets) * cfg.weights.lambda_attach;

    double min_erank = 3.0, max_erank = 1.0, sum_erank = 0.0;
    for (const Gaussian& g : scene.gaussians) {
        const double e = effective_rank(g.scales).erank;
        min_erank = std::min(min_erank, e);
        max_erank = std::max(max_erank, e);
        sum_erank += e;
    }
    result.final_mean_erank = sum_erank / static_cast<double>(scene.size());
    result.final_min_erank = min_erank;
    result.final_max_erank = max_erank;

    RandomEngine residual_rng(cfg.seed ^ 0x5eed5eedULL);
    result.final_eikonal_residual = mean_eikonal_residual(net, scene.bounds, 4096, residual_rng);

    if (out_dir) {
        write_metrics_csv(result.history, *out_dir / "metrics.csv");
        save_scene_ply(scene, *out_dir / "scene.ply");
        net.save(*out_dir / "sdfnet.bin", &scene.bounds);
        write_summary_json(result, cfg, *out_dir / "summary.json");
    }
    return result;
}

}  // namespace gsreg
