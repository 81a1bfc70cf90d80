#pragma once

#include "gsreg/losses.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gsreg {

/// Thrown when a loss term turns non-finite during training.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int total_iters = 2000;
    int warmup_iters = 500;
    double lr_gaussians = 1e-2;
    double lr_network = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    LossWeights weights;
    SamplingConfig sampling;
    /// When set, the network already receives the Eikonal term during warmup;
    /// by default all three regularizers stay off until warmup_iters.
    bool net_train_during_warmup = false;
    int checkpoint_every = 0;   // 0 disables periodic checkpoints
    bool log_wall_time = true;  // false writes 0 for reproducible output files

    void validate() const;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;

    static AdamState zero(Eigen::Index n) {
        AdamState s;
        s.m = Eigen::VectorXd::Zero(n);
        s.v = Eigen::VectorXd::Zero(n);
        return s;
    }
};

/// One bias-corrected Adam step, in place. Shapes must match.
void adam_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps);

struct MetricsRow {
    int iteration = 0;
    double attach = 0.0;
    double erank = 0.0;
    double eikonal = 0.0;
    double sdf_gauss = 0.0;
    double total = 0.0;
    double mean_erank = 0.0;
    double wall_ms = 0.0;
};

struct TrainState {
    int iteration = 0;
    AdamState means;
    AdamState scales;
    AdamState net;
    RandomEngine rng;
    std::vector<MetricsRow> history;

    TrainState(std::uint64_t seed, std::size_t gaussian_count, int net_param_count)
        : means(AdamState::zero(3 * static_cast<Eigen::Index>(gaussian_count))),
          scales(AdamState::zero(3 * static_cast<Eigen::Index>(gaussian_count))),
          net(AdamState::zero(net_param_count)),
          rng(seed) {}
};

/// One optimization step: evaluate the (warmup-gated) total loss, apply Adam
/// to means, scales and network parameters, then restore the scene
/// invariants (positive scales, unit quaternions, means inside bounds).
/// Throws DivergenceError naming the first non-finite term.
LossBreakdown train_step(TrainState& state, GaussianScene& scene, SdfNetwork& net,
                         std::span<const Vec3> targets, const TrainConfig& cfg);

struct FitResult {
    std::vector<MetricsRow> history;
    double warmup_end_mean_abs_sdf = 0.0;  // mean |f(mu)| when warmup finished
    double final_mean_abs_sdf = 0.0;
    double final_mean_erank = 0.0;
    double final_min_erank = 0.0;
    double final_max_erank = 0.0;
    double final_eikonal_residual = 0.0;  // mean | |grad f| - 1 | over bounds
    double final_attach = 0.0;
    double total_wall_ms = 0.0;
};

/// Runs cfg.total_iters steps. With an output directory set, writes
/// metrics.csv, scene.ply, sdfnet.bin and summary.json there (plus periodic
/// checkpoints when cfg.checkpoint_every > 0).
FitResult fit(GaussianScene& scene, SdfNetwork& net, std::span<const Vec3> targets,
              const TrainConfig& cfg,
              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

double mean_abs_sdf_at_means(const SdfNetwork& net, const GaussianScene& scene);

/// Mean absolute deviation of the gradient norm from 1 over uniform samples
/// in the box.
double mean_eikonal_residual(const SdfNetwork& net, const Aabb& bounds, int count,
                             RandomEngine& rng);

void write_metrics_csv(const std::vector<MetricsRow>& history,
                       const std::filesystem::path& path);

}  // namespace gsreg
