#pragma once

#include "gsreg/gaussian.hpp"
#include "gsreg/sdf_net.hpp"

#include <span>
#include <vector>

namespace gsreg {

struct LossWeights {
    double lambda_erank = 0.1;
    double lambda_eikonal = 0.1;
    double lambda_sdf_gauss = 1.0;
    double lambda_attach = 1.0;

    void validate() const;
};

/// Per-term values for one evaluation. `attach` already carries its weight so
/// that total == attach + lambda_erank*erank + lambda_eikonal*eikonal +
/// lambda_sdf_gauss*sdf_gauss holds exactly; the other three terms are raw.
struct LossBreakdown {
    double total = 0.0;
    double attach = 0.0;
    double erank = 0.0;
    double eikonal = 0.0;
    double sdf_gauss = 0.0;
    int attach_points = 0;    // targets + means entering the chamfer terms
    int erank_gaussians = 0;
    int eikonal_samples = 0;
    int sdf_samples = 0;
};

struct SceneGradients {
    std::vector<Vec3> means;
    std::vector<Vec3> scales;

    static SceneGradients zero(std::size_t n) {
        SceneGradients g;
        g.means.assign(n, Vec3::Zero());
        g.scales.assign(n, Vec3::Zero());
        return g;
    }
};

/// Symmetric squared-distance attachment between Gaussian means and target
/// points: mean over targets of the squared distance to the nearest mean plus
/// mean over means of the squared distance to the nearest target.
double attach_loss(const GaussianScene& scene, std::span<const Vec3> targets,
                   std::vector<Vec3>* d_means = nullptr);

/// Mean of (|grad f(x)| - 1)^2 over `count` samples: 90% drawn from randomly
/// chosen Gaussians with their deviations widened by sigma_expand, 10% uniform
/// over the scene bounds. Gradients flow to the network only.
double eikonal_loss(const SdfNetwork& net, const GaussianScene& scene, int count,
                    double sigma_expand, RandomEngine& rng, Eigen::VectorXd* d_net = nullptr);

/// Mean of f(x_i)^2 over samples_per_gaussian draws from every Gaussian.
/// With gauss_grad, gradients also reach means and scales through the draw
/// x = mu + R diag(s) z with z held fixed.
double sdf_gauss_loss(const SdfNetwork& net, const GaussianScene& scene,
                      int samples_per_gaussian, RandomEngine& rng,
                      Eigen::VectorXd* d_net = nullptr, SceneGradients* d_scene = nullptr,
                      bool gauss_grad = true);

struct SamplingConfig {
    int eikonal_samples = 256;
    double sigma_expand = 3.0;
    int sdf_samples_per_gaussian = 2;
    bool gauss_grad_from_sdf = true;
    double erank_epsilon = 1e-8;
};

/// Weighted combination of all four terms. Terms with zero weight are
/// skipped entirely (no samples drawn, no gradient contribution). Evaluation
/// order is fixed: attach, erank, eikonal, sdf-gauss.
LossBreakdown total_loss(const GaussianScene& scene, const SdfNetwork& net,
                         std::span<const Vec3> targets, const LossWeights& weights,
                         const SamplingConfig& sampling, RandomEngine& rng,
                         SceneGradients* d_scene = nullptr, Eigen::VectorXd* d_net = nullptr);

}  // namespace gsreg
