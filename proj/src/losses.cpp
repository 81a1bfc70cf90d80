#include "gsreg/losses.hpp"

#include "gsreg/nn_index.hpp"

#include <cmath>
#include <stdexcept>

namespace gsreg {

void LossWeights::validate() const {
    if (lambda_erank < 0 || lambda_eikonal < 0 || lambda_sdf_gauss < 0 || lambda_attach < 0) {
        throw std::domain_error("LossWeights: all weights must be >= 0");
    }
}

double attach_loss(const GaussianScene& scene, std::span<const Vec3> targets,
                   std::vector<Vec3>* d_means) {
    if (scene.empty()) {
        throw std::domain_error("attach_loss: scene is empty");
    }
    if (targets.empty()) {
        throw std::domain_error("attach_loss: target set is empty");
    }
    std::vector<Vec3> means;
    means.reserve(scene.size());
    for (const Gaussian& g : scene.gaussians) means.push_back(g.mean);

    if (d_means) {
        d_means->assign(scene.size(), Vec3::Zero());
    }
    const NearestNeighborIndex mean_index(means);
    const NearestNeighborIndex target_index(std::vector<Vec3>(targets.begin(), targets.end()));

    const double inv_t = 1.0 / static_cast<double>(targets.size());
    const double inv_m = 1.0 / static_cast<double>(means.size());

    double target_term = 0.0;
    for (const Vec3& t : targets) {
        const auto hit = mean_index.nearest(t);
        target_term += hit.dist2;
        if (d_means) {
            (*d_means)[static_cast<std::size_t>(hit.index)] +=
                2.0 * inv_t * (means[static_cast<std::size_t>(hit.index)] - t);
        }
    }
    double mean_term = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
        const auto hit = target_index.nearest(means[k]);
        mean_term += hit.dist2;
        if (d_means) {
            (*d_means)[k] += 2.0 * inv_m * (means[k] - targets[static_cast<std::size_t>(hit.index)]);
        }
    }
    return target_term * inv_t + mean_term * inv_m;
}

double eikonal_loss(const SdfNetwork& net, const GaussianScene& scene, int count,
                    double sigma_expand, RandomEngine& rng, Eigen::VectorXd* d_net) {
    if (scene.empty()) {
        throw std::domain_error("eikonal_loss: scene is empty");
    }
    if (count < 1) {
        throw std::domain_error("eikonal_loss: count must be >= 1");
    }
    const int n_uniform = count / 10;
    const int n_gauss = count - n_uniform;

    // All draws happen before any network evaluation so the sample set is
    // identical whether or not gradients are requested.
    std::vector<Vec3> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < n_gauss; ++i) {
        const Gaussian& g = scene.gaussians[rng.integer(scene.size())];
        const Vec3 z = rng.normal3();
        const Mat3 r = g.rotation.toRotationMatrix();
        samples.push_back(g.mean + r * (sigma_expand * g.scales.array() * z.array()).matrix());
    }
    for (int i = 0; i < n_uniform; ++i) {
        samples.push_back(rng.point_in_box(scene.bounds));
    }

    const double inv_n = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    for (const Vec3& x : samples) {
        const SdfEval eval = net.forward_with_input_gradient(x);
        const double norm = eval.gradient.norm();
        const double residual = norm - 1.0;
        loss += residual * residual * inv_n;
        if (d_net && norm > 1e-12) {
            const Vec3 d_grad = (2.0 * residual * inv_n / norm) * eval.gradient;
            net.accumulate_param_gradients(x, 0.0, d_grad, *d_net);
        }
    }
    return loss;
}

double sdf_gauss_loss(const SdfNetwork& net, const GaussianScene& scene,
                      int samples_per_gaussian, RandomEngine& rng, Eigen::VectorXd* d_net,
                      SceneGradients* d_scene, bool gauss_grad) {
    if (scene.empty()) {
        throw std::domain_error("sdf_gauss_loss: scene is empty");
    }
    if (samples_per_gaussian < 1) {
        throw std::domain_error("sdf_gauss_loss: samples_per_gaussian must be >= 1");
    }
    struct Draw {
        std::size_t gaussian;
        Vec3 z;
        Vec3 x;
    };
    std::vector<Draw> draws;
    draws.reserve(scene.size() * static_cast<std::size_t>(samples_per_gaussian));
    for (std::size_t k = 0; k < scene.size(); ++k) {
        const Gaussian& g = scene.gaussians[k];
        const Mat3 r = g.rotation.toRotationMatrix();
        for (int j = 0; j < samples_per_gaussian; ++j) {
            const Vec3 z = rng.normal3();
            draws.push_back({k, z, g.mean + r * (g.scales.array() * z.array()).matrix()});
        }
    }

    if (d_scene && d_scene->means.size() != scene.size()) {
        *d_scene = SceneGradients::zero(scene.size());
    }

    const double inv_n = 1.0 / static_cast<double>(draws.size());
    const bool want_scene = d_scene && gauss_grad;
    double loss = 0.0;
    for (const Draw& draw : draws) {
        double f;
        Vec3 g_x = Vec3::Zero();
        if (want_scene) {
            const SdfEval eval = net.forward_with_input_gradient(draw.x);
            f = eval.value;
            g_x = eval.gradient;
        } else {
            f = net.forward(draw.x);
        }
        loss += f * f * inv_n;
        const double upstream = 2.0 * f * inv_n;
        if (d_net) {
            net.accumulate_param_gradients(draw.x, upstream, Vec3::Zero(), *d_net);
        }
        if (want_scene) {
            const Mat3 r = scene.gaussians[draw.gaussian].rotation.toRotationMatrix();
            d_scene->means[draw.gaussian] += upstream * g_x;
            // x = mu + R diag(s) z, so df/ds_a = (grad f . R e_a) z_a.
            for (int a = 0; a < 3; ++a) {
                d_scene->scales[draw.gaussian][a] += upstream * g_x.dot(r.col(a)) * draw.z[a];
            }
        }
    }
    return loss;
}

LossBreakdown total_loss(const GaussianScene& scene, const SdfNetwork& net,
                         std::span<const Vec3> targets, const LossWeights& weights,
                         const SamplingConfig& sampling, RandomEngine& rng,
                         SceneGradients* d_scene, Eigen::VectorXd* d_net) {
    weights.validate();
    if (scene.empty()) {
        throw std::domain_error("total_loss: scene is empty");
    }
    LossBreakdown out;
    out.erank_gaussians = static_cast<int>(scene.size());

    if (d_scene) *d_scene = SceneGradients::zero(scene.size());
    if (d_net) d_net->setZero(net.parameter_count());

    if (weights.lambda_attach > 0.0) {
        std::vector<Vec3> attach_grads;
        const double raw =
            attach_loss(scene, targets, d_scene ? &attach_grads : nullptr);
        out.attach = weights.lambda_attach * raw;
        out.attach_points = static_cast<int>(targets.size() + scene.size());
        if (d_scene) {
            for (std::size_t k = 0; k < scene.size(); ++k) {
                d_scene->means[k] += weights.lambda_attach * attach_grads[k];
            }
        }
    }
    if (weights.lambda_erank > 0.0) {
        const ErankLossResult erank = erank_loss(scene, sampling.erank_epsilon);
        out.erank = erank.value;
        if (d_scene) {
            for (std::size_t k = 0; k < scene.size(); ++k) {
                d_scene->scales[k] += weights.lambda_erank * erank.d_scales[k];
            }
        }
    }
    if (weights.lambda_eikonal > 0.0) {
        Eigen::VectorXd eik_grad;
        if (d_net) eik_grad.setZero(net.parameter_count());
        out.eikonal = eikonal_loss(net, scene, sampling.eikonal_samples, sampling.sigma_expand,
                                   rng, d_net ? &eik_grad : nullptr);
        out.eikonal_samples = sampling.eikonal_samples;
        if (d_net) *d_net += weights.lambda_eikonal * eik_grad;
    }
    if (weights.lambda_sdf_gauss > 0.0) {
        Eigen::VectorXd sdf_grad;
        if (d_net) sdf_grad.setZero(net.parameter_count());
        SceneGradients sdf_scene = SceneGradients::zero(scene.size());
        out.sdf_gauss = sdf_gauss_loss(net, scene, sampling.sdf_samples_per_gaussian, rng,
                                       d_net ? &sdf_grad : nullptr,
                                       d_scene ? &sdf_scene : nullptr,
                                       sampling.gauss_grad_from_sdf);
        out.sdf_samples =
            static_cast<int>(scene.size()) * sampling.sdf_samples_per_gaussian;
        if (d_net) *d_net += weights.lambda_sdf_gauss * sdf_grad;
        if (d_scene) {
            for (std::size_t k = 0; k < scene.size(); ++k) {
                d_scene->means[k] += weights.lambda_sdf_gauss * sdf_scene.means[k];
                d_scene->scales[k] += weights.lambda_sdf_gauss * sdf_scene.scales[k];
            }
        }
    }
    out.total = out.attach + weights.lambda_erank * out.erank +
                weights.lambda_eikonal * out.eikonal + weights.lambda_sdf_gauss * out.sdf_gauss;
    return out;
}

}  // namespace gsreg
