#include "gsreg/gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gsreg {

void Gaussian::validate() const {
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(scales[i]) || scales[i] <= 0.0) {
            throw std::domain_error("Gaussian scale " + std::to_string(i) +
                                    " must be finite and > 0, got " + std::to_string(scales[i]));
        }
        if (!std::isfinite(mean[i])) {
            throw std::domain_error("Gaussian mean must be finite");
        }
    }
    if (std::abs(rotation.norm() - 1.0) > 1e-6) {
        throw std::domain_error("Gaussian rotation must be a unit quaternion");
    }
    if (!(opacity >= 0.0 && opacity <= 1.0)) {
        throw std::domain_error("Gaussian opacity must lie in [0, 1]");
    }
}

GaussianScene GaussianScene::create(std::vector<Gaussian> gaussians, const Aabb& bounds,
                                    std::uint64_t seed) {
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        gaussians[i].validate();
        if (!bounds.contains(gaussians[i].mean)) {
            throw std::domain_error("Gaussian " + std::to_string(i) +
                                    " mean lies outside scene bounds");
        }
    }
    GaussianScene scene;
    scene.gaussians = std::move(gaussians);
    scene.bounds = bounds;
    scene.seed = seed;
    return scene;
}

Vec3 normalized_squared_scales(const Vec3& scales) {
    for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(scales[i]) || scales[i] <= 0.0) {
            throw std::domain_error("normalized_squared_scales: scale " + std::to_string(i) +
                                    " must be finite and > 0");
        }
    }
    const Vec3 sq = scales.array().square();
    return sq / sq.sum();
}

ErankTerms effective_rank(const Vec3& scales) {
    ErankTerms out;
    out.q = normalized_squared_scales(scales);
    double h = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double qi = std::max(out.q[i], kEntropyClamp);
        h -= qi * std::log(qi);
    }
    out.entropy = h;
    out.erank = std::exp(h);
    return out;
}

double erank_penalty(const Gaussian& g, double epsilon) {
    Vec3 unused;
    return erank_penalty_with_grad(g.scales, epsilon, unused);
}

double erank_penalty_with_grad(const Vec3& scales, double epsilon, Vec3& d_scales) {
    if (!(epsilon > 0.0)) {
        throw std::domain_error("erank_penalty: epsilon must be > 0");
    }
    const ErankTerms terms = effective_rank(scales);

    // d(erank)/d(q_i), with clamped components treated as constant.
    Vec3 de_dq = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        if (terms.q[i] > kEntropyClamp) {
            de_dq[i] = -terms.erank * (std::log(terms.q[i]) + 1.0);
        }
    }

    const double shifted = terms.erank - 1.0 + epsilon;
    const double log_term = -std::log(shifted);
    double value = 0.0;
    double dp_derank = 0.0;
    if (log_term > 0.0) {
        value = log_term;
        dp_derank = -1.0 / shifted;
    }

    // Chain through q_i = s_i^2 / S:
    //   d(erank)/d(s_j) = (2 s_j / S) * (de_dq[j] - <de_dq, q>).
    const double S = scales.array().square().sum();
    const double inner = de_dq.dot(terms.q);
    for (int j = 0; j < 3; ++j) {
        d_scales[j] = dp_derank * (2.0 * scales[j] / S) * (de_dq[j] - inner);
    }

    // Smallest raw scale, lowest index on ties.
    int min_idx = 0;
    for (int j = 1; j < 3; ++j) {
        if (scales[j] < scales[min_idx]) min_idx = j;
    }
    value += scales[min_idx];
    d_scales[min_idx] += 1.0;
    return value;
}

ErankLossResult erank_loss(const GaussianScene& scene, double epsilon) {
    if (scene.empty()) {
        throw std::domain_error("erank_loss: scene is empty");
    }
    ErankLossResult out;
    out.d_scales.resize(scene.size());
    const double inv_n = 1.0 / static_cast<double>(scene.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < scene.size(); ++k) {
        Vec3 g;
        sum += erank_penalty_with_grad(scene.gaussians[k].scales, epsilon, g);
        out.d_scales[k] = g * inv_n;
    }
    out.value = sum * inv_n;
    return out;
}

double mean_erank(const GaussianScene& scene) {
    if (scene.empty()) {
        throw std::domain_error("mean_erank: scene is empty");
    }
    double sum = 0.0;
    for (const Gaussian& g : scene.gaussians) {
        sum += effective_rank(g.scales).erank;
    }
    return sum / static_cast<double>(scene.size());
}

Mat3 covariance(const Gaussian& g) {
    const Mat3 r = g.rotation.normalized().toRotationMatrix();
    return r * g.scales.array().square().matrix().asDiagonal() * r.transpose();
}

std::vector<Vec3> sample_from_gaussian(const Gaussian& g, int count, RandomEngine& rng) {
    if (count < 1) {
        throw std::domain_error("sample_from_gaussian: count must be >= 1");
    }
    const Mat3 r = g.rotation.normalized().toRotationMatrix();
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Vec3 z = rng.normal3();
        out.push_back(g.mean + r * (g.scales.array() * z.array()).matrix());
    }
    return out;
}

}  // namespace gsreg
